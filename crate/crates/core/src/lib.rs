//! Trainable B-COSFIRE line filters and a four-step delineation pipeline for
//! curvilinear structures: filter, thin, hysteresis-threshold, close.
//!
//! ```no_run
//! use bcosfire::{delineate, load_image, CosfireParams, Polarity};
//!
//! let image = load_image("crack.bmp")?;
//! let mask = delineate(&image, &CosfireParams::crack(), 0.49, Polarity::DarkOnBright)?;
//! mask.save_png("crack_mask.png")?;
//! # Ok::<(), bcosfire::Error>(())
//! ```

pub mod cosfire;
pub mod dog;
pub mod error;
pub mod eval;
pub mod image;
pub mod par;
pub mod postproc;
pub mod synth;

pub use cosfire::{
    blur_shift, configure, default_orientations, max_blur, orientation_bandwidth, orientation_tuning,
    response, rotation_tolerant, rotation_tolerant_over, shift, CosfireParams, ResponsePair, Tuple,
    TupleSet, DEFAULT_ORIENTATIONS,
};
pub use dog::{dog_kernel, dog_response, DogParams, Polarity};
pub use error::{Error, Result};
pub use eval::{
    evaluate, match_tolerant, paired_ttest, prf, snr, sweep, sweep_prepared, threshold_grid, CurvePoint,
    EvalResult, MatchCounts, PrCurve, SweepReport, TTestResult, DEFAULT_D_STAR,
};
pub use image::{convolve, load_image, normalize_max, reflect, save_png, GrayImage, Kernel};
pub use postproc::{close, delineate, dilate, erode, hysteresis, thin, BinaryMap, Prepared};
pub use synth::{arc_mask, generate, GaborPath, Stimulus, StimulusKind, StimulusSpec};
