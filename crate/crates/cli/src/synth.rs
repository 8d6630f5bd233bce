use std::path::Path;

use anyhow::{Context, Result};
use bcosfire::{arc_mask, generate, save_png, snr, CosfireParams, Polarity, StimulusKind, StimulusSpec};
use serde::Serialize;

use crate::detect::detect_image;
use crate::output::{create_dir, sig6, write_json};

/// Options of a `synth --run` pass.
pub struct RunOptions {
    pub params: CosfireParams,
    pub polarity: Polarity,
    pub t_high: f64,
}

#[derive(Serialize)]
struct RunReport {
    snr_db: f64,
    mask_pixels: usize,
    truth_pixels: usize,
}

/// Writes `stimulus.png`, `truth.png` and `spec.toml`; with `run`, also the
/// detection artifacts and the SNR of the rotation-tolerant response.
pub fn run(spec: &StimulusSpec, out_dir: &Path, run: Option<&RunOptions>) -> Result<()> {
    spec.validate()?;
    let stimulus = generate(spec)?;
    create_dir(out_dir)?;
    save_png(&stimulus.image, out_dir.join("stimulus.png"))?;
    stimulus.truth.save_png(out_dir.join("truth.png"))?;
    let spec_path = out_dir.join("spec.toml");
    std::fs::write(&spec_path, toml::to_string(spec)?).with_context(|| format!("writing {}", spec_path.display()))?;
    println!("wrote {}x{} {:?} stimulus with {} truth pixels", spec.width, spec.height, spec.kind, stimulus.truth.count());

    let Some(opts) = run else {
        return Ok(());
    };
    let (prep, mask) = detect_image(
        "stimulus",
        "stimulus.png",
        &stimulus.image,
        out_dir,
        &opts.params,
        opts.polarity,
        opts.t_high,
    )?;
    // circles are scored along the whole circumference, gaps included
    let signal = match spec.kind {
        StimulusKind::GaborCurve => stimulus.truth.clone(),
        _ => arc_mask(spec)?,
    };
    let snr_db = snr(&prep.pair.response, &signal)?;
    write_json(
        &out_dir.join("run.json"),
        &RunReport {
            snr_db,
            mask_pixels: mask.count(),
            truth_pixels: stimulus.truth.count(),
        },
    )?;
    println!("SNR = {} dB", sig6(snr_db));
    Ok(())
}
