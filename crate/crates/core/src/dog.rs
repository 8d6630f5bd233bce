//! Centre-on Difference-of-Gaussians kernels and rectified DoG filtering.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{convolve, GrayImage, Kernel};

/// Ratio between the preferred line width and the outer Gaussian std-dev.
pub const WIDTH_PER_SIGMA: f64 = 1.92;

/// Which structures count as foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    /// Bright lines on a dark background.
    BrightOnDark,
    /// Dark lines on a bright background (pavement cracks). The image is
    /// inverted before filtering.
    #[default]
    DarkOnBright,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::BrightOnDark => "bright-on-dark",
            Polarity::DarkOnBright => "dark-on-bright",
        })
    }
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bright-on-dark" | "bright" => Ok(Polarity::BrightOnDark),
            "dark-on-bright" | "dark" => Ok(Polarity::DarkOnBright),
            other => Err(Error::param(format!("unknown polarity {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DogParams {
    sigma: f64,
    pub polarity: Polarity,
}

impl DogParams {
    pub fn new(sigma: f64, polarity: Polarity) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param(format!("DoG sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma, polarity })
    }

    /// Parameters tuned to lines of width `w`: `sigma = w / 1.92`.
    pub fn for_width(w: f64, polarity: Polarity) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::param(format!("line width must be positive, got {w}")));
        }
        Self::new(w / WIDTH_PER_SIGMA, polarity)
    }

    /// Outer Gaussian std-dev.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Inner Gaussian std-dev, fixed at half the outer one.
    pub fn inner_sigma(&self) -> f64 {
        0.5 * self.sigma
    }

    /// Truncation radius `ceil(3 sigma)`.
    pub fn radius(&self) -> usize {
        (3.0 * self.sigma).ceil() as usize
    }
}

/// Samples the DoG on a `(2 ceil(3 sigma) + 1)^2` grid. Not renormalized after
/// truncation.
pub fn dog_kernel(params: &DogParams) -> Kernel {
    let outer = params.sigma;
    let inner = params.inner_sigma();
    let (vi, vo) = (inner * inner, outer * outer);
    Kernel::from_fn(params.radius(), |dx, dy| {
        let d2 = (dx * dx + dy * dy) as f64;
        (-d2 / (2.0 * vi)).exp() / (2.0 * PI * vi) - (-d2 / (2.0 * vo)).exp() / (2.0 * PI * vo)
    })
    .expect("DoG weights are finite for positive sigma")
}

/// Half-wave rectified DoG response tuned to lines of width `w`.
pub fn dog_response(image: &GrayImage, w: f64, polarity: Polarity) -> Result<GrayImage> {
    let params = DogParams::for_width(w, polarity)?;
    Ok(dog_filter(image, &params))
}

pub(crate) fn dog_filter(image: &GrayImage, params: &DogParams) -> GrayImage {
    let kernel = dog_kernel(params);
    let mut out = match params.polarity {
        Polarity::BrightOnDark => convolve(image, &kernel),
        Polarity::DarkOnBright => convolve(&image.inverted(), &kernel),
    };
    for v in out.data_mut() {
        *v = v.max(0.0);
    }
    out
}
