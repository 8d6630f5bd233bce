//! Synthetic stimuli with exact centre-line ground truth: full and dashed
//! circles and a curve following a one-dimensional Gabor function, all bright
//! on a dark background with optional clipped Gaussian noise.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::postproc::BinaryMap;

pub const FOREGROUND: f64 = 1.0;
pub const BACKGROUND: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StimulusKind {
    Circle,
    DashedCircle,
    GaborCurve,
}

impl std::str::FromStr for StimulusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(Self::Circle),
            "dashed-circle" => Ok(Self::DashedCircle),
            "gabor-curve" => Ok(Self::GaborCurve),
            other => Err(Error::param(format!("unknown stimulus kind {other:?}"))),
        }
    }
}

/// Centre line `y(x) = y0 + A exp(-(x - x0)^2 / (2 s^2)) cos(2 pi (x - x0) / T)`
/// with `(x0, y0)` at the image centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaborPath {
    pub amplitude: f64,
    pub envelope: f64,
    pub period: f64,
}

impl Default for GaborPath {
    fn default() -> Self {
        Self {
            amplitude: 80.0,
            envelope: 90.0,
            period: 125.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StimulusSpec {
    pub kind: StimulusKind,
    pub width: usize,
    pub height: usize,
    pub radius: f64,
    pub line_width: f64,
    /// Gap between dashes, degrees of arc.
    pub gap_deg: f64,
    /// Length of each visible dash as a multiple of the gap.
    pub dash_to_gap: f64,
    pub noise_variance: f64,
    pub seed: u64,
    pub gabor: GaborPath,
}

impl Default for StimulusSpec {
    fn default() -> Self {
        Self::circle(0.0, 0)
    }
}

impl StimulusSpec {
    /// 300x300 circle of radius 100 drawn 5 pixels wide.
    pub fn circle(noise_variance: f64, seed: u64) -> Self {
        Self {
            kind: StimulusKind::Circle,
            width: 300,
            height: 300,
            radius: 100.0,
            line_width: 5.0,
            gap_deg: 3.0,
            dash_to_gap: 4.0,
            noise_variance,
            seed,
            gabor: GaborPath::default(),
        }
    }

    /// The circle broken into dashes separated by `gap_deg` degrees.
    pub fn dashed_circle(gap_deg: f64, noise_variance: f64, seed: u64) -> Self {
        Self {
            kind: StimulusKind::DashedCircle,
            gap_deg,
            ..Self::circle(noise_variance, seed)
        }
    }

    /// 500x300 Gabor curve drawn 5 pixels wide.
    pub fn gabor_curve(noise_variance: f64, seed: u64) -> Self {
        Self {
            kind: StimulusKind::GaborCurve,
            width: 500,
            height: 300,
            ..Self::circle(noise_variance, seed)
        }
    }

    pub fn centre(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::param("stimulus size must be positive"));
        }
        if !(self.line_width > 0.0 && self.line_width.is_finite()) {
            return Err(Error::param("line width must be positive"));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::param("noise variance must be >= 0"));
        }
        let half = self.line_width / 2.0;
        let (cx, cy) = self.centre();
        match self.kind {
            StimulusKind::Circle | StimulusKind::DashedCircle => {
                if !(self.radius >= 0.0 && self.radius.is_finite()) {
                    return Err(Error::param("radius must be >= 0"));
                }
                let reach = self.radius + half;
                if cx - reach < 0.0
                    || cy - reach < 0.0
                    || cx + reach > (self.width - 1) as f64
                    || cy + reach > (self.height - 1) as f64
                {
                    return Err(Error::param(format!(
                        "circle of radius {} and width {} does not fit in {}x{}",
                        self.radius, self.line_width, self.width, self.height
                    )));
                }
                if self.kind == StimulusKind::DashedCircle {
                    if !(self.gap_deg > 0.0 && self.gap_deg < 360.0) {
                        return Err(Error::param("gap must lie in (0, 360) degrees"));
                    }
                    if !(self.dash_to_gap > 0.0 && self.dash_to_gap.is_finite()) {
                        return Err(Error::param("dash-to-gap ratio must be positive"));
                    }
                }
            }
            StimulusKind::GaborCurve => {
                let g = &self.gabor;
                if !(g.envelope > 0.0 && g.period > 0.0 && g.amplitude.is_finite()) {
                    return Err(Error::param("Gabor envelope and period must be positive"));
                }
                if g.amplitude.abs() + half > cy - 1.0 {
                    return Err(Error::param("Gabor curve does not fit vertically"));
                }
            }
        }
        Ok(())
    }

    fn polar(&self, x: usize, y: usize) -> (f64, f64) {
        let (cx, cy) = self.centre();
        let dx = x as f64 - cx;
        let dy = cy - y as f64;
        let deg = dy.atan2(dx).to_degrees().rem_euclid(360.0);
        (dx.hypot(dy), deg)
    }

    fn on_dash(&self, deg: f64) -> bool {
        match self.kind {
            StimulusKind::DashedCircle => {
                let dash = self.dash_to_gap * self.gap_deg;
                deg.rem_euclid(dash + self.gap_deg) < dash
            }
            _ => true,
        }
    }

    fn gabor_y(&self, x: f64) -> f64 {
        let (cx, cy) = self.centre();
        let g = &self.gabor;
        let u = x - cx;
        cy + g.amplitude * (-(u * u) / (2.0 * g.envelope * g.envelope)).exp() * (2.0 * PI * u / g.period).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    pub image: GrayImage,
    /// One-pixel-wide centre line of the drawn structure.
    pub truth: BinaryMap,
}

fn ring(spec: &StimulusSpec, dashes: bool) -> BinaryMap {
    BinaryMap::from_fn(spec.width, spec.height, |x, y| {
        let (d, deg) = spec.polar(x, y);
        (d - spec.radius).abs() < 0.5 && (!dashes || spec.on_dash(deg))
    })
}

fn gabor_geometry(spec: &StimulusSpec) -> (BinaryMap, BinaryMap) {
    let (w, h) = (spec.width, spec.height);
    let half = spec.line_width / 2.0;
    let reach = half.ceil() as isize;
    let mut fg = BinaryMap::empty(w, h);
    let mut truth = BinaryMap::empty(w, h);
    let steps = (w - 1) * 20;
    for i in 0..=steps {
        let x = i as f64 / 20.0;
        let y = spec.gabor_y(x);
        let (px, py) = (x.round() as isize, y.round() as isize);
        if px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h {
            truth.set(px as usize, py as usize, true);
        }
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (qx, qy) = (px + dx, py + dy);
                if qx < 0 || qy < 0 || qx as usize >= w || qy as usize >= h {
                    continue;
                }
                if (qx as f64 - x).hypot(qy as f64 - y) <= half {
                    fg.set(qx as usize, qy as usize, true);
                }
            }
        }
    }
    (fg, truth)
}

/// Draws the stimulus and its centre line. Noise, if any, is i.i.d. Gaussian
/// with zero mean added to every pixel before clipping to `[0, 1]`.
pub fn generate(spec: &StimulusSpec) -> Result<Stimulus> {
    spec.validate()?;
    let (foreground, truth) = match spec.kind {
        StimulusKind::Circle | StimulusKind::DashedCircle => {
            let half = spec.line_width / 2.0;
            let fg = BinaryMap::from_fn(spec.width, spec.height, |x, y| {
                let (d, deg) = spec.polar(x, y);
                (d - spec.radius).abs() <= half && spec.on_dash(deg)
            });
            (fg, ring(spec, true))
        }
        StimulusKind::GaborCurve => gabor_geometry(spec),
    };
    let mut image = GrayImage::new(
        spec.width,
        spec.height,
        foreground
            .as_slice()
            .iter()
            .map(|&b| if b { FOREGROUND } else { BACKGROUND })
            .collect(),
    )?;
    if spec.noise_variance > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_variance.sqrt()).map_err(|e| Error::param(e.to_string()))?;
        for v in image.data_mut() {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    Ok(Stimulus { image, truth })
}

/// Centre line of the complete circle, gaps included.
pub fn arc_mask(spec: &StimulusSpec) -> Result<BinaryMap> {
    if spec.kind == StimulusKind::GaborCurve {
        return Err(Error::param("arc mask is only defined for circle stimuli"));
    }
    spec.validate()?;
    Ok(ring(spec, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_truth_has_circumference_many_pixels() {
        let s = generate(&StimulusSpec::circle(0.0, 0)).unwrap();
        let n = s.truth.count() as f64;
        let expected = 2.0 * PI * 100.0;
        assert!((n - expected).abs() / expected < 0.05, "{n}");
        assert_eq!(arc_mask(&StimulusSpec::circle(0.0, 0)).unwrap(), s.truth);
    }

    #[test]
    fn noiseless_stimulus_is_two_level() {
        for spec in [
            StimulusSpec::circle(0.0, 1),
            StimulusSpec::dashed_circle(5.0, 0.0, 1),
            StimulusSpec::gabor_curve(0.0, 1),
        ] {
            let s = generate(&spec).unwrap();
            assert!(s.image.data().iter().all(|&v| v == FOREGROUND || v == BACKGROUND));
        }
    }

    #[test]
    fn circle_line_is_five_pixels_across() {
        let s = generate(&StimulusSpec::circle(0.0, 0)).unwrap();
        let across = (0..300).filter(|&x| s.image.get(x, 150) > 0.5 && x > 150).count();
        assert_eq!(across, 5);
    }

    #[test]
    fn dashed_arc_mask_includes_gaps() {
        let spec = StimulusSpec::dashed_circle(3.0, 0.2, 9);
        let full = arc_mask(&StimulusSpec::circle(0.0, 0)).unwrap();
        assert_eq!(arc_mask(&spec).unwrap(), full);
        let s = generate(&spec).unwrap();
        assert!(s.truth.is_subset_of(&full));
        let frac = s.truth.count() as f64 / full.count() as f64;
        assert!((frac - 0.8).abs() < 0.03, "{frac}");
    }

    #[test]
    fn degenerate_radius_is_centre_pixel() {
        let spec = StimulusSpec {
            radius: 0.0,
            ..StimulusSpec::circle(0.0, 0)
        };
        let m = arc_mask(&spec).unwrap();
        assert_eq!(m.points().collect::<Vec<_>>(), vec![(150, 150)]);
    }

    #[test]
    fn gabor_has_no_arc_mask() {
        assert!(arc_mask(&StimulusSpec::gabor_curve(0.0, 0)).is_err());
    }

    #[test]
    fn invalid_specs() {
        let too_big = StimulusSpec {
            radius: 160.0,
            ..StimulusSpec::circle(0.0, 0)
        };
        assert!(generate(&too_big).is_err());
        assert!(generate(&StimulusSpec::dashed_circle(0.0, 0.0, 0)).is_err());
        assert!(generate(&StimulusSpec::dashed_circle(360.0, 0.0, 0)).is_err());
        assert!(generate(&StimulusSpec::circle(-0.1, 0)).is_err());
    }

    #[test]
    fn kind_parses() {
        assert_eq!("dashed-circle".parse::<StimulusKind>().unwrap(), StimulusKind::DashedCircle);
        assert!("square".parse::<StimulusKind>().is_err());
    }
}
