//! B-COSFIRE line filters: tuple-set configuration, Gaussian-weighted maximum
//! blurring, shifting, geometric-mean combination and the rotation-tolerant
//! response over a bank of orientations.
//!
//! Angles are measured counterclockwise (as displayed) from the +x axis. A
//! tuple `(rho, angle)` sits at pixel offset
//! `(round(rho cos angle), round(-rho sin angle))` from the filter centre,
//! since image rows grow downwards.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dog::{dog_filter, DogParams, Polarity};
use crate::error::{Error, Result};
use crate::image::{reflect, GrayImage, Padded};
use crate::par;

/// Number of orientations in the rotation-tolerant bank.
pub const DEFAULT_ORIENTATIONS: usize = 8;

/// Selectivity and tolerance of a line filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosfireParams {
    /// Preferred line width in pixels; enters only through `sigma = w / 1.92`.
    pub w: f64,
    /// Preferred line length in pixels (odd, at least 3).
    pub l: usize,
    /// Spacing between tuples along the line.
    pub eta: usize,
    /// Blur std-dev at the centre.
    pub sigma0: f64,
    /// Linear growth of the blur std-dev with distance from the centre.
    pub alpha: f64,
}

impl CosfireParams {
    pub fn new(w: f64, l: usize, eta: usize, sigma0: f64, alpha: f64) -> Result<Self> {
        let p = Self {
            w,
            l,
            eta,
            sigma0,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters used for pavement cracks: `w=6.34, l=29, eta=2, sigma0=2, alpha=1`.
    pub const fn crack() -> Self {
        Self {
            w: 6.34,
            l: 29,
            eta: 2,
            sigma0: 2.0,
            alpha: 1.0,
        }
    }

    /// Parameters used for the synthetic circle stimuli: `w=5, l=59, eta=2, sigma0=5, alpha=1`.
    pub const fn synthetic() -> Self {
        Self {
            w: 5.0,
            l: 59,
            eta: 2,
            sigma0: 5.0,
            alpha: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::param(format!("w must be positive, got {}", self.w)));
        }
        if self.l < 3 || self.l.is_multiple_of(2) {
            return Err(Error::param(format!("l must be odd and >= 3, got {}", self.l)));
        }
        let lambda = self.lambda();
        if self.eta < 1 || self.eta > lambda {
            return Err(Error::param(format!(
                "eta must lie in [1, {lambda}] for l = {}, got {}",
                self.l, self.eta
            )));
        }
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return Err(Error::param(format!("sigma0 must be >= 0, got {}", self.sigma0)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::param(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        Ok(())
    }

    /// Half-length `floor((l - 1) / 2)`.
    pub fn lambda(&self) -> usize {
        (self.l - 1) / 2
    }

    /// Blur std-dev used for tuples at distance `rho`.
    pub fn blur_sigma(&self, rho: usize) -> f64 {
        self.sigma0 + self.alpha * rho as f64
    }

    pub fn dog_params(&self, polarity: Polarity) -> Result<DogParams> {
        DogParams::for_width(self.w, polarity)
    }
}

/// Polar position, relative to the filter centre, where a DoG response is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tuple {
    pub rho: usize,
    /// Radians in `[0, 2 pi)`.
    pub angle: f64,
}

impl Tuple {
    /// Pixel offset `(dx, dy)` of the tuple from the filter centre.
    pub fn offset(&self) -> (isize, isize) {
        let r = self.rho as f64;
        (
            (r * self.angle.cos()).round() as isize,
            (-r * self.angle.sin()).round() as isize,
        )
    }
}

/// Configured structure of one oriented filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleSet {
    phi: f64,
    tuples: Vec<Tuple>,
}

impl TupleSet {
    /// Preferred orientation in `[0, pi)`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Distinct distances, ascending.
    pub fn rhos(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.tuples.iter().map(|t| t.rho).collect();
        r.sort_unstable();
        r.dedup();
        r
    }

    /// One `rho angle` line per tuple, six decimals each.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tuples {
            let _ = writeln!(s, "{:.6} {:.6}", t.rho as f64, t.angle);
        }
        s
    }

    /// Parses the output of [`TupleSet::to_text`]. The orientation is taken
    /// from the first off-centre tuple.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut tuples = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(r), Some(a), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::param(format!("line {}: expected `rho angle`", n + 1)));
            };
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::param(format!("line {}: {e}", n + 1)))
            };
            let (rho, angle) = (parse(r)?, parse(a)?);
            if rho < 0.0 || (rho - rho.round()).abs() > 1e-6 {
                return Err(Error::param(format!(
                    "line {}: rho must be a non-negative integer, got {rho}",
                    n + 1
                )));
            }
            tuples.push(Tuple {
                rho: rho.round() as usize,
                angle: angle.rem_euclid(2.0 * PI),
            });
        }
        let phi = tuples
            .iter()
            .find(|t| t.rho > 0)
            .map_or(0.0, |t| t.angle.rem_euclid(PI));
        Ok(Self { phi, tuples })
    }
}

/// Builds the tuple set of a line filter with orientation `phi`.
///
/// The set holds the centre, the two end points at distance `lambda`, and
/// pairs at `rho_i = eta * i` for `i = 1 ..= floor((lambda - 1) / eta) - 1`
/// on both sides of the centre along `phi`.
pub fn configure(params: &CosfireParams, phi: f64) -> Result<TupleSet> {
    params.validate()?;
    if !phi.is_finite() {
        return Err(Error::param("orientation must be finite"));
    }
    let phi = phi.rem_euclid(PI);
    let opposite = phi + PI;
    let lambda = params.lambda();
    let mut tuples = vec![
        Tuple { rho: 0, angle: 0.0 },
        Tuple {
            rho: lambda,
            angle: phi,
        },
        Tuple {
            rho: lambda,
            angle: opposite,
        },
    ];
    let last = ((lambda - 1) / params.eta) as isize - 1;
    for i in 1..=last {
        let rho = params.eta * i as usize;
        tuples.push(Tuple { rho, angle: phi });
        tuples.push(Tuple {
            rho,
            angle: opposite,
        });
    }
    let mut unique: Vec<Tuple> = Vec::with_capacity(tuples.len());
    for t in tuples {
        if !unique.iter().any(|u| u.rho == t.rho && u.angle == t.angle) {
            unique.push(t);
        }
    }
    Ok(TupleSet { phi, tuples: unique })
}

/// The `n` equidistant orientations `k pi / n`.
pub fn default_orientations(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * PI / n as f64).collect()
}

fn blur_weights(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    (-r..=r)
        .map(|d| {
            if d == 0 {
                1.0
            } else {
                (-((d * d) as f64) / (2.0 * sigma * sigma)).exp()
            }
        })
        .collect()
}

fn max_pass_horizontal(src: &GrayImage, g: &[f64]) -> GrayImage {
    let (w, h) = src.dimensions();
    let r = (g.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    par::for_each_row(&mut out, w, |y, row| {
        let line = src.row(y);
        let padded: Vec<f64> = (-r..w as isize + r).map(|i| line[reflect(i, w)]).collect();
        for (x, o) in row.iter_mut().enumerate() {
            let window = &padded[x..x + g.len()];
            *o = window
                .iter()
                .zip(g)
                .fold(0.0f64, |m, (&v, &wt)| m.max(v * wt));
        }
    });
    GrayImage::new(w, h, out).expect("dimensions preserved")
}

fn max_pass_vertical(src: &GrayImage, g: &[f64]) -> GrayImage {
    let (w, h) = src.dimensions();
    let r = (g.len() / 2) as isize;
    let mut out = vec![0.0f64; w * h];
    par::for_each_row(&mut out, w, |y, row| {
        for (k, &wt) in g.iter().enumerate() {
            let line = src.row(reflect(y as isize + k as isize - r, h));
            for (o, &v) in row.iter_mut().zip(line) {
                *o = o.max(v * wt);
            }
        }
    });
    GrayImage::new(w, h, out).expect("dimensions preserved")
}

/// Gaussian-weighted maximum over a square window of radius `ceil(3 sigma)`.
/// The weight is `exp(-(dx^2 + dy^2) / (2 sigma^2))`, so the centre weighs 1.
/// Input must be non-negative.
///
/// The product weight is separable, so the window maximum factors into a row
/// and a column pass. Both pass orders are evaluated and combined with `max`,
/// which makes the result exactly symmetric under quarter turns of the input.
pub fn max_blur(map: &GrayImage, sigma: f64) -> GrayImage {
    if sigma <= 0.0 {
        return map.clone();
    }
    let g = blur_weights(sigma);
    let hv = max_pass_horizontal(&max_pass_vertical(map, &g), &g);
    let vh = max_pass_vertical(&max_pass_horizontal(map, &g), &g);
    let data = hv.data().iter().zip(vh.data()).map(|(a, b)| a.max(*b)).collect();
    GrayImage::new(map.width(), map.height(), data).expect("dimensions preserved")
}

/// Reads `map` displaced by `(dx, dy)`: `out(x, y) = map(x + dx, y + dy)`,
/// reflecting coordinates that fall outside the image.
pub fn shift(map: &GrayImage, dx: isize, dy: isize) -> GrayImage {
    let (w, h) = map.dimensions();
    GrayImage::from_fn(w, h, |x, y| {
        map.get(reflect(x as isize + dx, w), reflect(y as isize + dy, h))
    })
}

/// Blurred and shifted DoG response of one tuple: the weighted maximum of
/// `dog` around the tuple position, brought back to the filter centre.
pub fn blur_shift(dog: &GrayImage, rho: usize, angle: f64, sigma0: f64, alpha: f64) -> Result<GrayImage> {
    if !(sigma0 >= 0.0 && sigma0.is_finite() && alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::param("sigma0 and alpha must be finite and >= 0"));
    }
    if dog.data().iter().any(|&v| v < 0.0) {
        return Err(Error::contract("blur_shift expects a rectified (non-negative) map"));
    }
    let blurred = max_blur(dog, sigma0 + alpha * rho as f64);
    let (dx, dy) = Tuple { rho, angle }.offset();
    Ok(shift(&blurred, dx, dy))
}

/// Log of the blurred DoG map for every distance a bank of filters needs,
/// padded by reflection so shifted reads need no bounds checks.
struct BlurBank {
    log_maps: BTreeMap<usize, Padded>,
}

impl BlurBank {
    fn new(dog: &GrayImage, params: &CosfireParams, rhos: &[usize]) -> Self {
        let pad = rhos.iter().copied().max().unwrap_or(0);
        let maps = par::map_slice(rhos, |&rho| {
            let blurred = max_blur(dog, params.blur_sigma(rho)).map(f64::ln);
            (rho, Padded::new(&blurred, pad))
        });
        Self {
            log_maps: maps.into_iter().collect(),
        }
    }

    /// Geometric mean of the shifted maps of `set`.
    ///
    /// Opposite tuples at equal distance are added as a pair before joining the
    /// running sum, so the result does not depend on which side is listed first.
    fn combine(&self, set: &TupleSet, width: usize, height: usize) -> GrayImage {
        let any = self.log_maps.values().next().expect("bank is non-empty");
        let stride = any.stride as isize;
        let linear = |t: &Tuple| {
            let (dx, dy) = t.offset();
            dy * stride + dx
        };
        let mut used = vec![false; set.len()];
        let mut factors: Vec<(&Padded, isize, Option<isize>)> = Vec::new();
        for (i, t) in set.tuples.iter().enumerate() {
            if used[i] {
                continue;
            }
            used[i] = true;
            let map = &self.log_maps[&t.rho];
            let partner = (i + 1..set.len()).find(|&j| {
                let u = &set.tuples[j];
                !used[j] && u.rho == t.rho && t.rho > 0 && {
                    let (a, b) = (t.offset(), u.offset());
                    a.0 == -b.0 && a.1 == -b.1
                }
            });
            if let Some(j) = partner {
                used[j] = true;
            }
            factors.push((map, linear(t), partner.map(|j| linear(&set.tuples[j]))));
        }
        let inv_n = 1.0 / set.len() as f64;
        let mut out = vec![0.0; width * height];
        par::for_each_row(&mut out, width, |y, row| {
            for (x, o) in row.iter_mut().enumerate() {
                let base = any.index(x, y) as isize;
                let mut sum = 0.0;
                for (map, a, b) in &factors {
                    let va = map.data[(base + a) as usize];
                    sum += match b {
                        Some(b) => va + map.data[(base + b) as usize],
                        None => va,
                    };
                }
                *o = (sum * inv_n).exp();
            }
        });
        GrayImage::new(width, height, out).expect("dimensions preserved")
    }
}

/// Response of the single filter with orientation `phi`.
pub fn response(image: &GrayImage, params: &CosfireParams, phi: f64, polarity: Polarity) -> Result<GrayImage> {
    let set = configure(params, phi)?;
    let dog = dog_filter(image, &params.dog_params(polarity)?);
    let bank = BlurBank::new(&dog, params, &set.rhos());
    Ok(bank.combine(&set, image.width(), image.height()))
}

/// Rotation-tolerant response and the index of the winning orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponsePair {
    pub response: GrayImage,
    /// Per-pixel index into `orientations`.
    pub orientation: Vec<u8>,
    /// Orientation preference of each filter in the bank, radians.
    pub orientations: Vec<f64>,
}

impl ResponsePair {
    pub fn width(&self) -> usize {
        self.response.width()
    }

    pub fn height(&self) -> usize {
        self.response.height()
    }

    pub fn orientation_at(&self, x: usize, y: usize) -> u8 {
        self.orientation[y * self.width() + x]
    }

    pub fn angle_at(&self, x: usize, y: usize) -> f64 {
        self.orientations[self.orientation_at(x, y) as usize]
    }

    /// Same pair with the response divided by its maximum.
    pub fn normalized(&self) -> Result<Self> {
        Ok(Self {
            response: crate::image::normalize_max(&self.response)?,
            orientation: self.orientation.clone(),
            orientations: self.orientations.clone(),
        })
    }
}

/// Maximum over the eight filters with orientations `k pi / 8`.
pub fn rotation_tolerant(image: &GrayImage, params: &CosfireParams, polarity: Polarity) -> Result<ResponsePair> {
    rotation_tolerant_over(image, params, polarity, &default_orientations(DEFAULT_ORIENTATIONS))
}

/// Maximum over filters with the given orientations. Ties go to the lowest index.
pub fn rotation_tolerant_over(
    image: &GrayImage,
    params: &CosfireParams,
    polarity: Polarity,
    orientations: &[f64],
) -> Result<ResponsePair> {
    if orientations.is_empty() || orientations.len() > u8::MAX as usize {
        return Err(Error::param("need between 1 and 255 orientations"));
    }
    let sets = orientations
        .iter()
        .map(|&phi| configure(params, phi))
        .collect::<Result<Vec<_>>>()?;
    let mut rhos: Vec<usize> = sets.iter().flat_map(|s| s.rhos()).collect();
    rhos.sort_unstable();
    rhos.dedup();

    let (w, h) = image.dimensions();
    let dog = dog_filter(image, &params.dog_params(polarity)?);
    let bank = BlurBank::new(&dog, params, &rhos);
    let maps = par::map_slice(&sets, |set| bank.combine(set, w, h));

    let mut best = maps[0].clone();
    let mut orientation = vec![0u8; w * h];
    for (k, map) in maps.iter().enumerate().skip(1) {
        for ((b, o), &v) in best.data_mut().iter_mut().zip(&mut orientation).zip(map.data()) {
            if v > *b {
                *b = v;
                *o = k as u8;
            }
        }
    }
    Ok(ResponsePair {
        response: best,
        orientation,
        orientations: orientations.to_vec(),
    })
}

/// Response of the `phi = 0` filter at the centre of a probe bar rotated by
/// each angle in `angles_deg`, relative to the unrotated bar.
///
/// Probe bars are bright on dark, `w` wide and `2 l` long, centred in an
/// image large enough to hold the whole filter support.
pub fn orientation_tuning(params: &CosfireParams, angles_deg: &[f64]) -> Result<Vec<f64>> {
    let set = configure(params, 0.0)?;
    let dog_params = params.dog_params(Polarity::BrightOnDark)?;
    let max_blur_radius = set
        .rhos()
        .iter()
        .map(|&r| (3.0 * params.blur_sigma(r)).ceil() as usize)
        .max()
        .unwrap_or(0);
    let margin = params.lambda() + max_blur_radius + dog_params.radius() + 2;
    let side = 2 * margin + 1;
    let bar_half_len = params.l as f64;
    let half_w = params.w / 2.0;

    let centre_response = |deg: f64| -> f64 {
        let (s, c) = deg.to_radians().sin_cos();
        let bar = GrayImage::from_fn(side, side, |x, y| {
            let rx = x as f64 - margin as f64;
            let ry = margin as f64 - y as f64;
            let along = rx * c + ry * s;
            let across = -rx * s + ry * c;
            if across.abs() <= half_w && along.abs() <= bar_half_len {
                1.0
            } else {
                0.0
            }
        });
        let dog = dog_filter(&bar, &dog_params);
        let mut log_sum = 0.0;
        for t in set.tuples() {
            let sigma = params.blur_sigma(t.rho);
            let r = if sigma > 0.0 { (3.0 * sigma).ceil() as isize } else { 0 };
            let (ox, oy) = t.offset();
            let (cx, cy) = (margin as isize + ox, margin as isize + oy);
            let mut m = 0.0f64;
            for dy in -r..=r {
                for dx in -r..=r {
                    let g = if dx == 0 && dy == 0 {
                        1.0
                    } else {
                        (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp()
                    };
                    m = m.max(dog.get((cx + dx) as usize, (cy + dy) as usize) * g);
                }
            }
            log_sum += m.ln();
        }
        (log_sum / set.len() as f64).exp()
    };

    let reference = centre_response(0.0);
    if reference <= 0.0 {
        return Err(Error::param("filter does not respond to its own prototype"));
    }
    Ok(par::map_slice(angles_deg, |&d| centre_response(d) / reference))
}

/// Full angular width (radians) over which the `phi = 0` filter keeps at
/// least 75% of its response to an aligned bar, probed at 1 degree steps over
/// `[-90, 90]` degrees with linear interpolation at the crossings.
pub fn orientation_bandwidth(params: &CosfireParams) -> Result<f64> {
    let angles: Vec<f64> = (-90..=90).map(f64::from).collect();
    let ratios = orientation_tuning(params, &angles)?;
    Ok(width_above(&angles, &ratios, 0.75).to_radians())
}

/// Width of the contiguous run around the zero angle where `ratios >= level`.
fn width_above(angles: &[f64], ratios: &[f64], level: f64) -> f64 {
    let zero = angles.iter().position(|&a| a == 0.0).expect("grid contains 0");
    let crossing = |inside: usize, outside: usize| {
        let (ri, ro) = (ratios[inside], ratios[outside]);
        let t = (ri - level) / (ri - ro);
        angles[inside] + t * (angles[outside] - angles[inside])
    };
    let mut hi = zero;
    while hi + 1 < angles.len() && ratios[hi + 1] >= level {
        hi += 1;
    }
    let upper = if hi + 1 < angles.len() {
        crossing(hi, hi + 1)
    } else {
        angles[hi]
    };
    let mut lo = zero;
    while lo > 0 && ratios[lo - 1] >= level {
        lo -= 1;
    }
    let lower = if lo > 0 { crossing(lo, lo - 1) } else { angles[lo] };
    upper - lower
}
