//! Helpers shared by the integration tests: seeded generators and
//! independent oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

use bcosfire::{BinaryMap, CosfireParams, GrayImage, MatchCounts};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small filter so property checks stay fast: five tuples at rho 0, 2, 6.
pub fn small_params() -> CosfireParams {
    CosfireParams::new(3.0, 13, 2, 1.0, 0.5).unwrap()
}

pub fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.random::<f64>())
}

/// Random bright strokes on black, so large parts of the DoG map are zero.
pub fn random_strokes(rng: &mut impl Rng, w: usize, h: usize) -> GrayImage {
    let mut img = GrayImage::zeros(w, h);
    for _ in 0..rng.random_range(1..4) {
        let (x0, y0) = (rng.random_range(0..w) as f64, rng.random_range(0..h) as f64);
        let a = rng.random_range(0.0..PI);
        let len = rng.random_range(4.0..(w.max(h) as f64));
        for s in 0..(len as usize * 2) {
            let t = s as f64 / 2.0;
            let (x, y) = (x0 + t * a.cos(), y0 - t * a.sin());
            if x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h {
                img.set(x as usize, y as usize, 1.0);
            }
        }
    }
    img
}

pub fn random_mask(rng: &mut impl Rng, w: usize, h: usize, p: f64) -> BinaryMap {
    BinaryMap::from_fn(w, h, |_, _| rng.random_bool(p))
}

/// All-pairs matching: a point matches if some point of the other map is
/// coincident or strictly closer than `d_star`.
pub fn brute_force_match(detected: &BinaryMap, truth: &BinaryMap, d_star: f64) -> MatchCounts {
    let det: Vec<(usize, usize)> = detected.points().collect();
    let gt: Vec<(usize, usize)> = truth.points().collect();
    let near = |a: (usize, usize), b: (usize, usize)| {
        let dx = a.0 as f64 - b.0 as f64;
        let dy = a.1 as f64 - b.1 as f64;
        a == b || (dx * dx + dy * dy).sqrt() < d_star
    };
    let tp = det.iter().filter(|&&d| gt.iter().any(|&g| near(d, g))).count();
    let fneg = gt.iter().filter(|&&g| !det.iter().any(|&d| near(d, g))).count();
    MatchCounts {
        true_positives: tp,
        false_positives: det.len() - tp,
        false_negatives: fneg,
    }
}

/// `Gamma((nu + 1) / 2) / Gamma(nu / 2)` for integer `nu >= 1`, by the
/// recurrence `Gamma(x + 1) = x Gamma(x)` from `Gamma(1/2) = sqrt(pi)`, `Gamma(1) = 1`.
fn gamma_ratio(nu: u32) -> f64 {
    let gamma_half = |k: u32| {
        // Gamma(k / 2)
        let (mut x, mut g) = if k.is_multiple_of(2) { (1.0, 1.0) } else { (0.5, PI.sqrt()) };
        while x < k as f64 / 2.0 - 1e-12 {
            g *= x;
            x += 1.0;
        }
        g
    };
    gamma_half(nu + 1) / gamma_half(nu)
}

/// Two-sided Student-t tail probability by composite Simpson quadrature of
/// the density over `[0, |t|]`.
pub fn t_two_sided_p(t: f64, nu: u32) -> f64 {
    let c = gamma_ratio(nu) / (nu as f64 * PI).sqrt();
    let pdf = |x: f64| c * (1.0 + x * x / nu as f64).powf(-(nu as f64 + 1.0) / 2.0);
    let b = t.abs();
    let n = 20_000;
    let hstep = b / n as f64;
    let mut s = pdf(0.0) + pdf(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(i as f64 * hstep);
    }
    1.0 - 2.0 * s * hstep / 3.0
}

/// Reads a comma-separated fixture with a header row into named columns.
pub fn read_columns(text: &str) -> Vec<(String, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines.next().unwrap().split(',').map(|s| s.trim().to_owned()).collect();
    let mut cols: Vec<(String, Vec<f64>)> = header.into_iter().map(|h| (h, Vec::new())).collect();
    for line in lines {
        for (col, field) in cols.iter_mut().zip(line.split(',')) {
            col.1.push(field.trim().parse().unwrap());
        }
    }
    cols
}

/// Checks that rotating the input a quarter turn counterclockwise rotates the
/// rotation-tolerant response exactly, and moves the winning orientation by
/// four steps of pi/8 wherever the winner is unique.
pub fn check_quarter_turn(image: &GrayImage, params: &CosfireParams, polarity: bcosfire::Polarity) -> Result<(), String> {
    use bcosfire::{default_orientations, response, rotation_tolerant};
    let pair = rotation_tolerant(image, params, polarity).map_err(|e| e.to_string())?;
    let turned = rotation_tolerant(&image.rotate90(), params, polarity).map_err(|e| e.to_string())?;
    if turned.response != pair.response.rotate90() {
        return Err("response is not rotated exactly".into());
    }
    let singles: Vec<GrayImage> = default_orientations(8)
        .into_iter()
        .map(|phi| response(image, params, phi, polarity).unwrap())
        .collect();
    let (w, h) = image.dimensions();
    for y in 0..h {
        for x in 0..w {
            let best = pair.response.get(x, y);
            let winners = singles.iter().filter(|r| r.get(x, y) == best).count();
            if winners != 1 || best == 0.0 {
                continue;
            }
            // (x, y) moves to (y, w - 1 - x) under the quarter turn
            let k = pair.orientation_at(x, y);
            let k_turned = turned.orientation_at(y, w - 1 - x);
            if k_turned != (k + 4) % 8 {
                return Err(format!("orientation {k} at ({x}, {y}) became {k_turned}"));
            }
        }
    }
    Ok(())
}
