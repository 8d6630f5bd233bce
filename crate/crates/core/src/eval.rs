//! Distance-tolerant precision/recall, threshold sweeps, the paired t-test and
//! the response SNR.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cosfire::CosfireParams;
use crate::dog::Polarity;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::par;
use crate::postproc::{BinaryMap, Prepared};

/// Default matching tolerance in pixels.
pub const DEFAULT_D_STAR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MatchCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Offsets `(dx, dy)` with `dx^2 + dy^2 < d_star^2`; the zero offset is always included.
fn tolerance_offsets(d_star: f64) -> Vec<(isize, isize)> {
    let r = d_star.ceil() as isize;
    let lim = d_star * d_star;
    let mut out = vec![(0, 0)];
    for dy in -r..=r {
        for dx in -r..=r {
            if (dx, dy) != (0, 0) && ((dx * dx + dy * dy) as f64) < lim {
                out.push((dx, dy));
            }
        }
    }
    out
}

fn has_point_near(mask: &BinaryMap, x: usize, y: usize, offsets: &[(isize, isize)]) -> bool {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    offsets.iter().any(|&(dx, dy)| {
        let (nx, ny) = (x as isize + dx, y as isize + dy);
        nx >= 0 && ny >= 0 && nx < w && ny < h && mask.get(nx as usize, ny as usize)
    })
}

/// Counts detections with a truth point closer than `d_star` (true positives),
/// the remaining detections (false positives), and truth points with no
/// detection closer than `d_star` (false negatives). Matching is many-to-one.
/// With `d_star = 0` only coincident pixels match.
pub fn match_tolerant(detected: &BinaryMap, truth: &BinaryMap, d_star: f64) -> Result<MatchCounts> {
    detected.same_dimensions(truth)?;
    if !(d_star >= 0.0 && d_star.is_finite()) {
        return Err(Error::param(format!("d* must be finite and >= 0, got {d_star}")));
    }
    let offsets = tolerance_offsets(d_star);
    let mut counts = MatchCounts::default();
    for (x, y) in detected.points() {
        if has_point_near(truth, x, y, &offsets) {
            counts.true_positives += 1;
        } else {
            counts.false_positives += 1;
        }
    }
    counts.false_negatives = truth
        .points()
        .filter(|&(x, y)| !has_point_near(detected, x, y, &offsets))
        .count();
    Ok(counts)
}

/// Counts with precision, recall and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Precision, recall and F-measure from match counts.
///
/// When a ratio has an empty denominator it is 1 if the other map is also
/// empty and 0 otherwise; F is 0 when precision and recall are both 0.
pub fn prf(tp: usize, fp: usize, fneg: usize) -> EvalResult {
    let detected = tp + fp;
    let truth = tp + fneg;
    let ratio = |num: usize, den: usize, other_empty: bool| {
        if den > 0 {
            num as f64 / den as f64
        } else if other_empty {
            1.0
        } else {
            0.0
        }
    };
    let precision = ratio(tp, detected, truth == 0);
    let recall = ratio(tp, truth, detected == 0);
    let f_measure = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    EvalResult {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fneg,
        precision,
        recall,
        f_measure,
    }
}

/// `match_tolerant` followed by `prf`.
pub fn evaluate(detected: &BinaryMap, truth: &BinaryMap, d_star: f64) -> Result<EvalResult> {
    let c = match_tolerant(detected, truth, d_star)?;
    Ok(prf(c.true_positives, c.false_positives, c.false_negatives))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Dataset-mean precision, recall and F per threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    points: Vec<CurvePoint>,
}

impl PrCurve {
    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    /// Index of the highest mean F; the lowest threshold wins ties.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.points.iter().enumerate() {
            if p.f_measure > self.points[best].f_measure {
                best = i;
            }
        }
        best
    }

    pub fn best(&self) -> &CurvePoint {
        &self.points[self.best_index()]
    }
}

/// The thresholds `0, 0.01, ..., 1`.
pub fn threshold_grid() -> Vec<f64> {
    (0..=100).map(|k| k as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub thresholds: Vec<f64>,
    /// `per_image[i][k]` is image `i` at `thresholds[k]`.
    pub per_image: Vec<Vec<EvalResult>>,
    pub curve: PrCurve,
}

impl SweepReport {
    /// Per-image results at the best mean-F threshold.
    pub fn at_best(&self) -> Vec<EvalResult> {
        let k = self.curve.best_index();
        self.per_image.iter().map(|row| row[k]).collect()
    }
}

/// Runs the pipeline on every image and scores it at every grid threshold.
///
/// Response and thinned maps are computed once per image; only hysteresis,
/// closing and matching are repeated per threshold. At `t_h = 0` the binary map
/// is the non-zero support of the thinned map.
pub fn sweep(
    images: &[GrayImage],
    truths: &[BinaryMap],
    params: &CosfireParams,
    polarity: Polarity,
    d_star: f64,
) -> Result<SweepReport> {
    if images.is_empty() {
        return Err(Error::param("sweep needs at least one image"));
    }
    if images.len() != truths.len() {
        return Err(Error::param(format!(
            "{} images but {} ground-truth maps",
            images.len(),
            truths.len()
        )));
    }
    for (img, gt) in images.iter().zip(truths) {
        img.same_dimensions(gt.width(), gt.height())?;
    }
    params.validate()?;
    let prepared = par::map_slice(images, |img| Prepared::new(img, params, polarity))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    sweep_prepared(&prepared, truths, d_star)
}

/// [`sweep`] over already prepared images.
pub fn sweep_prepared(prepared: &[Prepared], truths: &[BinaryMap], d_star: f64) -> Result<SweepReport> {
    if prepared.is_empty() || prepared.len() != truths.len() {
        return Err(Error::param("need a non-empty, equally long set of prepared images and truths"));
    }
    let thresholds = threshold_grid();
    let pairs: Vec<(&Prepared, &BinaryMap)> = prepared.iter().zip(truths).collect();
    let per_image = par::map_slice(&pairs, |(prep, truth)| {
        thresholds
            .iter()
            .map(|&t| evaluate(&prep.binarize_sweep(t), truth, d_star))
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let n = per_image.len() as f64;
    let points = thresholds
        .iter()
        .enumerate()
        .map(|(k, &threshold)| {
            let mean = |f: fn(&EvalResult) -> f64| per_image.iter().map(|row| f(&row[k])).sum::<f64>() / n;
            CurvePoint {
                threshold,
                precision: mean(|r| r.precision),
                recall: mean(|r| r.recall),
                f_measure: mean(|r| r.f_measure),
            }
        })
        .collect();
    Ok(SweepReport {
        thresholds,
        per_image,
        curve: PrCurve { points },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    /// 1 if the difference is significant at the chosen level, else 0.
    pub h: u8,
    pub p: f64,
    pub t_statistic: f64,
    pub dof: usize,
}

/// Two-tailed paired Student t-test on `a - b`.
///
/// All-equal differences give `t = 0, p = 1` when they are zero and
/// `t = +-inf, p = 0` otherwise.
pub fn paired_ttest(a: &[f64], b: &[f64], alpha: f64) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::param(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::param("paired t-test needs at least two pairs"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("significance level must lie in (0, 1), got {alpha}")));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::param("samples must be finite"));
    }
    let n = diffs.len() as f64;
    let dof = diffs.len() - 1;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let (t, p) = if var == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean / (var / n).sqrt();
        let dist = StudentsT::new(0.0, 1.0, dof as f64).expect("dof >= 1");
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    Ok(TTestResult {
        h: u8::from(p < alpha),
        p,
        t_statistic: t,
        dof,
    })
}

/// `20 log10(A_s / A_n)` with `A_s` the mean response on `signal` and `A_n`
/// the mean elsewhere. Returns `+inf` when `A_n = 0 < A_s`, `-inf` when
/// `A_s = 0 < A_n`, and 0 when both vanish.
pub fn snr(response: &GrayImage, signal: &BinaryMap) -> Result<f64> {
    response.same_dimensions(signal.width(), signal.height())?;
    let (mut s_sum, mut s_n, mut n_sum, mut n_n) = (0.0, 0usize, 0.0, 0usize);
    for (&v, &m) in response.data().iter().zip(signal.as_slice()) {
        if m {
            s_sum += v;
            s_n += 1;
        } else {
            n_sum += v;
            n_n += 1;
        }
    }
    if s_n == 0 || n_n == 0 {
        return Err(Error::param("SNR needs both signal and background pixels"));
    }
    let a_s = s_sum / s_n as f64;
    let a_n = n_sum / n_n as f64;
    Ok(match (a_s > 0.0, a_n > 0.0) {
        (true, true) => 20.0 * (a_s / a_n).log10(),
        (true, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => 0.0,
    })
}
