//! Number formatting and artifact writers.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bcosfire::{EvalResult, GrayImage, ResponsePair};
use serde::Serialize;

/// Formats with six significant digits, trailing zeros removed, switching to
/// exponent notation outside `[1e-4, 1e6)`.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.5e}");
    let exponent: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-4..6).contains(&exponent) {
        let decimals = (5 - exponent).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let (mantissa, exp) = sci.split_once('e').unwrap();
        format!("{}e{exp}", trim_zeros(mantissa.to_owned()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub const EVAL_HEADER: &[&str] = &["tp", "fp", "fn", "precision", "recall", "f_measure"];

pub fn eval_fields(r: &EvalResult) -> Vec<String> {
    vec![
        r.true_positives.to_string(),
        r.false_positives.to_string(),
        r.false_negatives.to_string(),
        sig6(r.precision),
        sig6(r.recall),
        sig6(r.f_measure),
    ]
}

/// Orientation index `k` of `n` stored as gray level `round(255 k / (n - 1))`.
pub fn orientation_image(pair: &ResponsePair) -> GrayImage {
    let n = pair.orientations.len().max(2) - 1;
    let (w, h) = (pair.width(), pair.height());
    GrayImage::from_fn(w, h, |x, y| {
        let k = pair.orientation_at(x, y) as f64;
        (255.0 * k / n as f64).round() / 255.0
    })
}

pub fn artifact(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.49), "0.49");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(0.957503647865), "0.957504");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(-2.5), "-2.5");
        assert_eq!(sig6(0.00016126396), "0.000161264");
        assert_eq!(sig6(1.5e-7), "1.5e-7");
        assert_eq!(sig6(2.0e9), "2e9");
        assert_eq!(sig6(f64::INFINITY), "inf");
        assert_eq!(sig6(0.0), "0");
    }
}
