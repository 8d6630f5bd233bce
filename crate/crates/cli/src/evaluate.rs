//! Threshold sweeps over a dataset and grid search over filter parameters.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bcosfire::{par, sweep_prepared, BinaryMap, CosfireParams, Polarity, Prepared, SweepReport};
use serde::{Deserialize, Serialize};

use crate::dataset::{self, Loaded, Pair};
use crate::output::{create_dir, eval_fields, sig6, write_csv, write_json, EVAL_HEADER};

/// Loads every pair, reporting and skipping the ones that fail.
pub fn load_all(pairs: &[Pair]) -> (Vec<Loaded>, Vec<String>) {
    let mut loaded = Vec::new();
    let mut failed = Vec::new();
    for (pair, result) in pairs.iter().zip(par::map_slice(pairs, dataset::load)) {
        match result {
            Ok(l) => loaded.push(l),
            Err(e) => {
                eprintln!("error: {}: {e:#}", pair.name);
                failed.push(pair.name.clone());
            }
        }
    }
    (loaded, failed)
}

fn prepare(items: &[Loaded], params: &CosfireParams, polarity: Polarity) -> Result<Vec<Prepared>> {
    par::map_slice(items, |item| Prepared::new(&item.image, params, polarity))
        .into_iter()
        .zip(items)
        .map(|(r, item)| r.with_context(|| item.name.clone()))
        .collect()
}

fn truths(items: &[Loaded]) -> Vec<BinaryMap> {
    items.iter().map(|i| i.truth.clone()).collect()
}

#[derive(Serialize)]
struct Best<'a> {
    best_threshold: f64,
    precision: f64,
    recall: f64,
    f_measure: f64,
    images: Vec<&'a str>,
    failed: &'a [String],
    params: &'a CosfireParams,
    polarity: Polarity,
    d_star: f64,
}

fn write_report(out_dir: &Path, names: &[&str], report: &SweepReport) -> Result<()> {
    let header = |first: &[&'static str]| [first, EVAL_HEADER].concat();
    let mut rows = Vec::new();
    for (name, per) in names.iter().zip(&report.per_image) {
        for (t, r) in report.thresholds.iter().zip(per) {
            rows.push([vec![name.to_string(), sig6(*t)], eval_fields(r)].concat());
        }
    }
    write_csv(&out_dir.join("per_threshold.csv"), &header(&["image", "threshold"]), rows)?;

    let best_t = report.curve.best().threshold;
    let rows = names
        .iter()
        .zip(report.at_best())
        .map(|(name, r)| [vec![name.to_string(), sig6(best_t)], eval_fields(&r)].concat());
    write_csv(&out_dir.join("per_image.csv"), &header(&["image", "threshold"]), rows)?;

    let rows = report.curve.points().iter().map(|p| {
        vec![sig6(p.threshold), sig6(p.precision), sig6(p.recall), sig6(p.f_measure)]
    });
    write_csv(
        &out_dir.join("pr_curve.csv"),
        &["threshold", "precision", "recall", "f_measure"],
        rows,
    )
}

/// Returns the number of pairs that failed.
pub fn run_evaluate(
    pairs: &[Pair],
    out_dir: &Path,
    params: &CosfireParams,
    polarity: Polarity,
    d_star: f64,
) -> Result<usize> {
    let (items, failed) = load_all(pairs);
    if items.is_empty() {
        bail!("no image could be evaluated");
    }
    let prepared = prepare(&items, params, polarity)?;
    let report = sweep_prepared(&prepared, &truths(&items), d_star)?;
    create_dir(out_dir)?;
    let names: Vec<&str> = items.iter().map(|i| i.name.as_str()).collect();
    write_report(out_dir, &names, &report)?;
    let best = report.curve.best();
    write_json(
        &out_dir.join("best.json"),
        &Best {
            best_threshold: best.threshold,
            precision: best.precision,
            recall: best.recall,
            f_measure: best.f_measure,
            images: names.clone(),
            failed: &failed,
            params,
            polarity,
            d_star,
        },
    )?;
    println!(
        "best t_high {}: mean precision {}, recall {}, F {} over {} image(s)",
        sig6(best.threshold),
        sig6(best.precision),
        sig6(best.recall),
        sig6(best.f_measure),
        names.len()
    );
    Ok(failed.len())
}

/// Candidate values per parameter; missing keys use the default lists.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    pub w: Vec<f64>,
    pub l: Vec<usize>,
    pub eta: Vec<usize>,
    pub sigma0: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            w: vec![5.0, 6.34, 8.0],
            l: vec![21, 29, 37],
            eta: vec![2],
            sigma0: vec![1.0, 2.0, 3.0],
            alpha: vec![0.5, 1.0],
        }
    }
}

impl Grid {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading grid {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing grid {}", p.display()))
            }
        }
    }

    /// Cartesian product in `w, l, eta, sigma0, alpha` order, duplicates removed.
    pub fn points(&self) -> Vec<(f64, usize, usize, f64, f64)> {
        let mut out: Vec<(f64, usize, usize, f64, f64)> = Vec::new();
        for &w in &self.w {
            for &l in &self.l {
                for &eta in &self.eta {
                    for &s in &self.sigma0 {
                        for &a in &self.alpha {
                            let p = (w, l, eta, s, a);
                            if !out.contains(&p) {
                                out.push(p);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// The training images: those named in `split_file`, else the first
/// `ceil(n * fraction)` by name.
pub fn training_split(pairs: &[Pair], fraction: f64, split_file: Option<&Path>) -> Result<Vec<Pair>> {
    if let Some(path) = split_file {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading split file {}", path.display()))?;
        let mut chosen = Vec::new();
        for name in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let stem = Path::new(name).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let pair = pairs
                .iter()
                .find(|p| p.name == stem)
                .with_context(|| format!("split file names {name:?}, which is not in the dataset"))?;
            if !chosen.contains(pair) {
                chosen.push(pair.clone());
            }
        }
        if chosen.is_empty() {
            bail!("split file {} lists no images", path.display());
        }
        chosen.sort_by(|a, b| a.name.cmp(&b.name));
        return Ok(chosen);
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        bail!("split fraction must lie in (0, 1), got {fraction}");
    }
    let n = ((pairs.len() as f64 * fraction).ceil() as usize).clamp(1, pairs.len());
    Ok(pairs[..n].to_vec())
}

struct Scored {
    index: usize,
    params: CosfireParams,
    threshold: f64,
    precision: f64,
    recall: f64,
    f_measure: f64,
}

#[derive(Serialize)]
struct BestParams {
    w: f64,
    l: usize,
    eta: usize,
    sigma0: f64,
    alpha: f64,
    polarity: Polarity,
    /// Omitted when the best threshold is 0, which `detect` does not accept.
    #[serde(skip_serializing_if = "Option::is_none")]
    t_high: Option<f64>,
}

pub struct GridOptions<'a> {
    pub grid: &'a Grid,
    pub fraction: f64,
    pub split_file: Option<&'a Path>,
    pub polarity: Polarity,
    pub d_star: f64,
}

/// Returns the number of failed pairs and grid points.
pub fn run_gridsearch(pairs: &[Pair], out_dir: &Path, opts: &GridOptions<'_>) -> Result<usize> {
    let points = opts.grid.points();
    if points.is_empty() {
        bail!("the parameter grid is empty");
    }
    let train = training_split(pairs, opts.fraction, opts.split_file)?;
    let (items, failed) = load_all(&train);
    if items.is_empty() {
        bail!("no training image could be loaded");
    }
    let gt = truths(&items);
    let mut failures = failed.len();
    let mut scored = Vec::new();
    for (index, &(w, l, eta, s, a)) in points.iter().enumerate() {
        let params = match CosfireParams::new(w, l, eta, s, a) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: grid point w={w} l={l} eta={eta} sigma0={s} alpha={a}: {e}");
                failures += 1;
                continue;
            }
        };
        let report = sweep_prepared(&prepare(&items, &params, opts.polarity)?, &gt, opts.d_star)?;
        let best = report.curve.best();
        eprintln!(
            "[{}/{}] w={} l={l} eta={eta} sigma0={} alpha={}: F {} at t_high {}",
            index + 1,
            points.len(),
            sig6(w),
            sig6(s),
            sig6(a),
            sig6(best.f_measure),
            sig6(best.threshold)
        );
        scored.push(Scored {
            index,
            params,
            threshold: best.threshold,
            precision: best.precision,
            recall: best.recall,
            f_measure: best.f_measure,
        });
    }
    if scored.is_empty() {
        bail!("no valid grid point");
    }
    scored.sort_by(|a, b| b.f_measure.total_cmp(&a.f_measure).then(a.index.cmp(&b.index)));

    create_dir(out_dir)?;
    let rows = scored.iter().enumerate().map(|(rank, s)| {
        vec![
            (rank + 1).to_string(),
            sig6(s.params.w),
            s.params.l.to_string(),
            s.params.eta.to_string(),
            sig6(s.params.sigma0),
            sig6(s.params.alpha),
            sig6(s.threshold),
            sig6(s.precision),
            sig6(s.recall),
            sig6(s.f_measure),
        ]
    });
    write_csv(
        &out_dir.join("gridsearch.csv"),
        &["rank", "w", "l", "eta", "sigma0", "alpha", "best_threshold", "precision", "recall", "f_measure"],
        rows,
    )?;
    let split: String = items.iter().map(|i| format!("{}\n", i.name)).collect();
    std::fs::write(out_dir.join("training_split.txt"), split)?;
    let top = &scored[0];
    let best = BestParams {
        w: top.params.w,
        l: top.params.l,
        eta: top.params.eta,
        sigma0: top.params.sigma0,
        alpha: top.params.alpha,
        polarity: opts.polarity,
        t_high: (top.threshold > 0.0).then_some(top.threshold),
    };
    let path: PathBuf = out_dir.join("best_params.toml");
    std::fs::write(&path, toml::to_string(&best)?).with_context(|| format!("writing {}", path.display()))?;
    println!(
        "best: w={} l={} eta={} sigma0={} alpha={} t_high={} (mean F {} on {} training image(s))",
        sig6(best.w),
        best.l,
        best.eta,
        sig6(best.sigma0),
        sig6(best.alpha),
        sig6(top.threshold),
        sig6(top.f_measure),
        items.len()
    );
    Ok(failures)
}
