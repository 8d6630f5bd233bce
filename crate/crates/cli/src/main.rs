//! `bcosfire`: detect curvilinear structures, evaluate against ground truth,
//! search filter parameters, generate synthetic stimuli and compare methods.

mod config;
mod dataset;
mod detect;
mod evaluate;
mod output;
mod synth;
mod ttest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use bcosfire::{StimulusKind, StimulusSpec};
use clap::{Args, Parser, Subcommand};

use config::{resolve_d_star, resolve_output, resolve_t_high, FileConfig, FilterArgs, Preset, DEFAULT_SEED};

#[derive(Parser)]
#[command(name = "bcosfire", version, about, propagate_version = true)]
struct Cli {
    /// Flat TOML file supplying defaults for any option below (same names,
    /// snake_case); command-line flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads; 0 uses one per core
    #[arg(long, global = true, env = "BCOSFIRE_THREADS", value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct DatasetArgs {
    /// Two-column CSV of image and ground-truth paths (relative to the manifest)
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    /// Directory holding `images/` and `gt/` with matching file stems
    #[arg(long, value_name = "DIR")]
    dataset: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on images and write response, orientation,
    /// thinned and mask PNGs plus a JSON summary per image. Orientation index
    /// k of n is stored as gray level round(255 k / (n - 1)).
    Detect {
        /// Image files or directories of images
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        filter: FilterArgs,
        /// High hysteresis threshold in (0, 1]; the low one is half of it
        #[arg(long)]
        t_high: Option<f64>,
        #[arg(long, short, value_name = "DIR")]
        output: Option<PathBuf>,
    },
    /// Sweep t_high over 0, 0.01, ..., 1 on a dataset and write
    /// per_threshold.csv, per_image.csv (at the best threshold), pr_curve.csv
    /// and best.json
    Evaluate {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        filter: FilterArgs,
        /// Matching tolerance in pixels (strict: distance < d_star)
        #[arg(long)]
        d_star: Option<f64>,
        #[arg(long, short, value_name = "DIR")]
        output: Option<PathBuf>,
    },
    /// Evaluate every point of a parameter grid on a training split and rank
    /// them by mean F at each point's best threshold
    Gridsearch {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        filter: FilterArgs,
        /// TOML file with lists `w`, `l`, `eta`, `sigma0`, `alpha`; missing
        /// keys use w=[5, 6.34, 8] l=[21, 29, 37] eta=[2] sigma0=[1, 2, 3] alpha=[0.5, 1]
        #[arg(long, value_name = "FILE")]
        grid: Option<PathBuf>,
        /// Fraction of images (first by name) used for training [default: 0.5]
        #[arg(long)]
        fraction: Option<f64>,
        /// File listing the training image names, one per line
        #[arg(long, value_name = "FILE")]
        split_file: Option<PathBuf>,
        #[arg(long)]
        d_star: Option<f64>,
        #[arg(long, short, value_name = "DIR")]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic stimulus and its ground truth; with --run also
    /// detect on it and print the response SNR
    Synth {
        /// circle, dashed-circle or gabor-curve [default: circle]
        #[arg(long)]
        kind: Option<StimulusKind>,
        /// Image width in pixels
        #[arg(long)]
        image_width: Option<usize>,
        /// Image height in pixels
        #[arg(long)]
        image_height: Option<usize>,
        /// Circle radius in pixels
        #[arg(long)]
        radius: Option<f64>,
        /// Drawn line width in pixels
        #[arg(long)]
        line_width: Option<f64>,
        /// Gap between dashes in degrees (dashed-circle)
        #[arg(long)]
        gap_deg: Option<f64>,
        /// Dash length as a multiple of the gap (dashed-circle)
        #[arg(long)]
        dash_to_gap: Option<f64>,
        /// Variance of the additive Gaussian noise (applied before clipping)
        #[arg(long)]
        noise_variance: Option<f64>,
        /// Noise seed [default: 42]
        #[arg(long)]
        seed: Option<u64>,
        /// Also run detection and report the SNR
        #[arg(long)]
        run: bool,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        t_high: Option<f64>,
        #[arg(long, short, value_name = "DIR")]
        output: Option<PathBuf>,
    },
    /// Paired two-sided t-test between two numeric CSV columns; prints h and p
    Ttest {
        /// First sample as FILE:COLUMN
        a: ttest::ColumnRef,
        /// Second sample as FILE:COLUMN
        b: ttest::ColumnRef,
        /// Significance level
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

/// Runs the command and returns the number of per-item failures.
fn execute(cli: Cli) -> Result<usize> {
    let file = FileConfig::load(cli.config.as_deref())?;
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Detect {
            inputs,
            filter,
            t_high,
            output,
        } => {
            let f = filter.resolve(&file, Preset::Crack)?;
            let t = resolve_t_high(t_high, &file, &f)?;
            let out = resolve_output(output, &file)?;
            detect::run(&inputs, &out, &f.params, f.polarity, t)
        }
        Command::Evaluate {
            data,
            filter,
            d_star,
            output,
        } => {
            let f = filter.resolve(&file, Preset::Crack)?;
            let d = resolve_d_star(d_star, &file)?;
            let out = resolve_output(output, &file)?;
            let pairs = dataset_pairs(&data, &file)?;
            evaluate::run_evaluate(&pairs, &out, &f.params, f.polarity, d)
        }
        Command::Gridsearch {
            data,
            filter,
            grid,
            fraction,
            split_file,
            d_star,
            output,
        } => {
            let f = filter.resolve(&file, Preset::Crack)?;
            let d = resolve_d_star(d_star, &file)?;
            let out = resolve_output(output, &file)?;
            let pairs = dataset_pairs(&data, &file)?;
            let grid = evaluate::Grid::load(grid.or(file.grid.clone()).as_deref())?;
            let split = split_file.or(file.split_file.clone());
            let opts = evaluate::GridOptions {
                grid: &grid,
                fraction: fraction.or(file.fraction).unwrap_or(0.5),
                split_file: split.as_deref(),
                polarity: f.polarity,
                d_star: d,
            };
            evaluate::run_gridsearch(&pairs, &out, &opts)
        }
        Command::Synth {
            kind,
            image_width,
            image_height,
            radius,
            line_width,
            gap_deg,
            dash_to_gap,
            noise_variance,
            seed,
            run,
            filter,
            t_high,
            output,
        } => {
            let kind = kind.or(file.kind).unwrap_or(StimulusKind::Circle);
            let variance = noise_variance.or(file.noise_variance).unwrap_or(0.0);
            let seed = seed.or(file.seed).unwrap_or(DEFAULT_SEED);
            let base = match kind {
                StimulusKind::Circle => StimulusSpec::circle(variance, seed),
                StimulusKind::DashedCircle => StimulusSpec::dashed_circle(3.0, variance, seed),
                StimulusKind::GaborCurve => StimulusSpec::gabor_curve(variance, seed),
            };
            let spec = StimulusSpec {
                width: image_width.or(file.image_width).unwrap_or(base.width),
                height: image_height.or(file.image_height).unwrap_or(base.height),
                radius: radius.or(file.radius).unwrap_or(base.radius),
                line_width: line_width.or(file.line_width).unwrap_or(base.line_width),
                gap_deg: gap_deg.or(file.gap_deg).unwrap_or(base.gap_deg),
                dash_to_gap: dash_to_gap.or(file.dash_to_gap).unwrap_or(base.dash_to_gap),
                ..base
            };
            spec.validate()?;
            let out = resolve_output(output, &file)?;
            let opts = if run {
                let f = filter.resolve(&file, Preset::Synthetic)?;
                let t = resolve_t_high(t_high, &file, &f)?;
                Some(synth::RunOptions {
                    params: f.params,
                    polarity: f.polarity,
                    t_high: t,
                })
            } else {
                None
            };
            synth::run(&spec, &out, opts.as_ref())?;
            Ok(0)
        }
        Command::Ttest { a, b, alpha } => {
            ttest::run(&a, &b, alpha)?;
            Ok(0)
        }
    }
}

fn dataset_pairs(data: &DatasetArgs, file: &FileConfig) -> Result<Vec<dataset::Pair>> {
    let manifest = data.manifest.clone().or_else(|| file.manifest.clone());
    let dir = data.dataset.clone().or_else(|| file.dataset.clone());
    // a flag for one source overrides a config-file value for the other
    let (manifest, dir) = match (&data.manifest, &data.dataset) {
        (Some(_), None) => (manifest, None),
        (None, Some(_)) => (None, dir),
        _ => (manifest, dir),
    };
    dataset::resolve(manifest.as_deref(), dir.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("{n} item(s) failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
