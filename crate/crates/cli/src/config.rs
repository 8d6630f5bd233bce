//! Flat TOML configuration files and their merge with command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bcosfire::{CosfireParams, Polarity, StimulusKind, DEFAULT_D_STAR};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

/// Seed used when neither a flag nor the config file sets one.
pub const DEFAULT_SEED: u64 = 42;

/// Every key a config file may set. Flags with the same name win.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<Preset>,
    pub w: Option<f64>,
    pub l: Option<usize>,
    pub eta: Option<usize>,
    pub sigma0: Option<f64>,
    pub alpha: Option<f64>,
    pub polarity: Option<Polarity>,
    pub t_high: Option<f64>,
    pub d_star: Option<f64>,
    pub output: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub grid: Option<PathBuf>,
    pub fraction: Option<f64>,
    pub split_file: Option<PathBuf>,
    pub kind: Option<StimulusKind>,
    pub image_width: Option<usize>,
    pub image_height: Option<usize>,
    pub radius: Option<f64>,
    pub line_width: Option<f64>,
    pub gap_deg: Option<f64>,
    pub dash_to_gap: Option<f64>,
    pub noise_variance: Option<f64>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // relative paths in a config file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.output,
            &mut cfg.manifest,
            &mut cfg.dataset,
            &mut cfg.grid,
            &mut cfg.split_file,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// w=6.34 l=29 eta=2 sigma0=2 alpha=1, dark-on-bright, t_high=0.49
    Crack,
    /// w=5 l=59 eta=2 sigma0=5 alpha=1, bright-on-dark, t_high=0.75
    Synthetic,
}

impl Preset {
    fn params(self) -> CosfireParams {
        match self {
            Preset::Crack => CosfireParams::crack(),
            Preset::Synthetic => CosfireParams::synthetic(),
        }
    }

    fn polarity(self) -> Polarity {
        match self {
            Preset::Crack => Polarity::DarkOnBright,
            Preset::Synthetic => Polarity::BrightOnDark,
        }
    }

    fn t_high(self) -> f64 {
        match self {
            Preset::Crack => 0.49,
            Preset::Synthetic => 0.75,
        }
    }
}

/// Filter and pipeline options shared by the processing subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct FilterArgs {
    /// Parameter set the other filter options start from [default: crack, synthetic for `synth`]
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Preferred line width in pixels
    #[arg(long)]
    pub w: Option<f64>,
    /// Preferred line length in pixels
    #[arg(long)]
    pub l: Option<usize>,
    /// Spacing between tuple positions along the line
    #[arg(long)]
    pub eta: Option<usize>,
    /// Blur std-dev at the filter centre
    #[arg(long)]
    pub sigma0: Option<f64>,
    /// Growth of the blur std-dev with distance from the centre
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Line polarity: dark-on-bright or bright-on-dark
    #[arg(long)]
    pub polarity: Option<Polarity>,
}

/// Resolved filter settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Filter {
    pub params: CosfireParams,
    pub polarity: Polarity,
    pub preset_t_high: f64,
}

impl FilterArgs {
    pub fn resolve(&self, file: &FileConfig, default_preset: Preset) -> Result<Filter> {
        let preset = self.preset.or(file.preset).unwrap_or(default_preset);
        let base = preset.params();
        let params = CosfireParams::new(
            self.w.or(file.w).unwrap_or(base.w),
            self.l.or(file.l).unwrap_or(base.l),
            self.eta.or(file.eta).unwrap_or(base.eta),
            self.sigma0.or(file.sigma0).unwrap_or(base.sigma0),
            self.alpha.or(file.alpha).unwrap_or(base.alpha),
        )?;
        Ok(Filter {
            params,
            polarity: self.polarity.or(file.polarity).unwrap_or(preset.polarity()),
            preset_t_high: preset.t_high(),
        })
    }
}

pub fn resolve_t_high(flag: Option<f64>, file: &FileConfig, filter: &Filter) -> Result<f64> {
    let t = flag.or(file.t_high).unwrap_or(filter.preset_t_high);
    if !(t > 0.0 && t <= 1.0) {
        bail!("t_high must lie in (0, 1], got {t}");
    }
    Ok(t)
}

pub fn resolve_d_star(flag: Option<f64>, file: &FileConfig) -> Result<f64> {
    let d = flag.or(file.d_star).unwrap_or(DEFAULT_D_STAR);
    if !(d >= 0.0 && d.is_finite()) {
        bail!("d_star must be finite and >= 0, got {d}");
    }
    Ok(d)
}

pub fn resolve_output(flag: Option<PathBuf>, file: &FileConfig) -> Result<PathBuf> {
    flag.or_else(|| file.output.clone())
        .context("an output directory is required (--output or `output` in the config file)")
}
