//! Optional JSON configuration shared by the subcommands.
//!
//! ```json
//! {
//!   "filter_bank": { "bands": [[8, 12], [12, 16]], "windows": [[0.5, 2.5]], "order": 2 },
//!   "m": 3,
//!   "train_fraction": 0.7,
//!   "max_prior": 4,
//!   "synth": { "erd_depth": 0.35, "drift_strength": 0.2 }
//! }
//! ```
//!
//! Every key is optional. Filter-bank fields not given fall back to the
//! default bank at the data's sampling rate.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use msfbcsp::dsp::default_filter_bank;
use msfbcsp::harness::SynthConfig;
use msfbcsp::pipeline::{DEFAULT_PATTERNS_PER_CLASS, MAX_PRIOR_SESSIONS};
use msfbcsp::FilterBankSpec;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterBankOverrides {
    pub bands: Option<Vec<(f64, f64)>>,
    pub windows: Option<Vec<(f64, f64)>>,
    pub order: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub filter_bank: FilterBankOverrides,
    pub m: Option<usize>,
    pub train_fraction: Option<f64>,
    pub max_prior: Option<usize>,
    pub synth: Option<SynthConfig>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Config =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if self.m == Some(0) {
            bail!("m must be at least 1");
        }
        if let Some(f) = self.train_fraction {
            if !(f > 0.0 && f < 1.0) {
                bail!("train_fraction {f} outside (0, 1)");
            }
        }
        if let Some(synth) = &self.synth {
            synth.validate()?;
        }
        // fs is only known once data is loaded; 256 Hz checks everything else
        self.filter_bank(256.0)?;
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m.unwrap_or(DEFAULT_PATTERNS_PER_CLASS)
    }

    pub fn max_prior(&self) -> usize {
        self.max_prior.unwrap_or(MAX_PRIOR_SESSIONS)
    }

    pub fn filter_bank(&self, fs: f64) -> Result<FilterBankSpec> {
        let mut spec = default_filter_bank(fs)?;
        let o = &self.filter_bank;
        if let Some(bands) = &o.bands {
            spec.bands = bands.clone();
        }
        if let Some(windows) = &o.windows {
            spec.windows = windows.clone();
        }
        if let Some(order) = o.order {
            spec.order = order;
        }
        spec.validate(None)?;
        Ok(spec)
    }
}
