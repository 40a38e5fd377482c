//! Run configuration: a flat `key = value` file (TOML syntax, top-level keys
//! only). See the README for the key reference.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Price CSV. When absent a synthetic market is generated from `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default = "default_target")]
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanatory: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_file: Option<PathBuf>,
    #[serde(default = "default_max_missing")]
    pub max_missing: f64,

    #[serde(default = "default_features")]
    pub features: String,
    #[serde(default)]
    pub amnesia: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freeze_eigen_after: Option<usize>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default = "default_estimator")]
    pub estimator: String,
    #[serde(default = "default_prior_scale")]
    pub prior_scale: f64,

    #[serde(default = "default_endowment")]
    pub endowment: f64,
    #[serde(default = "default_multiplier")]
    pub multiplier: f64,
    #[serde(default)]
    pub cost_per_contract: f64,
    /// Days at the start with no position taken.
    #[serde(default)]
    pub warmup_days: usize,
    /// First evaluated date; earlier days are training only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup_end: Option<String>,
    #[serde(default = "default_days_per_year")]
    pub days_per_year: f64,

    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,

    #[serde(default = "default_synth_streams")]
    pub synth_streams: usize,
    #[serde(default = "default_synth_factors")]
    pub synth_factors: usize,
    #[serde(default = "default_synth_days")]
    pub synth_days: usize,
    #[serde(default = "default_synth_spread_rate")]
    pub synth_spread_rate: f64,
    #[serde(default = "default_synth_spread_vol")]
    pub synth_spread_vol: f64,
    #[serde(default = "default_synth_factor_vol")]
    pub synth_factor_vol: f64,
    #[serde(default = "default_synth_idio_vol")]
    pub synth_idio_vol: f64,
}

fn default_target() -> String {
    "TARGET".into()
}
fn default_max_missing() -> f64 {
    0.1
}
fn default_features() -> String {
    "raw".into()
}
fn default_estimator() -> String {
    "kf".into()
}
fn default_prior_scale() -> f64 {
    fls_core::estimator::DEFAULT_PRIOR_SCALE
}
fn default_endowment() -> f64 {
    1e8
}
fn default_multiplier() -> f64 {
    250.0
}
fn default_days_per_year() -> f64 {
    252.0
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_synth_streams() -> usize {
    10
}
fn default_synth_factors() -> usize {
    2
}
fn default_synth_days() -> usize {
    750
}
fn default_synth_spread_rate() -> f64 {
    0.5
}
fn default_synth_spread_vol() -> f64 {
    0.005
}
fn default_synth_factor_vol() -> f64 {
    0.01
}
fn default_synth_idio_vol() -> f64 {
    0.005
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults parse")
    }
}

/// Parsed `features` value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Features {
    Raw,
    Svd(usize),
}

impl Features {
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "raw" {
            return Ok(Features::Raw);
        }
        if let Some(k) = s.strip_prefix("svd:") {
            return match k.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(Features::Svd(k)),
                _ => Err(format!("features: invalid component count {k:?}")),
            };
        }
        Err(format!("features: expected \"raw\" or \"svd:<k>\", got {s:?}"))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// δ grid: `deltas` if given, else `delta`, deduplicated in order.
    pub fn delta_grid(&self) -> Result<Vec<f64>, CliError> {
        let raw: Vec<f64> = match (&self.deltas, self.delta) {
            (Some(d), _) => d.clone(),
            (None, Some(d)) => vec![d],
            (None, None) => Vec::new(),
        };
        if raw.is_empty() {
            return Err(CliError::Config("deltas: empty grid".into()));
        }
        let mut grid: Vec<f64> = Vec::with_capacity(raw.len());
        for d in raw {
            if !(d > 0.0 && d < 1.0) {
                return Err(CliError::Config(format!(
                    "deltas: {d} is outside the open interval (0, 1)"
                )));
            }
            if grid.contains(&d) {
                log::warn!("duplicate delta {d} dropped");
            } else {
                grid.push(d);
            }
        }
        Ok(grid)
    }

    pub fn warmup_end_date(&self) -> Result<Option<NaiveDate>, CliError> {
        self.warmup_end
            .as_deref()
            .map(|s| {
                NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| {
                    CliError::Config(format!("warmup_end: expected YYYY-MM-DD, got {s:?}"))
                })
            })
            .transpose()
    }

    /// Field-level checks not expressible in the schema.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("{field}: {msg}")));
        Features::parse(&self.features).map_err(CliError::Config)?;
        if !matches!(self.estimator.as_str(), "kf" | "fls") {
            return bad("estimator", format!("expected \"kf\" or \"fls\", got {:?}", self.estimator));
        }
        let positive = [
            ("prior_scale", self.prior_scale),
            ("endowment", self.endowment),
            ("multiplier", self.multiplier),
            ("days_per_year", self.days_per_year),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(name, format!("must be positive, got {v}"));
            }
        }
        if !(self.cost_per_contract >= 0.0 && self.cost_per_contract.is_finite()) {
            return bad("cost_per_contract", format!("must be non-negative, got {}", self.cost_per_contract));
        }
        if !(self.amnesia >= 0.0 && self.amnesia.is_finite()) {
            return bad("amnesia", format!("must be non-negative, got {}", self.amnesia));
        }
        self.warmup_end_date()?;
        if !(0.0..=1.0).contains(&self.max_missing) {
            return bad("max_missing", format!("must lie in [0, 1], got {}", self.max_missing));
        }
        if self.input.is_none() {
            if self.synth_streams == 0 {
                return bad("synth_streams", "must be at least 1".into());
            }
            if self.synth_days < 2 {
                return bad("synth_days", "must be at least 2".into());
            }
            if !(self.synth_spread_rate > 0.0 && self.synth_spread_rate < 1.0) {
                return bad("synth_spread_rate", format!("must lie in (0, 1), got {}", self.synth_spread_rate));
            }
            for (name, v) in [
                ("synth_spread_vol", self.synth_spread_vol),
                ("synth_factor_vol", self.synth_factor_vol),
                ("synth_idio_vol", self.synth_idio_vol),
            ] {
                if !(v >= 0.0 && v.is_finite()) {
                    return bad(name, format!("must be non-negative, got {v}"));
                }
            }
        }
        self.delta_grid()?;
        Ok(())
    }
}
