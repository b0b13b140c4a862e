//! Flat `key=value` run configuration.

use crate::error::{Result, TsmsError};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariantChoice {
    All,
    Adaptive,
    Static,
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RmseScale {
    Normalized,
    Original,
}

/// Everything a `run` needs; defaults follow the reference configuration
/// (`L = 15`, `H = 1`, `omega = 25`, `tau = 0.01`, `sigma = 0.99`).
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub datasets: Vec<PathBuf>,
    pub seed: u64,
    pub lags: usize,
    pub horizon: usize,
    pub omega: usize,
    pub tau: f64,
    pub sigma: f64,
    pub variant: VariantChoice,
    pub periodic_updates: usize,
    pub background_cap: usize,
    pub learning_rate: f64,
    pub output_dir: PathBuf,
    pub rmse_scale: RmseScale,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            seed: 0,
            lags: 15,
            horizon: 1,
            omega: 25,
            tau: 0.01,
            sigma: crate::drift::DEFAULT_SIGMA,
            variant: VariantChoice::All,
            periodic_updates: crate::selector::DEFAULT_PERIODIC_UPDATES,
            background_cap: crate::shapley::DEFAULT_BACKGROUND_CAP,
            learning_rate: crate::tree::DEFAULT_LEARNING_RATE,
            output_dir: PathBuf::from("."),
            rmse_scale: RmseScale::Normalized,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(TsmsError::InvalidConfig(msg));
        if self.datasets.is_empty() {
            return fail("at least one dataset is required".into());
        }
        if self.lags == 0 {
            return fail("lags must be positive".into());
        }
        if self.horizon != 1 {
            return fail(format!(
                "horizon must be 1 (multi-step training is unsupported), got {}",
                self.horizon
            ));
        }
        if self.omega < self.lags + self.horizon {
            return fail(format!(
                "omega ({}) must be at least lags + horizon ({})",
                self.omega,
                self.lags + self.horizon
            ));
        }
        if !(self.tau > 0.0) {
            return fail(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return fail(format!("sigma must be in (0,1), got {}", self.sigma));
        }
        if self.periodic_updates == 0 {
            return fail("periodic_updates must be >= 1".into());
        }
        if self.background_cap == 0 {
            return fail("background_cap must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return fail(format!(
                "learning_rate must be in (0,1], got {}",
                self.learning_rate
            ));
        }
        Ok(())
    }

    /// Canonical one-line-per-key form, used for the provenance hash.
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        for d in &self.datasets {
            let _ = writeln!(out, "dataset={}", d.display());
        }
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "lags={}", self.lags);
        let _ = writeln!(out, "horizon={}", self.horizon);
        let _ = writeln!(out, "omega={}", self.omega);
        let _ = writeln!(out, "tau={}", self.tau);
        let _ = writeln!(out, "sigma={}", self.sigma);
        let _ = writeln!(out, "variant={}", variant_name(self.variant));
        let _ = writeln!(out, "periodic_updates={}", self.periodic_updates);
        let _ = writeln!(out, "background_cap={}", self.background_cap);
        let _ = writeln!(out, "learning_rate={}", self.learning_rate);
        let _ = writeln!(
            out,
            "rmse_scale={}",
            match self.rmse_scale {
                RmseScale::Normalized => "normalized",
                RmseScale::Original => "original",
            }
        );
        out
    }
}

fn variant_name(v: VariantChoice) -> &'static str {
    match v {
        VariantChoice::All => "all",
        VariantChoice::Adaptive => "adaptive",
        VariantChoice::Static => "static",
        VariantChoice::Periodic => "periodic",
    }
}

/// Parse a flat `key=value` config file. `#` starts a comment; `dataset`
/// may repeat. Unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(TsmsError::InvalidConfig(format!(
                "line {}: expected key=value, got {raw:?}",
                lineno + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| {
            TsmsError::InvalidConfig(format!("line {}: invalid {what}: {value:?}", lineno + 1))
        };
        match key {
            "dataset" => config.datasets.push(PathBuf::from(value)),
            "seed" => config.seed = value.parse().map_err(|_| bad("seed"))?,
            "lags" => config.lags = value.parse().map_err(|_| bad("lags"))?,
            "horizon" => config.horizon = value.parse().map_err(|_| bad("horizon"))?,
            "omega" => config.omega = value.parse().map_err(|_| bad("omega"))?,
            "tau" => config.tau = value.parse().map_err(|_| bad("tau"))?,
            "sigma" => config.sigma = value.parse().map_err(|_| bad("sigma"))?,
            "variant" => {
                config.variant = match value {
                    "all" => VariantChoice::All,
                    "adaptive" => VariantChoice::Adaptive,
                    "static" => VariantChoice::Static,
                    "periodic" => VariantChoice::Periodic,
                    _ => return Err(bad("variant")),
                }
            }
            "periodic_updates" => {
                config.periodic_updates = value.parse().map_err(|_| bad("periodic_updates"))?
            }
            "background_cap" => {
                config.background_cap = value.parse().map_err(|_| bad("background_cap"))?
            }
            "learning_rate" => {
                config.learning_rate = value.parse().map_err(|_| bad("learning_rate"))?
            }
            "output_dir" => config.output_dir = PathBuf::from(value),
            "rmse_scale" => {
                config.rmse_scale = match value {
                    "normalized" => RmseScale::Normalized,
                    "original" => RmseScale::Original,
                    _ => return Err(bad("rmse_scale")),
                }
            }
            _ => {
                return Err(TsmsError::InvalidConfig(format!(
                    "line {}: unknown key {key:?}",
                    lineno + 1
                )))
            }
        }
    }
    config.validate()?;
    Ok(config)
}
