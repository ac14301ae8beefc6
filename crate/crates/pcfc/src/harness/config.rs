//! Pipeline configuration and the flat key-value config file format.
//!
//! One `key value` (or `key = value`) pair per line; `#` starts a comment.
//! Recognized keys: `window_px`, `divisions`, `vf`, `radius_px`, `grid_m`,
//! `amplitude_psi`, `alpha`, `epsilon`, `k`, `split`, `seeds` (comma-separated
//! RVE seeds; all but the last build the stored surface, the last one is the
//! held-out validation RVE). Unknown keys are an error.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::microgen::HEX_PACKING_LIMIT;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown config key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {msg}")]
    BadValue { line: usize, key: String, msg: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Full pipeline configuration; file keys override the defaults, CLI flags
/// override both.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub window_px: u32,
    pub divisions: u32,
    pub vf: f64,
    pub radius_px: f64,
    pub grid_m: u32,
    pub amplitude_psi: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub k: usize,
    pub split: f64,
    /// RVE seeds; the last entry is the held-out validation RVE.
    pub seeds: Vec<u64>,
    /// Base seed for the split/perturbation streams.
    pub base_seed: u64,
    /// Worker threads for the load-case batches (0 = all logical cores).
    pub threads: usize,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_px: 200,
            divisions: 100,
            vf: 0.60,
            radius_px: 15.6,
            grid_m: 5,
            amplitude_psi: 1000.0,
            alpha: 0.1,
            epsilon: 0.0,
            k: 4,
            split: 0.8,
            seeds: vec![139, 176, 160],
            base_seed: 42,
            threads: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap_or("");
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = match stripped.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => stripped
                    .split_once(char::is_whitespace)
                    .map(|(k, v)| (k.trim(), v.trim()))
                    .ok_or_else(|| ConfigError::BadValue {
                        line,
                        key: stripped.to_string(),
                        msg: "expected `key value`".into(),
                    })?,
            };
            let bad = |msg: &str| ConfigError::BadValue {
                line,
                key: key.to_string(),
                msg: msg.to_string(),
            };
            match key {
                "window_px" => config.window_px = value.parse().map_err(|_| bad("not an integer"))?,
                "divisions" => config.divisions = value.parse().map_err(|_| bad("not an integer"))?,
                "vf" => config.vf = value.parse().map_err(|_| bad("not a number"))?,
                "radius_px" => config.radius_px = value.parse().map_err(|_| bad("not a number"))?,
                "grid_m" => config.grid_m = value.parse().map_err(|_| bad("not an integer"))?,
                "amplitude_psi" => {
                    config.amplitude_psi = value.parse().map_err(|_| bad("not a number"))?
                }
                "alpha" => config.alpha = value.parse().map_err(|_| bad("not a number"))?,
                "epsilon" => config.epsilon = value.parse().map_err(|_| bad("not a number"))?,
                "k" => config.k = value.parse().map_err(|_| bad("not an integer"))?,
                "split" => config.split = value.parse().map_err(|_| bad("not a number"))?,
                "seeds" => {
                    let seeds: Result<Vec<u64>, _> = value
                        .split([',', ' '])
                        .filter(|s| !s.is_empty())
                        .map(str::parse)
                        .collect();
                    config.seeds = seeds.map_err(|_| bad("expected comma-separated integers"))?;
                }
                _ => {
                    return Err(ConfigError::UnknownKey { line, key: key.to_string() });
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.divisions < 2 {
            return fail(format!("divisions must be ≥ 2, got {}", self.divisions));
        }
        if !(0.0..HEX_PACKING_LIMIT).contains(&self.vf) {
            return fail(format!("vf must lie in [0, {HEX_PACKING_LIMIT}), got {}", self.vf));
        }
        if self.radius_px < 1.0 {
            return fail(format!("radius_px must be ≥ 1, got {}", self.radius_px));
        }
        if self.grid_m < 3 || self.grid_m.is_multiple_of(2) {
            return fail(format!("grid_m must be an odd integer ≥ 3, got {}", self.grid_m));
        }
        if !self.amplitude_psi.is_finite() || self.amplitude_psi <= 0.0 {
            return fail(format!("amplitude_psi must be positive, got {}", self.amplitude_psi));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha >= 1.0 {
            return fail(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return fail(format!("epsilon must be ≥ 0, got {}", self.epsilon));
        }
        if self.k == 0 {
            return fail("k must be ≥ 1".into());
        }
        if !self.split.is_finite() || self.split <= 0.0 || self.split >= 1.0 {
            return fail(format!("split must lie in (0, 1), got {}", self.split));
        }
        if self.seeds.len() < 2 {
            return fail("need at least two seeds (training RVEs plus one held-out)".into());
        }
        Ok(())
    }
}
