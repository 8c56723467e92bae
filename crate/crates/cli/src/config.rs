//! TOML run configuration. Every key is optional; command-line flags win
//! over the file, and the file wins over built-in defaults.
//!
//! ```toml
//! seed = 7
//! jobs = 2
//! out = "runs/chain"
//!
//! [gibbs]
//! iterations = 3000
//! burn_in = 1000
//!
//! [torus]
//! prior = "rghs"
//! threshold = 0.1
//! ```

use crate::failure::{invalid, CliResult};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Master-seed fallback when neither flag nor config sets one.
pub const SEED_ENV: &str = "NC_BAYES_SEED";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub reps: Option<usize>,
    pub gibbs: GibbsSection,
    pub tv: TvSection,
    pub torus: TorusSection,
    pub hbayes: HBayesSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsSection {
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvSection {
    pub basis_count: Option<usize>,
    pub bandwidth: Option<f64>,
    pub noise: Option<String>,
    pub noise_count: Option<usize>,
    pub refresh: Option<bool>,
    pub times: Option<usize>,
    pub per_time: Option<usize>,
    pub eval_points: Option<usize>,
    pub grid: Option<usize>,
    pub lon_min: Option<f64>,
    pub lon_max: Option<f64>,
    pub lat_min: Option<f64>,
    pub lat_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorusSection {
    pub prior: Option<String>,
    pub noise_update: Option<bool>,
    pub tau_fixed: Option<bool>,
    pub slab_c: Option<f64>,
    pub threshold: Option<f64>,
    pub level: Option<f64>,
    pub alpha: Option<f64>,
    pub noise_count: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HBayesSection {
    pub w: Option<f64>,
    pub prior: Option<String>,
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Flag, then config, then `NC_BAYES_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, file: &FileConfig) -> CliResult<u64> {
    if let Some(s) = flag.or(file.seed) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| invalid(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(0),
    }
}
