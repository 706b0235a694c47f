//! Scenario configuration files.
//!
//! A config file is TOML with one table per scenario:
//!
//! ```toml
//! [quantiles]
//! model = { kind = "quantile-model" }
//! N = 500
//! n = 50
//! sampling_design = "pareto"
//! resampling_design = "pareto"
//! M = 500
//! reps = 300
//! p_grid = [0.10, 0.25, 0.50, 0.75, 0.90]
//! alpha = [0.05]
//! seed = 42
//! ```
//!
//! `N` may be replaced by the sampling fraction `f`; when both are given
//! they must agree to within 0.005.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::designs::DesignKind;
use crate::error::{Error, Result};
use crate::popgen::{ModelSpec, MIN_ORACLE_SIMS};

pub const DESK_REPS: usize = 300;
pub const DESK_REPLICATES: usize = 500;
pub const FULL_REPS: usize = 1000;
pub const FULL_REPLICATES: usize = 1000;
pub const DEFAULT_ORACLE_SIMS: usize = 1_000_000;
pub const DEFAULT_P_GRID: [f64; 5] = [0.10, 0.25, 0.50, 0.75, 0.90];
pub const DEFAULT_RHO_GRID: [f64; 10] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Replication scale applied on top of a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    /// Config values, with `reps = 300` and `M = 500` when absent.
    #[default]
    Desk,
    /// `reps = 1000` and `M = 1000` regardless of the file.
    Full,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" | "paper" => Ok(Profile::Full),
            other => Err(Error::Config(format!("unknown profile `{other}` (expected desk or full)"))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    model: ModelSpec,
    #[serde(rename = "N")]
    population: Option<usize>,
    n: usize,
    f: Option<f64>,
    #[serde(default = "default_design")]
    sampling_design: DesignKind,
    #[serde(default = "default_design")]
    resampling_design: DesignKind,
    #[serde(rename = "M")]
    replicates: Option<usize>,
    reps: Option<usize>,
    p_grid: Option<Vec<f64>>,
    alpha: Option<Vec<f64>>,
    #[serde(default)]
    seed: u64,
    rho_grid: Option<Vec<f64>>,
    oracle_sims: Option<usize>,
}

fn default_design() -> DesignKind {
    DesignKind::Pareto
}

/// A fully resolved scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelSpec,
    pub population: usize,
    pub sample_size: usize,
    pub sampling_design: DesignKind,
    pub resampling_design: DesignKind,
    /// Bootstrap replicates per sample.
    pub replicates: usize,
    /// Simulated populations.
    pub reps: usize,
    pub p_grid: Vec<f64>,
    /// Test levels, or `1 - confidence` for intervals.
    pub alpha: Vec<f64>,
    pub seed: u64,
    pub rho_grid: Vec<f64>,
    pub oracle_sims: usize,
}

impl ScenarioConfig {
    /// A scenario with desk defaults for everything but the essentials.
    pub fn new(name: &str, model: ModelSpec, population: usize, sample_size: usize) -> Self {
        ScenarioConfig {
            name: name.to_string(),
            model,
            population,
            sample_size,
            sampling_design: DesignKind::Pareto,
            resampling_design: DesignKind::Pareto,
            replicates: DESK_REPLICATES,
            reps: DESK_REPS,
            p_grid: DEFAULT_P_GRID.to_vec(),
            alpha: vec![0.05],
            seed: 0,
            rho_grid: DEFAULT_RHO_GRID.to_vec(),
            oracle_sims: DEFAULT_ORACLE_SIMS,
        }
    }

    pub fn sampling_fraction(&self) -> f64 {
        self.sample_size as f64 / self.population as f64
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("scenario `{}`: {msg}", self.name)));
        if self.sample_size == 0 || self.sample_size > self.population {
            return fail(format!("need 0 < n <= N, got n={} N={}", self.sample_size, self.population));
        }
        if self.replicates < 2 {
            return fail(format!("M must be at least 2, got {}", self.replicates));
        }
        if self.reps == 0 {
            return fail("reps must be at least 1".into());
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return fail(format!("p_grid value {p} outside (0, 1)"));
        }
        if self.alpha.is_empty() {
            return fail("alpha list is empty".into());
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return fail(format!("alpha {a} outside (0, 1)"));
        }
        if let Some(r) = self.rho_grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return fail(format!("rho_grid value {r} outside [0, 1]"));
        }
        if self.oracle_sims < MIN_ORACLE_SIMS {
            return fail(format!("oracle_sims must be at least {MIN_ORACLE_SIMS}"));
        }
        if !self.resampling_design.fixed_size() {
            return fail("resampling design must have fixed size".into());
        }
        self.model.validate().map_err(|e| Error::Config(format!("scenario `{}`: {e}", self.name)))
    }

    fn resolve(name: &str, raw: RawScenario, profile: Profile) -> Result<Self> {
        let population = match (raw.population, raw.f) {
            (Some(big_n), Some(f)) => {
                if ((raw.n as f64 / big_n as f64) - f).abs() > 0.005 {
                    return Err(Error::Config(format!(
                        "scenario `{name}`: n/N = {} disagrees with f = {f}",
                        raw.n as f64 / big_n as f64
                    )));
                }
                big_n
            }
            (Some(big_n), None) => big_n,
            (None, Some(f)) if f > 0.0 && f <= 1.0 => (raw.n as f64 / f).round() as usize,
            (None, Some(f)) => return Err(Error::Config(format!("scenario `{name}`: f = {f} outside (0, 1]"))),
            (None, None) => return Err(Error::Config(format!("scenario `{name}`: give N or f"))),
        };
        let (reps, replicates) = match profile {
            Profile::Full => (FULL_REPS, FULL_REPLICATES),
            Profile::Desk => (raw.reps.unwrap_or(DESK_REPS), raw.replicates.unwrap_or(DESK_REPLICATES)),
        };
        let cfg = ScenarioConfig {
            name: name.to_string(),
            model: raw.model,
            population,
            sample_size: raw.n,
            sampling_design: raw.sampling_design,
            resampling_design: raw.resampling_design,
            replicates,
            reps,
            p_grid: raw.p_grid.unwrap_or_else(|| DEFAULT_P_GRID.to_vec()),
            alpha: raw.alpha.unwrap_or_else(|| vec![0.05]),
            seed: raw.seed,
            rho_grid: raw.rho_grid.unwrap_or_else(|| DEFAULT_RHO_GRID.to_vec()),
            oracle_sims: raw.oracle_sims.unwrap_or(DEFAULT_ORACLE_SIMS),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parse every scenario in a config text, in name order.
pub fn parse_config(text: &str, profile: Profile) -> Result<Vec<ScenarioConfig>> {
    let tables: BTreeMap<String, RawScenario> =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    if tables.is_empty() {
        return Err(Error::Config("config defines no scenarios".into()));
    }
    tables.into_iter().map(|(name, raw)| ScenarioConfig::resolve(&name, raw, profile)).collect()
}

/// Read and parse a config file.
pub fn load_config(path: &Path, profile: Profile) -> Result<Vec<ScenarioConfig>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text, profile).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}
