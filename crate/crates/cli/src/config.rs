//! Strict JSON configs. Every field has a default, unknown keys are
//! rejected, and the resolved config is echoed into the report.

use std::collections::BTreeMap;
use std::path::Path;

use hamdelay_core::hessian::NullityOptions;
use hamdelay_core::solver::SolveConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult, GlobalArgs};

pub const DEFAULT_SEED: u64 = 20_240_607;

/// Loads `T` from `path`, or its default when no path is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Command-line overrides for seeds and grids.
pub trait Overrides {
    fn apply(&mut self, global: &GlobalArgs);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub trials: usize,
    /// Degrees of freedom drawn uniformly from this list.
    pub n_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub grid: usize,
    pub seed: u64,
    /// Constant isotropic `Y_j`, checked against the closed-form kernel.
    pub commuting: bool,
    /// Random field pairs per instance in the symmetry defect.
    pub symmetry_trials: usize,
    pub atol: Option<f64>,
    pub rtol: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            trials: 500,
            n_values: vec![1, 2, 3],
            m_values: vec![0, 1, 2, 3, 4],
            grid: 256,
            seed: DEFAULT_SEED,
            commuting: false,
            symmetry_trials: 2,
            atol: None,
            rtol: hamdelay_core::nullity::DEFAULT_RTOL,
        }
    }
}

impl Overrides for EnsembleConfig {
    fn apply(&mut self, global: &GlobalArgs) {
        self.seed = global.seed.unwrap_or(self.seed);
        self.grid = global.grid.unwrap_or(self.grid);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveCommandConfig {
    pub system: String,
    pub params: BTreeMap<String, f64>,
    pub solver: SolveConfig,
    /// Seeds the random directions of the gradient probe.
    pub seed: u64,
    pub gradient_directions: usize,
    pub gradient_tol: f64,
}

impl Default for SolveCommandConfig {
    fn default() -> Self {
        Self {
            system: "example2-harmonic".into(),
            params: BTreeMap::new(),
            solver: SolveConfig::default(),
            seed: DEFAULT_SEED,
            gradient_directions: 20,
            gradient_tol: 1e-5,
        }
    }
}

impl Overrides for SolveCommandConfig {
    fn apply(&mut self, global: &GlobalArgs) {
        self.seed = global.seed.unwrap_or(self.seed);
        self.solver.grid = global.grid.unwrap_or(self.solver.grid);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NullityCommandConfig {
    pub system: String,
    pub params: BTreeMap<String, f64>,
    pub solver: SolveConfig,
    pub nullity: NullityOptions,
    /// Read the critical point from a loop CSV instead of solving.
    pub loop_csv: Option<String>,
}

impl Default for NullityCommandConfig {
    fn default() -> Self {
        Self {
            system: "example2-harmonic".into(),
            params: BTreeMap::new(),
            solver: SolveConfig::default(),
            nullity: NullityOptions::default(),
            loop_csv: None,
        }
    }
}

impl Overrides for NullityCommandConfig {
    fn apply(&mut self, global: &GlobalArgs) {
        self.solver.grid = global.grid.unwrap_or(self.solver.grid);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KeplerConfig {
    pub k: u32,
    pub mu: f64,
    pub solver: SolveConfig,
    pub kepler_tol: f64,
    pub round_trip_tol: f64,
    /// On the spread of `½|ẋ|² − mu/|x|` along the orbit.
    pub energy_tol: f64,
    /// Repeat the pipeline at `2N` and compare.
    pub refine: bool,
    /// On the change of the radius and of the Kepler residual under doubling.
    pub refine_tol: f64,
}

impl Default for KeplerConfig {
    fn default() -> Self {
        Self {
            k: 1,
            mu: 1.0,
            solver: SolveConfig {
                grid: 512,
                ..SolveConfig::default()
            },
            kepler_tol: 1e-5,
            round_trip_tol: 1e-8,
            energy_tol: 1e-5,
            refine: true,
            refine_tol: 1e-6,
        }
    }
}

impl Overrides for KeplerConfig {
    fn apply(&mut self, global: &GlobalArgs) {
        self.solver.grid = global.grid.unwrap_or(self.solver.grid);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SymmetryConfig {
    pub system: String,
    /// Winding parameters are multiplied by `|n|` before solving.
    pub params: BTreeMap<String, f64>,
    pub n: i64,
    pub r: f64,
    pub solver: SolveConfig,
    pub tolerance: f64,
}

impl Default for SymmetryConfig {
    fn default() -> Self {
        Self {
            system: "example2-harmonic".into(),
            params: BTreeMap::new(),
            n: 2,
            r: 0.3,
            solver: SolveConfig::default(),
            tolerance: hamdelay_core::symmetry::PROPOSITION_TOL,
        }
    }
}

impl Overrides for SymmetryConfig {
    fn apply(&mut self, global: &GlobalArgs) {
        self.solver.grid = global.grid.unwrap_or(self.solver.grid);
    }
}
