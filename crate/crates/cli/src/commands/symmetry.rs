use std::collections::BTreeMap;

use hamdelay_core::solver::{self_consistent_solve, CriticalPoint};
use hamdelay_core::symmetry::{
    proposition_check_with, pullback_pair, MonoidElement, PropositionReport,
};
use hamdelay_core::systems::build_system;
use serde::Serialize;

use super::Produced;
use crate::config::SymmetryConfig;
use crate::CliResult;

/// Registry parameters that count windings.
const WINDING_KEYS: [&str; 3] = ["k", "k1", "k2"];

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryResults {
    pub n: i64,
    /// Normalized to `[0, 1)`.
    pub r: f64,
    /// Parameters of the seed for the pulled-back problem.
    pub seed_params: BTreeMap<String, f64>,
    pub pulled_back_mean: Option<Vec<f64>>,
    pub pulled_back_residual: Option<f64>,
    pub proposition: Option<PropositionReport>,
    /// Orientation-reversing elements are reported without a verdict.
    pub report_only: bool,
    pub solve_error: Option<String>,
}

/// The config parameters with every winding multiplied by `|n|`. Derived
/// registry defaults (such as the starting mean) are then recomputed from
/// the scaled windings.
fn scaled_params(c: &SymmetryConfig) -> CliResult<BTreeMap<String, f64>> {
    let defaults = build_system(&c.system, &c.params)?.params;
    let scale = c.n.unsigned_abs() as f64;
    let mut params = c.params.clone();
    for key in WINDING_KEYS {
        if let Some(v) = defaults.get(key) {
            params.insert(key.to_string(), v * scale);
        }
    }
    Ok(params)
}

pub(crate) fn run(c: &SymmetryConfig) -> CliResult<Produced<SymmetryResults>> {
    let g = MonoidElement::new(c.n, c.r)?;
    let seed_params = scaled_params(c)?;
    let system = build_system(&c.system, &seed_params)?;
    let pulled = pullback_pair(g, &system.pair)?;
    let mut solver = c.solver.clone();
    solver.substeps = solver.substeps.max(system.substeps);
    solver
        .mu0
        .get_or_insert_with(|| system.mu0.as_slice().to_vec());
    solver
        .guess
        .get_or_insert_with(|| system.guess.as_slice().to_vec());
    let report_only = c.n < 0;
    let solved: CliResult<CriticalPoint> =
        self_consistent_solve(&pulled, &solver).map_err(Into::into);
    let (cp, solve_error) = match solved {
        Ok(cp) => (Some(cp), None),
        Err(e) if report_only => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let proposition = cp
        .as_ref()
        .map(|cp| proposition_check_with(&system.pair, g, &cp.loop_, c.tolerance))
        .transpose()?;
    let passed = report_only
        || proposition.is_some_and(|p| p.agreement && p.pullback_critical && p.iterate_critical);
    Ok(Produced {
        passed,
        seed: None,
        results: SymmetryResults {
            n: g.n(),
            r: g.r(),
            seed_params,
            pulled_back_mean: cp.as_ref().map(|cp| cp.mean.value.as_slice().to_vec()),
            pulled_back_residual: cp.as_ref().map(|cp| cp.residual_norm),
            proposition,
            report_only,
            solve_error,
        },
        files: vec![],
    })
}
