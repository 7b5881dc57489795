use std::collections::BTreeMap;

use hamdelay_core::solver::ActionProbe;
use serde::Serialize;

use super::{solve_registered, BovSummary, Produced, Solved};
use crate::config::SolveCommandConfig;
use crate::output::OutDir;
use crate::CliResult;

pub const LOOP_CSV: &str = "loop.csv";

#[derive(Debug, Clone, Serialize)]
pub struct SolveResults {
    pub system: String,
    /// Registry parameters, defaults included.
    pub params: BTreeMap<String, f64>,
    pub grid: usize,
    pub substeps: usize,
    pub mean: Vec<f64>,
    pub mean_in_domain: bool,
    pub residual_norm: f64,
    pub action: f64,
    /// BOV: `√(∫|z|²)`; otherwise the mean Euclidean norm of the samples.
    pub radius: f64,
    pub iterations: usize,
    pub mean_history: Vec<Vec<f64>>,
    pub bov: Option<BovSummary>,
    pub gradient_probe: ActionProbe,
    pub gradient_ok: bool,
    pub critical_ok: bool,
    pub loop_csv: String,
}

pub(crate) fn summarize(c: &SolveCommandConfig, s: &Solved) -> CliResult<SolveResults> {
    let cp = &s.critical_point;
    let all: Vec<usize> = (0..cp.loop_.dim()).collect();
    let radius = s
        .bov
        .as_ref()
        .map_or_else(|| cp.mean_radius(&all), |b| b.radius);
    let gradient_probe = cp.action_gradient_probe(c.gradient_directions, c.seed)?;
    Ok(SolveResults {
        system: c.system.clone(),
        params: s.system.params.clone(),
        grid: cp.loop_.grid().len(),
        substeps: s.substeps,
        mean: cp.mean.value.as_slice().to_vec(),
        mean_in_domain: cp.mean.in_domain,
        residual_norm: cp.residual_norm,
        action: cp.action()?,
        radius,
        iterations: cp.iterations,
        mean_history: cp.mean_history.clone(),
        bov: s.bov.clone(),
        gradient_ok: gradient_probe.max_abs <= c.gradient_tol,
        gradient_probe,
        critical_ok: cp.residual_norm <= c.solver.critical_tol,
        loop_csv: LOOP_CSV.into(),
    })
}

pub(crate) fn run(c: &SolveCommandConfig, out: &OutDir) -> CliResult<Produced<SolveResults>> {
    let solved = solve_registered(&c.system, &c.params, &c.solver)?;
    let csv = out.write_loop(LOOP_CSV, &solved.critical_point.loop_)?;
    let results = summarize(c, &solved)?;
    Ok(Produced {
        passed: results.critical_ok && results.gradient_ok && results.mean_in_domain,
        seed: Some(c.seed),
        results,
        files: vec![csv],
    })
}
