//! Fixtures shared by the benchmarks.

use std::collections::BTreeMap;

use hamdelay_core::solver::{self_consistent_solve, CriticalPoint, SolveConfig};
use hamdelay_core::systems::{build_system, System};
use hamdelay_core::Result;

/// Registry system with its seed copied into a solver config on `grid` nodes.
pub fn seeded(name: &str, grid: usize) -> Result<(System, SolveConfig)> {
    let system = build_system(name, &BTreeMap::new())?;
    let config = SolveConfig {
        grid,
        substeps: system.substeps,
        mu0: Some(system.mu0.as_slice().to_vec()),
        guess: Some(system.guess.as_slice().to_vec()),
        ..SolveConfig::default()
    };
    Ok((system, config))
}

pub fn solved(name: &str, grid: usize) -> Result<CriticalPoint> {
    let (system, config) = seeded(name, grid)?;
    self_consistent_solve(&system.pair, &config)
}
