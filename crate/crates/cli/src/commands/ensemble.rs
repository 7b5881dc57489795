use hamdelay_core::nullity::{self, NullityOutcome};
use hamdelay_core::operator::{random_instance, COMMUTING_ASSUMPTION_TOL};
use hamdelay_core::TimeGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::Produced;
use crate::config::EnsembleConfig;
use crate::output::{fmt_f64, OutDir};
use crate::{CliError, CliResult};

pub const CSV_NAME: &str = "ensemble.csv";

const HEADER: [&str; 12] = [
    "index",
    "seed",
    "n",
    "m",
    "nullity",
    "bound",
    "bound_ok",
    "symmetry_defect",
    "sigma_min",
    "sigma_max",
    "closed_form_nullity",
    "closed_form_match",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleRow {
    pub index: usize,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub nullity: usize,
    /// `2n + m`, or `2n` for commuting instances.
    pub bound: usize,
    pub symmetry_defect: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub closed_form_nullity: Option<usize>,
}

impl EnsembleRow {
    pub fn bound_ok(&self) -> bool {
        self.nullity <= self.bound
    }

    pub fn closed_form_match(&self) -> Option<bool> {
        self.closed_form_nullity.map(|c| c == self.nullity)
    }

    fn record(&self) -> Vec<String> {
        let opt = |v: Option<String>| v.unwrap_or_default();
        vec![
            self.index.to_string(),
            self.seed.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.nullity.to_string(),
            self.bound.to_string(),
            self.bound_ok().to_string(),
            fmt_f64(self.symmetry_defect),
            fmt_f64(self.sigma_min),
            fmt_f64(self.sigma_max),
            opt(self.closed_form_nullity.map(|c| c.to_string())),
            opt(self.closed_form_match().map(|b| b.to_string())),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub instances: usize,
    pub commuting: bool,
    pub max_nullity: usize,
    pub violations: usize,
    /// Commuting instances whose SVD count differs from the closed form.
    pub mismatches: usize,
    pub max_symmetry_defect: f64,
    pub csv: String,
}

struct Draw {
    index: usize,
    seed: u64,
    n: usize,
    m: usize,
}

/// Instance parameters are drawn sequentially from the master seed, so
/// the rows do not depend on scheduling.
fn draws(c: &EnsembleConfig) -> CliResult<Vec<Draw>> {
    if c.trials > 0 && (c.n_values.is_empty() || c.m_values.is_empty()) {
        return Err(CliError::Config(
            "n_values and m_values must be non-empty".into(),
        ));
    }
    if c.n_values.contains(&0) {
        return Err(CliError::Config("n_values must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    Ok((0..c.trials)
        .map(|index| Draw {
            index,
            n: c.n_values[rng.gen_range(0..c.n_values.len())],
            m: c.m_values[rng.gen_range(0..c.m_values.len())],
            seed: rng.gen(),
        })
        .collect())
}

fn instance(c: &EnsembleConfig, grid: TimeGrid, d: &Draw) -> CliResult<EnsembleRow> {
    let spec = random_instance(d.n, d.m, grid, d.seed, c.commuting)?;
    let atol = c.atol.unwrap_or_else(|| nullity::default_atol(grid.len()));
    let outcome: NullityOutcome =
        nullity::numerical_nullity(&spec.assemble_matrix(), atol, c.rtol)?;
    let symmetry_defect = spec.symmetry_defect(c.symmetry_trials, d.seed);
    let (bound, closed_form_nullity) = if c.commuting {
        let kernel = spec.commuting_kernel(COMMUTING_ASSUMPTION_TOL)?;
        (2 * d.n, Some(kernel.dimension))
    } else {
        (spec.bound(), None)
    };
    log::debug!(
        "instance {} (n={}, m={}): nullity {}",
        d.index,
        d.n,
        d.m,
        outcome.nullity
    );
    Ok(EnsembleRow {
        index: d.index,
        seed: d.seed,
        n: d.n,
        m: d.m,
        nullity: outcome.nullity,
        bound,
        symmetry_defect,
        sigma_min: outcome.sigma_min(),
        sigma_max: outcome.sigma_max(),
        closed_form_nullity,
    })
}

/// All rows in index order.
pub fn rows(c: &EnsembleConfig, jobs: usize) -> CliResult<Vec<EnsembleRow>> {
    let grid = TimeGrid::new(c.grid)?;
    let draws = draws(c)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    log::info!(
        "{} instances on {} workers",
        draws.len(),
        pool.current_num_threads()
    );
    pool.install(|| draws.par_iter().map(|d| instance(c, grid, d)).collect())
}

pub fn summarize(c: &EnsembleConfig, rows: &[EnsembleRow]) -> EnsembleSummary {
    EnsembleSummary {
        instances: rows.len(),
        commuting: c.commuting,
        max_nullity: rows.iter().map(|r| r.nullity).max().unwrap_or(0),
        violations: rows.iter().filter(|r| !r.bound_ok()).count(),
        mismatches: rows
            .iter()
            .filter(|r| r.closed_form_match() == Some(false))
            .count(),
        max_symmetry_defect: rows.iter().map(|r| r.symmetry_defect).fold(0.0, f64::max),
        csv: CSV_NAME.into(),
    }
}

pub(crate) fn run(
    c: &EnsembleConfig,
    out: &OutDir,
    jobs: usize,
) -> CliResult<Produced<EnsembleSummary>> {
    let rows = rows(c, jobs)?;
    let header: Vec<String> = HEADER.iter().map(|s| s.to_string()).collect();
    let records: Vec<Vec<String>> = rows.iter().map(EnsembleRow::record).collect();
    let csv = out.write_csv(CSV_NAME, &header, &records)?;
    let summary = summarize(c, &rows);
    Ok(Produced {
        passed: summary.violations == 0 && summary.mismatches == 0,
        seed: Some(c.seed),
        results: summary,
        files: vec![csv],
    })
}
