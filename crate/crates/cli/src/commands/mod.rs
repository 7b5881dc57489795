//! Subcommand implementations.

mod ensemble;
mod kepler;
mod nullity;
mod solve;
mod symmetry;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use hamdelay_core::solver::{self, CriticalPoint, SolveConfig};
use hamdelay_core::systems::{build_system, System};
use serde::Serialize;

use crate::config::{self, Overrides};
use crate::output::OutDir;
use crate::{CliError, CliResult, Command, ExitCode, GlobalArgs};

pub use ensemble::{EnsembleRow, EnsembleSummary};

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub report: PathBuf,
    pub files: Vec<PathBuf>,
    pub wall_time: f64,
}

impl Outcome {
    pub fn exit_code(&self) -> ExitCode {
        if self.passed {
            ExitCode::Passed
        } else {
            ExitCode::CheckFailed
        }
    }
}

/// Envelope of `report.json`. Holds no timings so that reruns are
/// byte-identical.
#[derive(Debug, Serialize)]
pub struct RunReport<'a, C, R> {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config: &'a C,
    pub passed: bool,
    pub results: R,
}

#[derive(Debug, Serialize)]
struct Timing {
    command: &'static str,
    wall_time_seconds: f64,
}

/// Results of one command before they are written.
pub(crate) struct Produced<R> {
    pub passed: bool,
    pub seed: Option<u64>,
    pub results: R,
    pub files: Vec<PathBuf>,
}

fn finish<C: Serialize, R: Serialize>(
    command: Command,
    out: &OutDir,
    config: &C,
    produced: Produced<R>,
    start: Instant,
) -> CliResult<Outcome> {
    let report = out.write_json(
        "report.json",
        &RunReport {
            command: command.name(),
            version: env!("CARGO_PKG_VERSION"),
            seed: produced.seed,
            config,
            passed: produced.passed,
            results: produced.results,
        },
    )?;
    let wall_time = start.elapsed().as_secs_f64();
    let timing = out.write_json(
        "timing.json",
        &Timing {
            command: command.name(),
            wall_time_seconds: wall_time,
        },
    )?;
    let mut files = produced.files;
    files.push(timing);
    Ok(Outcome {
        passed: produced.passed,
        report,
        files,
        wall_time,
    })
}

fn load<C>(global: &GlobalArgs) -> CliResult<C>
where
    C: serde::de::DeserializeOwned + Default + Overrides,
{
    let mut c: C = config::load(global.config.as_deref())?;
    c.apply(global);
    Ok(c)
}

/// Run `command` and write its files under `global.out`.
pub fn execute(command: Command, global: &GlobalArgs) -> CliResult<Outcome> {
    let start = Instant::now();
    match command {
        Command::OperatorEnsemble => {
            let c = load(global)?;
            let out = OutDir::create(&global.out)?;
            let p = ensemble::run(&c, &out, global.jobs)?;
            finish(command, &out, &c, p, start)
        }
        Command::Solve => {
            let c = load(global)?;
            let out = OutDir::create(&global.out)?;
            let p = solve::run(&c, &out)?;
            finish(command, &out, &c, p, start)
        }
        Command::Nullity => {
            let c = load(global)?;
            let out = OutDir::create(&global.out)?;
            let p = nullity::run(&c)?;
            finish(command, &out, &c, p, start)
        }
        Command::Kepler => {
            let c = load(global)?;
            let out = OutDir::create(&global.out)?;
            let p = kepler::run(&c, &out)?;
            finish(command, &out, &c, p, start)
        }
        Command::Symmetry => {
            let c = load(global)?;
            let out = OutDir::create(&global.out)?;
            let p = symmetry::run(&c)?;
            finish(command, &out, &c, p, start)
        }
    }
}

#[derive(Debug, Serialize)]
struct ErrorReport<'a> {
    command: &'static str,
    exit_code: i32,
    error: String,
    mean_history: &'a [Vec<f64>],
}

/// Best-effort `error.json` next to where the report would have gone.
pub fn write_error(command: Command, global: &GlobalArgs, err: &CliError) {
    let mean_history: &[Vec<f64>] = match err {
        CliError::Core(hamdelay_core::Error::SolverFailure { mean_history, .. }) => mean_history,
        _ => &[],
    };
    let report = ErrorReport {
        command: command.name(),
        exit_code: err.exit_code() as i32,
        error: err.to_string(),
        mean_history,
    };
    let written = OutDir::create(&global.out).and_then(|out| out.write_json("error.json", &report));
    if let Err(e) = written {
        log::warn!("could not write error.json: {e}");
    }
}

/// A registered system solved with its registry seed, unless the config
/// supplies one.
pub(crate) struct Solved {
    pub system: System,
    pub critical_point: CriticalPoint,
    pub bov: Option<BovSummary>,
    pub substeps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BovSummary {
    pub k: u32,
    pub radius: f64,
    pub first_order_residual: f64,
    pub second_order_residual: f64,
}

pub(crate) fn solve_registered(
    name: &str,
    params: &BTreeMap<String, f64>,
    config: &SolveConfig,
) -> CliResult<Solved> {
    let system = build_system(name, params)?;
    if !system.solvable {
        return Err(CliError::Config(format!(
            "system {name:?} is evaluation-only and cannot be solved"
        )));
    }
    let substeps = config.substeps.max(system.substeps);
    if name == "example4-bov" {
        let k = system.params["k"] as u32;
        let sol = solver::bov_solve(k, config)?;
        let bov = BovSummary {
            k,
            radius: sol.radius,
            first_order_residual: sol.first_order_residual,
            second_order_residual: sol.second_order_residual,
        };
        return Ok(Solved {
            system,
            critical_point: sol.critical_point,
            bov: Some(bov),
            substeps,
        });
    }
    let mut cfg = config.clone();
    cfg.substeps = substeps;
    cfg.mu0
        .get_or_insert_with(|| system.mu0.as_slice().to_vec());
    cfg.guess
        .get_or_insert_with(|| system.guess.as_slice().to_vec());
    log::info!("solving {name} on {} nodes", cfg.grid);
    let critical_point = solver::self_consistent_solve(&system.pair, &cfg)?;
    Ok(Solved {
        system,
        critical_point,
        bov: None,
        substeps,
    })
}
