use std::path::Path;

use hamdelay_core::hessian::{self, ChangeOfVariables, NullityReport};
use hamdelay_core::solver::CriticalPoint;
use hamdelay_core::systems::build_system;
use serde::Serialize;

use super::{solve_registered, Produced};
use crate::config::NullityCommandConfig;
use crate::output::read_loop;
use crate::CliResult;

#[derive(Debug, Clone, Serialize)]
pub struct NullityResults {
    /// `"solve"` or the loop CSV path.
    pub source: String,
    pub mean: Vec<f64>,
    pub residual_norm: f64,
    pub report: NullityReport,
    pub routes_agree: bool,
    pub bound_a_holds: bool,
    pub bound_b_holds: bool,
    /// `dim ker(Ψ(1) − I)` of the linearized flow.
    pub classical_nullity: usize,
    /// Kernel fields of the direct route carried through the reduction.
    pub change_of_variables: Option<ChangeOfVariables>,
}

fn critical_point(c: &NullityCommandConfig) -> CliResult<(String, CriticalPoint)> {
    match &c.loop_csv {
        Some(path) => {
            let system = build_system(&c.system, &c.params)?;
            let u = read_loop(Path::new(path))?;
            let cp = CriticalPoint::from_loop(&system.pair, u, c.solver.critical_tol)?;
            Ok((path.clone(), cp))
        }
        None => {
            let solved = solve_registered(&c.system, &c.params, &c.solver)?;
            Ok(("solve".into(), solved.critical_point))
        }
    }
}

pub(crate) fn run(c: &NullityCommandConfig) -> CliResult<Produced<NullityResults>> {
    let (source, cp) = critical_point(c)?;
    let report = hessian::nullity_report_with(&cp, &c.nullity)?;
    let change_of_variables = match report.nullity_direct {
        0 => None,
        k => Some(hessian::change_of_variables(&cp, k)?),
    };
    let results = NullityResults {
        source,
        mean: cp.mean.value.as_slice().to_vec(),
        residual_norm: cp.residual_norm,
        routes_agree: report.routes_agree(),
        bound_a_holds: report.bound_a_holds(),
        bound_b_holds: report.bound_b_holds(),
        classical_nullity: hessian::classical_nullity(&cp)?,
        change_of_variables,
        report,
    };
    Ok(Produced {
        passed: results.report.passed(),
        seed: None,
        results,
        files: vec![],
    })
}
