//! The Hessian of the action at a numerical critical point, built twice:
//! directly on periodic fields, and through the flow reduction to a
//! twisted-loop operator. The kernel dimensions are compared as integers
//! and checked against `dim M + m` (and `dim M` for commuting pairs).
//!
//! Direct route, `c = df(H̄(u))`, `a = d²f(H̄(u))`:
//!
//! ```text
//! Lη = η̇ − DX_{c·H}(u)η − Σ a_ij δ_i(η) J∇H_j(u),   δ_i(η) = ∫⟨∇H_i(u), η⟩
//! ```
//!
//! Reduced route: with `Ψ(t) = dφᵗ(u(0))` and `ξ = Ψ⁻¹η`, `JΨ⁻¹Lη = Dξ`
//! where `D` has twist `Φ = Ψ(1)⁻¹` and `Y_i = JΨ⁻¹J∇H_i(u)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::variational_flow;
use crate::grid::{FieldAlongLoop, Loop, TimeGrid};
use crate::nullity::{self, NullityOutcome, RefinedNullity};
use crate::operator::OperatorSpec;
use crate::pair::PairSpec;
use crate::solver::CriticalPoint;
use crate::spectral::differentiation_matrix;
use crate::symplectic::{symplectic_inverse, symplecticity_defect};

/// Critical residual above which the Hessian is refused.
pub const CRITICAL_TOL: f64 = 1e-8;
/// RK4 steps per grid interval for the reduction. Even, so that the
/// midpoints fall on step boundaries.
pub const REDUCTION_SUBSTEPS: usize = 16;

fn check_critical(cp: &CriticalPoint) -> Result<()> {
    let r = cp.pair.critical_residual(&cp.loop_)?.sup_norm();
    if !(r <= CRITICAL_TOL) {
        return Err(Error::Precondition(format!(
            "loop is not critical: residual {r:.3e} > {CRITICAL_TOL:.1e}"
        )));
    }
    if !cp.mean.in_domain {
        return Err(Error::Precondition("mean value is outside W".into()));
    }
    Ok(())
}

/// `(df, d²f)` at the mean of `u`.
fn coefficients(pair: &PairSpec, u: &Loop) -> (DVector<f64>, DMatrix<f64>) {
    let mean = pair.mean_value(u).value;
    let f = pair.mean_function();
    (f.gradient(&mean), f.hessian(&mean))
}

/// `L` on the nodes of `u`'s grid, node-major (`k·2n + i`).
fn direct_matrix(pair: &PairSpec, u: &Loop) -> DMatrix<f64> {
    let grid = u.grid();
    let n = grid.len();
    let d = pair.phase().dim();
    let (c, a) = coefficients(pair, u);
    let jmat = pair.phase().j_matrix();
    let h = pair.hamiltonian();
    let dmat = differentiation_matrix(n);
    let mut l = DMatrix::zeros(d * n, d * n);
    for k in 0..n {
        for j in 0..n {
            let v = dmat[k][j];
            if v != 0.0 {
                for i in 0..d {
                    l[(k * d + i, j * d + i)] = v;
                }
            }
        }
    }
    // gradients as rows: g[k] is m×d
    let grads: Vec<DMatrix<f64>> = u.samples().iter().map(|x| h.gradient(x)).collect();
    let w = grid.step();
    for (k, x) in u.samples().iter().enumerate() {
        let dx = pair.field_jacobian(&c, x);
        l.view_mut((k * d, k * d), (d, d)).sub_assign_from(&dx);
        // Σ_ij a_ij J∇H_j(u_k) ⊗ ∇H_i(u_l)ᵀ·w
        let jg = &jmat * grads[k].transpose();
        let left = &jg * &a; // column i: Σ_j a_ij J∇H_j
        for (l_idx, gl) in grads.iter().enumerate() {
            let block = &left * gl * w;
            l.view_mut((k * d, l_idx * d), (d, d))
                .sub_assign_from(&block);
        }
    }
    l
}

trait SubAssignFrom {
    fn sub_assign_from(&mut self, other: &DMatrix<f64>);
}

impl SubAssignFrom for nalgebra::DMatrixViewMut<'_, f64> {
    fn sub_assign_from(&mut self, other: &DMatrix<f64>) {
        for j in 0..other.ncols() {
            for i in 0..other.nrows() {
                self[(i, j)] -= other[(i, j)];
            }
        }
    }
}

/// The linearized critical equation on periodic fields, discretized with
/// the spectral differentiation matrix.
pub fn direct_hessian(cp: &CriticalPoint) -> Result<DMatrix<f64>> {
    check_critical(cp)?;
    Ok(direct_matrix(&cp.pair, &cp.loop_))
}

/// Flow data along the orbit of `u(0)` on a grid.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub spec: OperatorSpec,
    /// `Ψ(t_k)` at the nodes.
    pub psi: Vec<DMatrix<f64>>,
    /// `Ψ(1)`.
    pub monodromy: DMatrix<f64>,
}

impl Reduction {
    /// `ξ_k = Ψ(t_k)⁻¹η_k`.
    pub fn untwist(&self, eta: &FieldAlongLoop) -> Result<FieldAlongLoop> {
        let samples = eta
            .samples()
            .iter()
            .zip(&self.psi)
            .map(|(e, p)| symplectic_inverse(p) * e)
            .collect();
        FieldAlongLoop::new(eta.grid(), samples)
    }
}

fn reduction_on(pair: &PairSpec, u: &Loop, grid: TimeGrid) -> Result<Reduction> {
    let n = grid.len();
    let half = REDUCTION_SUBSTEPS / 2;
    let (c, a) = coefficients(pair, u);
    let jmat = pair.phase().j_matrix();
    let h = pair.hamiltonian();
    let flow = variational_flow(
        |x| pair.vector_field(&c, x),
        |x| pair.field_jacobian(&c, x),
        &u.samples()[0],
        1.0,
        n * REDUCTION_SUBSTEPS,
    )?;
    let monodromy = flow.psi.last().expect("nonempty").clone();
    let defect = symplecticity_defect(&monodromy);
    if !(defect <= 1e-6 * monodromy.norm_squared().max(1.0)) {
        return Err(Error::Numerical(format!(
            "monodromy is not symplectic (defect {defect:.3e})"
        )));
    }
    let phi = symplectic_inverse(&monodromy);
    let m = pair.m();
    let mut ys = vec![Vec::with_capacity(n); m];
    for k in 0..n {
        let idx = (2 * k + 1) * half;
        let x = &flow.states[idx];
        let psi_inv = symplectic_inverse(&flow.psi[idx]);
        let y = &jmat * psi_inv * &jmat * h.gradient(x).transpose();
        for (i, yi) in ys.iter_mut().enumerate() {
            yi.push(y.column(i).into_owned());
        }
    }
    let psi = (0..n)
        .map(|k| flow.psi[k * REDUCTION_SUBSTEPS].clone())
        .collect();
    // d²f is symmetric analytically; remove roundoff asymmetry
    let a = (&a + a.transpose()) * 0.5;
    let spec = OperatorSpec::new(pair.phase(), phi, ys, a, grid)?;
    Ok(Reduction {
        spec,
        psi,
        monodromy,
    })
}

/// Flow reduction at the critical point's grid.
pub fn reduction(cp: &CriticalPoint) -> Result<Reduction> {
    check_critical(cp)?;
    reduction_on(&cp.pair, &cp.loop_, cp.loop_.grid())
}

pub fn reduce_to_operator(cp: &CriticalPoint) -> Result<OperatorSpec> {
    Ok(reduction(cp)?.spec)
}

/// `dim ker(Ψ(1) − I)`, the classical count for a linear `f`.
pub fn classical_nullity(cp: &CriticalPoint) -> Result<usize> {
    let r = reduction(cp)?;
    let d = r.monodromy.nrows();
    let m = &r.monodromy - DMatrix::identity(d, d);
    Ok(nullity::numerical_nullity(&m, 1e-8, nullity::DEFAULT_RTOL)?.nullity)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NullityOptions {
    /// Defaults to `1e−8·√N`.
    pub atol: Option<f64>,
    pub rtol: f64,
    /// Compare against the same route at `2N` when the spectrum at `N`
    /// has no clear gap.
    pub refine: bool,
}

impl Default for NullityOptions {
    fn default() -> Self {
        Self {
            atol: None,
            rtol: nullity::DEFAULT_RTOL,
            refine: true,
        }
    }
}

/// Spectrum of one route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSpectrum {
    pub nullity: usize,
    /// Count from the plain threshold at `N`.
    pub plain_nullity: usize,
    pub tolerance_used: f64,
    /// Descending, at `N`.
    pub singular_values: Vec<f64>,
    /// Present when the grid-doubling comparison ran.
    pub refinement: Option<RefinedNullity>,
}

impl RouteSpectrum {
    fn build(coarse: NullityOutcome, fine: Option<NullityOutcome>, rtol: f64) -> Self {
        let refinement = fine.map(|f| nullity::refined_nullity(&coarse, &f, rtol));
        Self {
            nullity: refinement.as_ref().map_or(coarse.nullity, |r| r.nullity),
            plain_nullity: coarse.nullity,
            tolerance_used: coarse.tolerance_used,
            singular_values: coarse.singular_values,
            refinement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullityReport {
    pub system: String,
    pub grid: usize,
    pub nullity_direct: usize,
    pub nullity_reduced: usize,
    /// `dim M + m`.
    pub bound_a: usize,
    /// `dim M`, present iff the pair is commuting.
    pub bound_b: Option<usize>,
    pub commuting: bool,
    pub max_bracket: f64,
    pub direct: RouteSpectrum,
    pub reduced: RouteSpectrum,
}

impl NullityReport {
    pub fn routes_agree(&self) -> bool {
        self.nullity_direct == self.nullity_reduced
    }

    pub fn bound_a_holds(&self) -> bool {
        self.nullity_direct <= self.bound_a && self.nullity_reduced <= self.bound_a
    }

    pub fn bound_b_holds(&self) -> bool {
        self.bound_b
            .is_none_or(|b| self.nullity_direct <= b && self.nullity_reduced <= b)
    }

    pub fn passed(&self) -> bool {
        self.routes_agree() && self.bound_a_holds() && self.bound_b_holds()
    }
}

fn outcome(matrix: &DMatrix<f64>, grid: usize, options: &NullityOptions) -> Result<NullityOutcome> {
    let atol = options.atol.unwrap_or_else(|| nullity::default_atol(grid));
    nullity::numerical_nullity(matrix, atol, options.rtol)
}

/// Some singular value sits between the plain threshold and the candidate
/// band, so the count at `N` alone is not trusted.
fn ambiguous(o: &NullityOutcome) -> bool {
    o.singular_values
        .iter()
        .any(|&s| s >= o.tolerance_used && s <= nullity::CANDIDATE_RTOL * o.sigma_max())
}

pub fn nullity_report(cp: &CriticalPoint) -> Result<NullityReport> {
    nullity_report_with(cp, &NullityOptions::default())
}

pub fn nullity_report_with(cp: &CriticalPoint, options: &NullityOptions) -> Result<NullityReport> {
    check_critical(cp)?;
    let pair = &cp.pair;
    let grid = cp.loop_.grid();
    let n = grid.len();
    let direct_coarse = outcome(&direct_matrix(pair, &cp.loop_), n, options)?;
    let reduced_coarse = outcome(
        &reduction_on(pair, &cp.loop_, grid)?.spec.assemble_matrix(),
        n,
        options,
    )?;
    let fine = grid.doubled();
    let u2 = cp.loop_.resample(fine)?;
    let direct_fine = if options.refine && ambiguous(&direct_coarse) {
        Some(outcome(&direct_matrix(pair, &u2), fine.len(), options)?)
    } else {
        None
    };
    let reduced_fine = if options.refine && ambiguous(&reduced_coarse) {
        Some(outcome(
            &reduction_on(pair, &u2, fine)?.spec.assemble_matrix(),
            fine.len(),
            options,
        )?)
    } else {
        None
    };
    let direct = RouteSpectrum::build(direct_coarse, direct_fine, options.rtol);
    let reduced = RouteSpectrum::build(reduced_coarse, reduced_fine, options.rtol);
    let bracket = pair.is_commuting(crate::pair::COMMUTING_SAMPLES, crate::pair::COMMUTING_SEED);
    let commuting = pair.commuting_by_construction() || bracket.commuting;
    let dim = pair.phase().dim();
    Ok(NullityReport {
        system: pair.name().to_string(),
        grid: n,
        nullity_direct: direct.nullity,
        nullity_reduced: reduced.nullity,
        bound_a: dim + pair.m(),
        bound_b: commuting.then_some(dim),
        commuting,
        max_bracket: bracket.max_bracket,
        direct,
        reduced,
    })
}

/// Kernel fields of the direct Hessian carried to the reduced operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeOfVariables {
    pub fields: usize,
    /// `max |ξ(1) − Φξ(0)|` with `ξ(1) = Ψ(1)⁻¹η(0)`.
    pub twist_defect: f64,
    /// `max ‖Dξ‖∞` over the unit-sup-norm kernel fields.
    pub apply_norm: f64,
}

pub fn change_of_variables(cp: &CriticalPoint, count: usize) -> Result<ChangeOfVariables> {
    let l = direct_hessian(cp)?;
    let red = reduction(cp)?;
    let grid = cp.loop_.grid();
    let d = cp.pair.phase().dim();
    let mut twist_defect: f64 = 0.0;
    let mut apply_norm: f64 = 0.0;
    for v in nullity::null_space(&l, count)? {
        let eta = FieldAlongLoop::from_flat(grid, d, &v)?;
        let eta = FieldAlongLoop::new(
            grid,
            eta.samples().iter().map(|x| x / eta.sup_norm()).collect(),
        )?;
        let xi = red.untwist(&eta)?;
        // η is periodic, so ξ(1) = Ψ(1)⁻¹η(0)
        let end = symplectic_inverse(&red.monodromy) * &eta.samples()[0];
        twist_defect = twist_defect.max((end - red.spec.phi() * &xi.samples()[0]).amax());
        apply_norm = apply_norm.max(red.spec.apply(&xi)?.sup_norm());
    }
    Ok(ChangeOfVariables {
        fields: count,
        twist_defect,
        apply_norm,
    })
}
