//! Twisted-loop operators `Dξ = J∂_tξ + Σ a_ij(∫⟨Y_i, ξ⟩)Y_j` acting on
//! paths with `ξ(1) = Φξ(0)`.
//!
//! Discretization: unknowns are the node values `ξ_k = ξ(k/N)`, `k < N`,
//! and the twist is the wrap rule `ξ_N := Φξ_0`. Equations live at the
//! cell midpoints `m_k = (k + ½)/N` (box scheme):
//!
//! ```text
//! (Dξ)_k = J(ξ_{k+1} − ξ_k)/h + Σ a_ij c_i(ξ) Y_j(m_k),
//! c_i(ξ) = h Σ_k ⟨Y_i(m_k), (ξ_k + ξ_{k+1})/2⟩.
//! ```
//!
//! The `Y_j` are stored at the midpoints. Unlike centred differences on the
//! nodes, this stencil has no spurious odd-even kernel, so discrete
//! nullities are bounded exactly as in the continuum.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldAlongLoop, TimeGrid};
use crate::nullity::{self, NullityOutcome};
use crate::symplectic::{
    apply_j, omega_unchecked, symplectic_inverse, symplecticity_defect, PhaseSpace,
};

pub const SYMPLECTIC_TOL: f64 = 1e-8;
pub const COMMUTING_ASSUMPTION_TOL: f64 = 1e-10;

/// Cell midpoint `(k + ½)/N`.
pub fn midpoint(grid: &TimeGrid, k: usize) -> f64 {
    (k as f64 + 0.5) / grid.len() as f64
}

pub fn sample_midpoints(grid: &TimeGrid, f: impl Fn(f64) -> DVector<f64>) -> Vec<DVector<f64>> {
    (0..grid.len()).map(|k| f(midpoint(grid, k))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    phase: PhaseSpace,
    phi: DMatrix<f64>,
    /// `ys[j][k] = Y_j(m_k)`.
    ys: Vec<Vec<DVector<f64>>>,
    a: DMatrix<f64>,
    grid: TimeGrid,
}

impl OperatorSpec {
    pub fn new(
        phase: PhaseSpace,
        phi: DMatrix<f64>,
        ys: Vec<Vec<DVector<f64>>>,
        a: DMatrix<f64>,
        grid: TimeGrid,
    ) -> Result<Self> {
        let d = phase.dim();
        if phi.shape() != (d, d) {
            return Err(Error::InvalidArgument(format!(
                "twist has shape {:?}, expected {d}x{d}",
                phi.shape()
            )));
        }
        let defect = symplecticity_defect(&phi);
        if !(defect <= SYMPLECTIC_TOL * phi.norm_squared().max(1.0)) {
            return Err(Error::InvalidArgument(format!(
                "twist is not symplectic (defect {defect:.3e})"
            )));
        }
        let m = ys.len();
        if a.shape() != (m, m) {
            return Err(Error::InvalidArgument(format!(
                "A has shape {:?}, expected {m}x{m}",
                a.shape()
            )));
        }
        let asym = (&a - a.transpose()).amax();
        if asym > 1e-14 * a.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "A is not symmetric (defect {asym:.3e})"
            )));
        }
        for (j, y) in ys.iter().enumerate() {
            if y.len() != grid.len() || y.iter().any(|v| v.len() != d) {
                return Err(Error::InvalidArgument(format!(
                    "Y_{j} is not sampled on the grid in dimension {d}"
                )));
            }
            if y.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
                return Err(Error::InvalidArgument(format!(
                    "Y_{j} has non-finite samples"
                )));
            }
        }
        Ok(Self {
            phase,
            phi,
            ys,
            a,
            grid,
        })
    }

    /// Sample the curves `Y_j` at the midpoints of `grid`.
    pub fn from_curves(
        phase: PhaseSpace,
        phi: DMatrix<f64>,
        curves: &[&dyn Fn(f64) -> DVector<f64>],
        a: DMatrix<f64>,
        grid: TimeGrid,
    ) -> Result<Self> {
        let ys = curves.iter().map(|c| sample_midpoints(&grid, c)).collect();
        Self::new(phase, phi, ys, a, grid)
    }

    pub fn phase(&self) -> PhaseSpace {
        self.phase
    }
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }
    pub fn ys(&self) -> &[Vec<DVector<f64>>] {
        &self.ys
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }
    pub fn m(&self) -> usize {
        self.ys.len()
    }

    /// Lemma bound `2n + m`.
    pub fn bound(&self) -> usize {
        self.phase.dim() + self.m()
    }

    fn check_field(&self, xi: &FieldAlongLoop) -> Result<()> {
        if xi.grid() != self.grid || xi.dim() != self.phase.dim() {
            return Err(Error::InvalidArgument(format!(
                "field on grid {} in dimension {} does not match operator grid {} in dimension {}",
                xi.grid().len(),
                xi.dim(),
                self.grid.len(),
                self.phase.dim()
            )));
        }
        Ok(())
    }

    /// Node values with the wrapped endpoint, `ξ_0..ξ_N`.
    fn wrapped<'a>(&self, xi: &'a FieldAlongLoop) -> impl Fn(usize) -> DVector<f64> + 'a {
        let end = &self.phi * &xi.samples()[0];
        move |k| {
            if k == xi.samples().len() {
                end.clone()
            } else {
                xi.samples()[k].clone()
            }
        }
    }

    /// Midpoint averages `(ξ_k + ξ_{k+1})/2`.
    pub fn midpoint_average(&self, xi: &FieldAlongLoop) -> Result<FieldAlongLoop> {
        self.check_field(xi)?;
        let node = self.wrapped(xi);
        let samples = (0..self.grid.len())
            .map(|k| (node(k) + node(k + 1)) * 0.5)
            .collect();
        FieldAlongLoop::new(self.grid, samples)
    }

    /// `c_i(ξ) = ∫⟨Y_i, ξ⟩` by the midpoint rule.
    pub fn nonlocal_coefficients(&self, xi: &FieldAlongLoop) -> Result<DVector<f64>> {
        let avg = self.midpoint_average(xi)?;
        Ok(DVector::from_iterator(
            self.m(),
            self.ys.iter().map(|y| {
                let vals: Vec<f64> = y.iter().zip(avg.samples()).map(|(a, b)| a.dot(b)).collect();
                self.grid.quadrature(&vals)
            }),
        ))
    }

    /// `Dξ`, sampled at the midpoints.
    pub fn apply(&self, xi: &FieldAlongLoop) -> Result<FieldAlongLoop> {
        self.check_field(xi)?;
        let c = self.nonlocal_coefficients(xi)?;
        let w = &self.a * c;
        let inv_h = self.grid.len() as f64;
        let node = self.wrapped(xi);
        let samples = (0..self.grid.len())
            .map(|k| {
                let mut out = apply_j(&((node(k + 1) - node(k)) * inv_h));
                for (j, y) in self.ys.iter().enumerate() {
                    out += &y[k] * w[j];
                }
                out
            })
            .collect();
        FieldAlongLoop::new(self.grid, samples)
    }

    /// The `J∂_t` part with the twisted wrap.
    pub fn assemble_local(&self) -> DMatrix<f64> {
        let d = self.phase.dim();
        let n = self.grid.len();
        let inv_h = n as f64;
        let j = self.phase.j_matrix() * inv_h;
        let mut mat = DMatrix::zeros(n * d, n * d);
        for k in 0..n {
            mat.view_mut((k * d, k * d), (d, d)).copy_from(&(-&j));
            if k + 1 < n {
                mat.view_mut((k * d, (k + 1) * d), (d, d)).copy_from(&j);
            } else {
                let wrap = &j * &self.phi;
                let mut block = mat.view_mut((k * d, 0), (d, d));
                block += wrap;
            }
        }
        mat
    }

    /// Row covector of `c_i` on the node unknowns.
    fn coefficient_row(&self, i: usize) -> DVector<f64> {
        let d = self.phase.dim();
        let n = self.grid.len();
        let h = self.grid.step();
        let y = &self.ys[i];
        let mut row = DVector::zeros(n * d);
        for k in 0..n {
            // node k enters cells k and k−1
            let left = if k == 0 {
                self.phi.transpose() * &y[n - 1]
            } else {
                y[k - 1].clone()
            };
            row.rows_mut(k * d, d)
                .copy_from(&((&y[k] + left) * (0.5 * h)));
        }
        row
    }

    /// Rank-≤m block `Σ a_ij (samples of Y_j) ⊗ (row of c_i)`.
    pub fn assemble_nonlocal(&self) -> DMatrix<f64> {
        let d = self.phase.dim();
        let n = self.grid.len();
        let mut mat = DMatrix::zeros(n * d, n * d);
        let rows: Vec<DVector<f64>> = (0..self.m()).map(|i| self.coefficient_row(i)).collect();
        for j in 0..self.m() {
            let col =
                DVector::from_iterator(n * d, self.ys[j].iter().flat_map(|v| v.iter().copied()));
            for (i, row) in rows.iter().enumerate() {
                let aij = self.a[(i, j)];
                if aij != 0.0 {
                    mat.ger(aij, &col, row, 1.0);
                }
            }
        }
        mat
    }

    pub fn assemble_matrix(&self) -> DMatrix<f64> {
        self.assemble_local() + self.assemble_nonlocal()
    }

    /// `⟨Dξ, Mη⟩_h − ⟨Mξ, Dη⟩_h`, the discrete form of `⟨Dξ,η⟩ − ⟨ξ,Dη⟩`
    /// with `M` the midpoint average.
    pub fn pairing_defect(&self, xi: &FieldAlongLoop, eta: &FieldAlongLoop) -> Result<f64> {
        let dxi = self.apply(xi)?;
        let deta = self.apply(eta)?;
        let mxi = self.midpoint_average(xi)?;
        let meta = self.midpoint_average(eta)?;
        Ok(dxi.l2_dot(&meta) - mxi.l2_dot(&deta))
    }

    /// Smooth field with `ξ(1) = Φξ(0)`: a random trigonometric polynomial
    /// `p` blended into `Φp` by a flat-ended smoothstep.
    pub fn random_twisted_field(&self, rng: &mut impl Rng) -> FieldAlongLoop {
        let d = self.phase.dim();
        const MODES: usize = 3;
        let coeffs: Vec<(f64, f64)> = (0..d * (MODES + 1))
            .map(|_| {
                (
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                )
            })
            .collect();
        let p = |t: f64| {
            DVector::from_fn(d, |i, _| {
                (0..=MODES)
                    .map(|k| {
                        let (a, b) = coeffs[i * (MODES + 1) + k];
                        let w = 2.0 * std::f64::consts::PI * k as f64 * t;
                        (a * w.cos() + b * w.sin()) / (1.0 + k as f64)
                    })
                    .sum::<f64>()
            })
        };
        FieldAlongLoop::from_fn(self.grid, |t| {
            let s = smoothstep(t);
            let pt = p(t);
            &pt * (1.0 - s) + &self.phi * &pt * s
        })
        .expect("finite samples on the operator grid")
    }

    /// Max `|⟨Dξ,η⟩ − ⟨ξ,Dη⟩|` over random smooth twisted pairs.
    pub fn symmetry_defect(&self, trials: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..trials)
            .map(|_| {
                let xi = self.random_twisted_field(&mut rng);
                let eta = self.random_twisted_field(&mut rng);
                self.pairing_defect(&xi, &eta)
                    .expect("fields built on this grid")
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    /// `Γ(ξ) = (ξ(0), ∫⟨Y_1,ξ⟩, …, ∫⟨Y_m,ξ⟩)`.
    pub fn gamma_embedding(&self, xi: &FieldAlongLoop) -> Result<DVector<f64>> {
        let c = self.nonlocal_coefficients(xi)?;
        let d = self.phase.dim();
        let mut out = DVector::zeros(d + self.m());
        out.rows_mut(0, d).copy_from(&xi.samples()[0]);
        out.rows_mut(d, self.m()).copy_from(&c);
        Ok(out)
    }

    /// Rebuild `ξ(t) = ξ(0) + Σ a_ij c_i ∫₀ᵗ JY_j` from `Γ(ξ)`.
    pub fn reconstruct(&self, gamma: &DVector<f64>) -> Result<FieldAlongLoop> {
        let d = self.phase.dim();
        if gamma.len() != d + self.m() {
            return Err(Error::InvalidArgument(format!(
                "Γ vector has length {}, expected {}",
                gamma.len(),
                d + self.m()
            )));
        }
        let c = gamma.rows(d, self.m()).into_owned();
        let w = &self.a * c;
        let h = self.grid.step();
        let mut x = gamma.rows(0, d).into_owned();
        let mut samples = Vec::with_capacity(self.grid.len());
        for k in 0..self.grid.len() {
            samples.push(x.clone());
            for (j, y) in self.ys.iter().enumerate() {
                x += apply_j(&y[k]) * (h * w[j]);
            }
        }
        FieldAlongLoop::new(self.grid, samples)
    }

    /// Check assumptions (i) constant `Y_j` and (ii) `ω(Y_i, Y_j) = 0`.
    pub fn check_commuting_assumptions(&self, tol: f64) -> Result<()> {
        for (j, y) in self.ys.iter().enumerate() {
            let drift = y.iter().map(|v| (v - &y[0]).amax()).fold(0.0, f64::max);
            if drift > tol * y[0].amax().max(1.0) {
                return Err(Error::Precondition(format!(
                    "assumption (i) failed: Y_{j} varies in time by {drift:.3e}"
                )));
            }
        }
        for i in 0..self.m() {
            for j in i + 1..self.m() {
                let w = omega_unchecked(&self.ys[i][0], &self.ys[j][0]).abs();
                if w > tol {
                    return Err(Error::Precondition(format!(
                        "assumption (ii) failed: |ω(Y_{i}, Y_{j})| = {w:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `B = Σ a_ij (JY_j)(Y_i)ᵀ` for constant `Y`.
    pub fn commuting_generator(&self) -> DMatrix<f64> {
        let d = self.phase.dim();
        let mut b = DMatrix::zeros(d, d);
        for i in 0..self.m() {
            for j in 0..self.m() {
                let jy = apply_j(&self.ys[j][0]);
                b += jy * self.ys[i][0].transpose() * self.a[(i, j)];
            }
        }
        b
    }

    /// Closed-form kernel under assumptions (i), (ii): `ξ(t) = ξ₀ + tBξ₀`
    /// with `(Φ − I − B)ξ₀ = 0`.
    pub fn commuting_kernel(&self, tol: f64) -> Result<CommutingKernel> {
        self.check_commuting_assumptions(tol)?;
        let d = self.phase.dim();
        let b = self.commuting_generator();
        let reduced = &self.phi - DMatrix::identity(d, d) - &b;
        let svd = reduced.clone().svd(false, true);
        let v_t = svd
            .v_t
            .as_ref()
            .ok_or_else(|| Error::Numerical("SVD without right vectors".into()))?;
        let scale = svd.singular_values.max().max(1.0);
        let kernel_tol = 1e-8 * scale;
        let initial: Vec<DVector<f64>> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s < kernel_tol)
            .map(|(i, _)| v_t.row(i).transpose())
            .collect();
        let fields = initial
            .iter()
            .map(|x0| {
                let v = &b * x0;
                FieldAlongLoop::from_fn(self.grid, |t| x0 + &v * t)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CommutingKernel {
            dimension: initial.len(),
            initial,
            fields,
            reduced_matrix: reduced,
        })
    }
}

fn psi(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// C^∞ step from 0 at `t ≤ 0` to 1 at `t ≥ 1`, flat to all orders at both ends.
pub fn smoothstep(t: f64) -> f64 {
    let a = psi(t);
    let b = psi(1.0 - t);
    a / (a + b)
}

#[derive(Debug, Clone)]
pub struct CommutingKernel {
    pub dimension: usize,
    /// Orthonormal basis of `ker(Φ − I − B)`.
    pub initial: Vec<DVector<f64>>,
    pub fields: Vec<FieldAlongLoop>,
    pub reduced_matrix: DMatrix<f64>,
}

/// Spectrum, nullity and symmetry of one operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Descending.
    pub singular_values: Vec<f64>,
    pub nullity: usize,
    pub tolerance_used: f64,
    pub symmetry_defect: f64,
    pub bound: usize,
    pub bound_satisfied: bool,
}

impl SpectralReport {
    pub fn from_outcome(outcome: NullityOutcome, symmetry_defect: f64, bound: usize) -> Self {
        Self {
            bound_satisfied: outcome.nullity <= bound,
            singular_values: outcome.singular_values,
            nullity: outcome.nullity,
            tolerance_used: outcome.tolerance_used,
            symmetry_defect,
            bound,
        }
    }
}

/// Assemble, decompose and measure symmetry with default tolerances.
pub fn spectral_report(
    spec: &OperatorSpec,
    bound: usize,
    trials: usize,
    seed: u64,
) -> Result<SpectralReport> {
    let outcome = nullity::numerical_nullity(
        &spec.assemble_matrix(),
        nullity::default_atol(spec.grid().len()),
        nullity::DEFAULT_RTOL,
    )?;
    Ok(SpectralReport::from_outcome(
        outcome,
        spec.symmetry_defect(trials, seed),
        bound,
    ))
}

/// Orthonormal kernel fields of the assembled matrix.
pub fn kernel_fields(spec: &OperatorSpec, count: usize) -> Result<Vec<FieldAlongLoop>> {
    let d = spec.phase().dim();
    nullity::null_space(&spec.assemble_matrix(), count)?
        .iter()
        .map(|v| FieldAlongLoop::from_flat(spec.grid(), d, v))
        .collect()
}

fn random_symmetric(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&g + g.transpose()) * (0.5 * scale)
}

/// `exp(JS)` for a random symmetric `S`.
pub fn random_symplectic(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let s = random_symmetric(rng, 2 * n, scale);
    (crate::symplectic::j_matrix(n) * s).exp()
}

/// Which twist a commuting instance uses; chosen from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TwistKind {
    Random,
    Identity,
    /// `Φ = I + B`, so that every `ξ₀` is in the kernel.
    Generator,
    /// `Φ = I + θB` with random `θ`.
    ScaledGenerator,
}

/// Random operator instance. Non-commuting instances use band-limited `Y_j`;
/// commuting ones use constant `Y_j` in an isotropic subspace.
pub fn random_instance(
    n: usize,
    m: usize,
    grid: TimeGrid,
    seed: u64,
    commuting: bool,
) -> Result<OperatorSpec> {
    let phase = PhaseSpace::new(n)?;
    let d = phase.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_symmetric(&mut rng, m, 1.0);
    if commuting {
        let p = random_symplectic(&mut rng, n, 0.5);
        let ys: Vec<Vec<DVector<f64>>> = (0..m)
            .map(|_| {
                let g = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = p.columns(0, n) * g;
                vec![y; grid.len()]
            })
            .collect();
        let kind = [
            TwistKind::Random,
            TwistKind::Identity,
            TwistKind::Generator,
            TwistKind::ScaledGenerator,
        ][(seed % 4) as usize];
        let mut spec = OperatorSpec::new(phase, DMatrix::identity(d, d), ys, a, grid)?;
        let b = spec.commuting_generator();
        spec.phi = match kind {
            TwistKind::Random => random_symplectic(&mut rng, n, 0.5),
            TwistKind::Identity => DMatrix::identity(d, d),
            TwistKind::Generator => DMatrix::identity(d, d) + b,
            TwistKind::ScaledGenerator => DMatrix::identity(d, d) + b * rng.gen_range(-2.0..2.0),
        };
        OperatorSpec::new(phase, spec.phi, spec.ys, spec.a, grid)
    } else {
        const MODES: usize = 3;
        let phi = if rng.gen_bool(0.25) {
            DMatrix::identity(d, d)
        } else {
            random_symplectic(&mut rng, n, 0.5)
        };
        let ys = (0..m)
            .map(|_| {
                let coeffs: Vec<DVector<f64>> = (0..2 * (MODES + 1))
                    .map(|_| DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)))
                    .collect();
                sample_midpoints(&grid, |t| {
                    let mut y = DVector::zeros(d);
                    for k in 0..=MODES {
                        let w = 2.0 * std::f64::consts::PI * k as f64 * t;
                        y += (&coeffs[2 * k] * w.cos() + &coeffs[2 * k + 1] * w.sin())
                            / (1.0 + k as f64);
                    }
                    y
                })
            })
            .collect();
        OperatorSpec::new(phase, phi, ys, a, grid)
    }
}

/// `Φ⁻¹` via the symplectic identity.
pub fn twist_inverse(spec: &OperatorSpec) -> DMatrix<f64> {
    symplectic_inverse(spec.phi())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nullity::{numerical_nullity, DEFAULT_RTOL};
    use crate::symplectic::j_matrix;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};
    use std::f64::consts::PI;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(n).unwrap()
    }

    fn rotation(theta: f64) -> DMatrix<f64> {
        (j_matrix(1) * theta).exp()
    }

    fn bare(phi: DMatrix<f64>, n: usize) -> OperatorSpec {
        OperatorSpec::new(
            PhaseSpace::new(phi.nrows() / 2).unwrap(),
            phi,
            vec![],
            DMatrix::zeros(0, 0),
            grid(n),
        )
        .unwrap()
    }

    fn e1_spec(a: f64, n: usize) -> OperatorSpec {
        let g = grid(n);
        let ys = vec![vec![DVector::from_vec(vec![1.0, 0.0]); n]];
        OperatorSpec::new(
            PhaseSpace::new(1).unwrap(),
            DMatrix::identity(2, 2),
            ys,
            DMatrix::from_element(1, 1, a),
            g,
        )
        .unwrap()
    }

    fn nullity_of(spec: &OperatorSpec) -> usize {
        numerical_nullity(
            &spec.assemble_matrix(),
            nullity::default_atol(spec.grid().len()),
            DEFAULT_RTOL,
        )
        .unwrap()
        .nullity
    }

    #[test]
    fn validation() {
        let p = PhaseSpace::new(1).unwrap();
        let g = grid(8);
        let shear = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(OperatorSpec::new(p, shear, vec![], DMatrix::zeros(0, 0), g).is_err());
        let ys = vec![vec![DVector::zeros(2); 8]; 2];
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(OperatorSpec::new(p, DMatrix::identity(2, 2), ys, asym, g).is_err());
    }

    #[test]
    fn constants_are_annihilated() {
        let spec = bare(DMatrix::identity(2, 2), 16);
        let xi =
            FieldAlongLoop::from_fn(spec.grid(), |_| DVector::from_vec(vec![0.3, -1.0])).unwrap();
        assert_eq!(spec.apply(&xi).unwrap().sup_norm(), 0.0);
        assert!((spec.assemble_matrix() * xi.to_flat()).amax() == 0.0);
    }

    #[test]
    fn derivative_of_circle() {
        let n = 256;
        let spec = bare(DMatrix::identity(2, 2), n);
        let xi = FieldAlongLoop::from_fn(spec.grid(), |t| {
            DVector::from_vec(vec![(2.0 * PI * t).cos(), (2.0 * PI * t).sin()])
        })
        .unwrap();
        let d = spec.apply(&xi).unwrap();
        let h = 1.0 / n as f64;
        // truncation bound of the box difference, |ξ'''| = (2π)³
        let bound = h * h / 24.0 * (2.0 * PI).powi(3) * 1.01;
        for (k, v) in d.samples().iter().enumerate() {
            let t = midpoint(&spec.grid(), k);
            let exact = apply_j(&DVector::from_vec(vec![
                -(2.0 * PI * t).sin(),
                (2.0 * PI * t).cos(),
            ])) * (2.0 * PI);
            assert!((v - exact).amax() < bound);
        }
    }

    #[test]
    fn nonlocal_only_example() {
        let spec = e1_spec(1.0, 16);
        let xi =
            FieldAlongLoop::from_fn(spec.grid(), |_| DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let d = spec.apply(&xi).unwrap();
        for v in d.samples() {
            assert!((v - DVector::from_vec(vec![1.0, 0.0])).amax() < 1e-14);
        }
    }

    #[test]
    fn matrix_matches_matrix_free_path() {
        let spec = random_instance(2, 3, grid(16), 7, false).unwrap();
        let mat = spec.assemble_matrix();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let flat = DVector::from_fn(16 * 4, |_, _| rng.gen_range(-1.0..1.0));
            let xi = FieldAlongLoop::from_flat(spec.grid(), 4, &flat).unwrap();
            let via_apply = spec.apply(&xi).unwrap().to_flat();
            assert!((&mat * &flat - via_apply).amax() < 1e-10);
        }
        let s = nullity::singular_values(&spec.assemble_nonlocal()).unwrap();
        assert!(s[3..].iter().all(|&v| v < 1e-10));
    }

    #[test]
    fn nullity_examples() {
        assert_eq!(nullity_of(&bare(DMatrix::identity(2, 2), 256)), 2);
        assert_eq!(nullity_of(&bare(-DMatrix::identity(2, 2), 256)), 0);
        assert_eq!(nullity_of(&bare(rotation(0.3), 256)), 0);
        // odd grids have no spurious modes either
        assert_eq!(nullity_of(&bare(DMatrix::identity(2, 2), 33)), 2);
        assert_eq!(nullity_of(&bare(-DMatrix::identity(2, 2), 33)), 0);
    }

    #[test]
    fn symmetry_examples() {
        let base = bare(DMatrix::identity(2, 2), 256);
        let d0 = base.symmetry_defect(10, 3);
        assert!(d0 <= 1e-6);
        let rot = bare(rotation(0.9), 256);
        assert!(rot.symmetry_defect(10, 3) <= 1e-6);
        // a symmetric rank-one nonlocal term leaves the defect unchanged
        let ys = vec![vec![DVector::from_vec(vec![0.4, -1.2]); 256]];
        let with = OperatorSpec::new(
            PhaseSpace::new(1).unwrap(),
            DMatrix::identity(2, 2),
            ys,
            DMatrix::from_element(1, 1, 2.5),
            grid(256),
        )
        .unwrap();
        assert!((with.symmetry_defect(10, 3) - d0).abs() < 1e-12);
    }

    #[test]
    fn twisted_fields_satisfy_twist() {
        let spec = random_instance(2, 1, grid(64), 11, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let xi = spec.random_twisted_field(&mut rng);
        // ξ(0) = p(0); the smooth blend reaches Φp(1) = Φξ(0) at t = 1
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-15);
        assert!(xi.samples().iter().all(|v| v.iter().all(|x| x.is_finite())));
    }

    #[test]
    fn gamma_examples() {
        let spec = e1_spec(2.0, 32);
        let zero = FieldAlongLoop::zeros(spec.grid(), 2).unwrap();
        assert_eq!(spec.gamma_embedding(&zero).unwrap().amax(), 0.0);
        let b = bare(DMatrix::identity(2, 2), 16);
        let xi = FieldAlongLoop::from_fn(b.grid(), |_| DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert_eq!(b.gamma_embedding(&xi).unwrap().as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn kernel_reconstruction_from_gamma() {
        for seed in 0..8 {
            let spec = random_instance(1 + (seed as usize % 3), 2, grid(64), seed, true).unwrap();
            let k = nullity_of(&spec);
            for xi in kernel_fields(&spec, k).unwrap() {
                let rebuilt = spec
                    .reconstruct(&spec.gamma_embedding(&xi).unwrap())
                    .unwrap();
                let dev = xi
                    .samples()
                    .iter()
                    .zip(rebuilt.samples())
                    .map(|(a, b)| (a - b).amax())
                    .fold(0.0, f64::max);
                assert!(dev <= 1e-6, "seed {seed}: {dev}");
            }
        }
    }

    #[test]
    fn commuting_kernel_examples() {
        let spec = bare(DMatrix::identity(2, 2), 16);
        let k = spec.commuting_kernel(COMMUTING_ASSUMPTION_TOL).unwrap();
        assert_eq!(k.dimension, 2);
        assert!(k.fields.iter().all(|f| f
            .samples()
            .iter()
            .all(|v| (v - &f.samples()[0]).amax() < 1e-15)));

        let spec = e1_spec(0.7, 16);
        let k = spec.commuting_kernel(COMMUTING_ASSUMPTION_TOL).unwrap();
        assert_eq!(k.dimension, 1);
        assert!(k.initial[0][0].abs() < 1e-12);
        assert_eq!(nullity_of(&spec), 1);
    }

    #[test]
    fn commuting_preconditions_are_named() {
        let g = grid(16);
        let p = PhaseSpace::new(1).unwrap();
        let varying = vec![sample_midpoints(&g, |t| DVector::from_vec(vec![t, 0.0]))];
        let spec = OperatorSpec::new(
            p,
            DMatrix::identity(2, 2),
            varying,
            DMatrix::identity(1, 1),
            g,
        )
        .unwrap();
        let err = spec.commuting_kernel(COMMUTING_ASSUMPTION_TOL).unwrap_err();
        assert!(matches!(&err, Error::Precondition(s) if s.contains("(i)")));

        let ys = vec![
            vec![DVector::from_vec(vec![1.0, 0.0]); 16],
            vec![DVector::from_vec(vec![0.0, 1.0]); 16],
        ];
        let spec =
            OperatorSpec::new(p, DMatrix::identity(2, 2), ys, DMatrix::identity(2, 2), g).unwrap();
        let err = spec.commuting_kernel(COMMUTING_ASSUMPTION_TOL).unwrap_err();
        assert!(matches!(&err, Error::Precondition(s) if s.contains("(ii)")));
    }

    #[test]
    fn random_instances() {
        let g = grid(32);
        for seed in 0..20 {
            let s = random_instance(3, 4, g, seed, seed % 2 == 0).unwrap();
            assert!(symplecticity_defect(s.phi()) <= 1e-10);
            if seed % 2 == 0 {
                for i in 0..4 {
                    for j in 0..4 {
                        assert!(omega_unchecked(&s.ys()[i][0], &s.ys()[j][0]).abs() <= 1e-12);
                    }
                }
            }
            assert_eq!(s, random_instance(3, 4, g, seed, seed % 2 == 0).unwrap());
        }
        let inv = twist_inverse(&random_instance(2, 0, g, 5, false).unwrap());
        assert!(
            (inv * random_instance(2, 0, g, 5, false).unwrap().phi() - DMatrix::identity(4, 4))
                .amax()
                < 1e-12
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn lemma_bound_small_grids(seed in 0u64..10_000, n in 1usize..=3, m in 0usize..=4) {
            let spec = random_instance(n, m, grid(32), seed, false).unwrap();
            prop_assert!(nullity_of(&spec) <= 2 * n + m);
        }

        #[test]
        fn commuting_bound_and_closed_form(seed in 0u64..10_000, n in 1usize..=3, m in 0usize..=4) {
            let spec = random_instance(n, m, grid(32), seed, true).unwrap();
            let k = spec.commuting_kernel(COMMUTING_ASSUMPTION_TOL).unwrap();
            let numeric = nullity_of(&spec);
            prop_assert!(numeric <= 2 * n);
            prop_assert_eq!(numeric, k.dimension);
        }

        #[test]
        fn discrete_symmetry_is_exact(seed in 0u64..10_000, n in 1usize..=2, m in 0usize..=3) {
            let spec = random_instance(n, m, grid(64), seed, false).unwrap();
            prop_assert!(spec.symmetry_defect(3, seed) <= 1e-9);
        }

        #[test]
        fn gamma_is_injective_on_kernel(seed in 0u64..10_000, n in 1usize..=2) {
            let spec = random_instance(n, 2, grid(32), seed, true).unwrap();
            let k = nullity_of(&spec);
            let fields = kernel_fields(&spec, k).unwrap();
            for a in 0..fields.len() {
                for b in a + 1..fields.len() {
                    let diff = FieldAlongLoop::new(spec.grid(),
                        fields[a].samples().iter().zip(fields[b].samples()).map(|(x, y)| x - y).collect()).unwrap();
                    if diff.l2_norm() >= 1e-4 {
                        let ga = spec.gamma_embedding(&fields[a]).unwrap();
                        let gb = spec.gamma_embedding(&fields[b]).unwrap();
                        prop_assert!((ga - gb).norm() >= 1e-8);
                    }
                }
            }
        }
    }
}
