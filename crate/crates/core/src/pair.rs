//! Pairs `F = (f, H)`: mean values along loops, the action functional,
//! the critical-point residual and the commuting test.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldAlongLoop, Loop};
use crate::symplectic::{apply_j, omega_unchecked, PhaseSpace};

/// Vector-valued Hamiltonian `H: ℝ²ⁿ → ℝᵐ` with analytic derivatives.
pub trait Hamiltonian: Send + Sync {
    fn phase(&self) -> PhaseSpace;
    fn m(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `m × 2n` matrix whose rows are `∇H_i(x)`.
    fn gradient(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// One symmetric `2n × 2n` Hessian per component.
    fn hessians(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>>;
}

/// Function `f: W → ℝ` on an open set `W ⊂ ℝᵐ`.
pub trait MeanFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    fn in_domain(&self, _x: &DVector<f64>) -> bool {
        true
    }
}

/// `H̄(u)` together with the membership flag for `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanValue {
    pub value: DVector<f64>,
    pub in_domain: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutingReport {
    pub commuting: bool,
    pub max_bracket: f64,
    pub samples: usize,
}

pub const COMMUTING_TOL: f64 = 1e-8;
pub const COMMUTING_SAMPLES: usize = 200;
pub const COMMUTING_SEED: u64 = 0x5eed_c0de;

#[derive(Clone)]
pub struct PairSpec {
    name: String,
    h: Arc<dyn Hamiltonian>,
    f: Arc<dyn MeanFunction>,
    commuting_by_construction: bool,
}

impl fmt::Debug for PairSpec {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("PairSpec")
            .field("name", &self.name)
            .field("phase", &self.h.phase())
            .field("m", &self.h.m())
            .field("commuting_by_construction", &self.commuting_by_construction)
            .finish()
    }
}

impl PairSpec {
    pub fn new(
        name: impl Into<String>,
        h: Arc<dyn Hamiltonian>,
        f: Arc<dyn MeanFunction>,
    ) -> Result<Self> {
        if h.m() == 0 {
            return Err(Error::InvalidArgument(
                "H must have at least one component".into(),
            ));
        }
        if h.m() != f.dim() {
            return Err(Error::InvalidArgument(format!(
                "H has {} components but f takes {}",
                h.m(),
                f.dim()
            )));
        }
        Ok(Self {
            name: name.into(),
            h,
            f,
            commuting_by_construction: false,
        })
    }

    pub fn with_commuting_flag(mut self, flag: bool) -> Self {
        self.commuting_by_construction = flag;
        self
    }

    pub fn with_mean_function(
        &self,
        f: Arc<dyn MeanFunction>,
        name: impl Into<String>,
    ) -> Result<Self> {
        Ok(Self::new(name, self.h.clone(), f)?.with_commuting_flag(self.commuting_by_construction))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn phase(&self) -> PhaseSpace {
        self.h.phase()
    }

    pub fn m(&self) -> usize {
        self.h.m()
    }

    pub fn hamiltonian(&self) -> &Arc<dyn Hamiltonian> {
        &self.h
    }

    pub fn mean_function(&self) -> &Arc<dyn MeanFunction> {
        &self.f
    }

    pub fn commuting_by_construction(&self) -> bool {
        self.commuting_by_construction
    }

    pub fn mean_value(&self, u: &Loop) -> MeanValue {
        let values: Vec<DVector<f64>> = u.samples().iter().map(|x| self.h.value(x)).collect();
        let value = u.grid().quadrature_vec(&values);
        let in_domain = self.f.in_domain(&value);
        MeanValue { value, in_domain }
    }

    fn checked_mean(&self, u: &Loop) -> Result<DVector<f64>> {
        self.check_loop(u)?;
        let mean = self.mean_value(u);
        if !mean.in_domain {
            return Err(Error::Domain(format!(
                "mean value {:?} lies outside W",
                mean.value.as_slice()
            )));
        }
        Ok(mean.value)
    }

    fn check_loop(&self, u: &Loop) -> Result<()> {
        if u.dim() != self.phase().dim() {
            return Err(Error::InvalidArgument(format!(
                "loop dimension {} does not match phase space dimension {}",
                u.dim(),
                self.phase().dim()
            )));
        }
        Ok(())
    }

    /// Frozen field `Σ c_i J∇H_i(x)`.
    pub fn vector_field(&self, c: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        apply_j(&(self.h.gradient(x).transpose() * c))
    }

    /// Jacobian of the frozen field, `Σ c_i J·Hess H_i(x)`.
    pub fn field_jacobian(&self, c: &DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
        let d = self.phase().dim();
        let mut acc = DMatrix::zeros(d, d);
        for (ci, hess) in c.iter().zip(self.h.hessians(x)) {
            acc += hess * *ci;
        }
        self.phase().j_matrix() * acc
    }

    /// `½∫ω(u, u̇)`, the symplectic area of any filling disk.
    pub fn area(u: &Loop) -> f64 {
        let du = u.derivative();
        let vals: Vec<f64> = u
            .samples()
            .iter()
            .zip(&du)
            .map(|(x, dx)| omega_unchecked(x, dx))
            .collect();
        0.5 * u.grid().quadrature(&vals)
    }

    /// `𝒜_F(u) = ∫ū*ω − f(H̄(u))`.
    pub fn action(&self, u: &Loop) -> Result<f64> {
        let mean = self.checked_mean(u)?;
        Ok(Self::area(u) - self.f.value(&mean))
    }

    /// `u̇ − Σ (df)_i J∇H_i(u)` with `df` evaluated at `H̄(u)`.
    pub fn critical_residual(&self, u: &Loop) -> Result<FieldAlongLoop> {
        let mean = self.checked_mean(u)?;
        let c = self.f.gradient(&mean);
        let du = u.derivative();
        let samples = u
            .samples()
            .iter()
            .zip(du)
            .map(|(x, dx)| dx - self.vector_field(&c, x))
            .collect();
        FieldAlongLoop::new(u.grid(), samples)
    }

    /// `d𝒜_F(u)·v = ∫ω(v, r)` where `r` is the critical residual.
    pub fn action_derivative(&self, u: &Loop, v: &FieldAlongLoop) -> Result<f64> {
        let r = self.critical_residual(u)?;
        let vals: Vec<f64> = v
            .samples()
            .iter()
            .zip(r.samples())
            .map(|(a, b)| omega_unchecked(a, b))
            .collect();
        Ok(u.grid().quadrature(&vals))
    }

    /// Poisson brackets `ω(X_{H_i}, X_{H_j})` at random points of `[−2, 2]²ⁿ`.
    pub fn is_commuting(&self, samples: usize, seed: u64) -> CommutingReport {
        let d = self.phase().dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max_bracket: f64 = 0.0;
        if self.m() > 1 {
            for _ in 0..samples {
                let x = DVector::from_fn(d, |_, _| rng.gen_range(-2.0..2.0));
                let g = self.h.gradient(&x);
                let fields: Vec<DVector<f64>> = (0..self.m())
                    .map(|i| apply_j(&g.row(i).transpose()))
                    .collect();
                for i in 0..self.m() {
                    for j in i + 1..self.m() {
                        max_bracket =
                            max_bracket.max(omega_unchecked(&fields[i], &fields[j]).abs());
                    }
                }
            }
        }
        CommutingReport {
            commuting: max_bracket <= COMMUTING_TOL,
            max_bracket,
            samples,
        }
    }

    /// Commuting by construction, or by the default sampled test.
    pub fn commuting(&self) -> bool {
        self.commuting_by_construction
            || self
                .is_commuting(COMMUTING_SAMPLES, COMMUTING_SEED)
                .commuting
    }

    /// Largest deviation between `∇H` and central differences of `H` at
    /// random points (self-check).
    pub fn gradient_check(&self, points: usize, seed: u64) -> f64 {
        let d = self.phase().dim();
        let h = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let x = DVector::from_fn(d, |_, _| rng.gen_range(0.5..2.0));
            let g = self.h.gradient(&x);
            for k in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd = (self.h.value(&xp) - self.h.value(&xm)) / (2.0 * h);
                for i in 0..self.m() {
                    worst = worst.max((fd[i] - g[(i, k)]).abs());
                }
            }
        }
        worst
    }
}

/// `H(x₁, …, x_m) = (H₁(x₁), …, H_m(x_m))` on a product phase space.
struct ProductHamiltonian {
    factors: Vec<Arc<dyn Hamiltonian>>,
    spaces: Vec<PhaseSpace>,
    phase: PhaseSpace,
}

impl ProductHamiltonian {
    fn restrict(&self, index: usize, x: &DVector<f64>) -> (DVector<f64>, Vec<usize>) {
        let (q, p) = PhaseSpace::embed_factor(&self.spaces, index);
        let idx: Vec<usize> = q.into_iter().chain(p).collect();
        (
            DVector::from_iterator(idx.len(), idx.iter().map(|&i| x[i])),
            idx,
        )
    }
}

impl Hamiltonian for ProductHamiltonian {
    fn phase(&self) -> PhaseSpace {
        self.phase
    }

    fn m(&self) -> usize {
        self.factors.len()
    }

    fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.factors.len(),
            self.factors
                .iter()
                .enumerate()
                .map(|(j, h)| h.value(&self.restrict(j, x).0)[0]),
        )
    }

    fn gradient(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.factors.len(), self.phase.dim());
        for (j, h) in self.factors.iter().enumerate() {
            let (xj, idx) = self.restrict(j, x);
            let gj = h.gradient(&xj);
            for (a, &i) in idx.iter().enumerate() {
                g[(j, i)] = gj[(0, a)];
            }
        }
        g
    }

    fn hessians(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let d = self.phase.dim();
        self.factors
            .iter()
            .enumerate()
            .map(|(j, h)| {
                let (xj, idx) = self.restrict(j, x);
                let hj = &h.hessians(&xj)[0];
                let mut out = DMatrix::zeros(d, d);
                for (a, &ia) in idx.iter().enumerate() {
                    for (b, &ib) in idx.iter().enumerate() {
                        out[(ia, ib)] = hj[(a, b)];
                    }
                }
                out
            })
            .collect()
    }
}

/// Product of scalar pairs with a caller-supplied `f` on `W ⊂ ℝᵐ`.
pub fn product_pair(
    factors: &[PairSpec],
    f: Arc<dyn MeanFunction>,
    name: impl Into<String>,
) -> Result<PairSpec> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument(
            "product of an empty list of pairs".into(),
        ));
    }
    if let Some(bad) = factors.iter().position(|p| p.m() != 1) {
        return Err(Error::InvalidArgument(format!(
            "factor {bad} has a vector-valued Hamiltonian"
        )));
    }
    let spaces: Vec<PhaseSpace> = factors.iter().map(|p| p.phase()).collect();
    let phase = PhaseSpace::product(&spaces)?;
    let h = ProductHamiltonian {
        factors: factors.iter().map(|p| p.h.clone()).collect(),
        spaces,
        phase,
    };
    Ok(PairSpec::new(name, Arc::new(h), f)?.with_commuting_flag(true))
}

/// `x ↦ s·f(x)`, with the domain of `f`.
pub struct ScaledMean {
    inner: Arc<dyn MeanFunction>,
    factor: f64,
}

impl ScaledMean {
    pub fn new(inner: Arc<dyn MeanFunction>, factor: f64) -> Self {
        Self { inner, factor }
    }
}

impl MeanFunction for ScaledMean {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.factor * self.inner.value(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner.gradient(x) * self.factor
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.inner.hessian(x) * self.factor
    }
    fn in_domain(&self, x: &DVector<f64>) -> bool {
        self.inner.in_domain(x)
    }
}
