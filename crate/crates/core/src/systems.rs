//! Built-in Hamiltonians, mean functions and the named system registry.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pair::{product_pair, Hamiltonian, MeanFunction, PairSpec};
use crate::symplectic::PhaseSpace;

/// `H(x) = |x|²/2` on ℝ²ⁿ.
#[derive(Debug, Clone, Copy)]
pub struct Harmonic {
    phase: PhaseSpace,
}

impl Harmonic {
    pub fn new(n: usize) -> Self {
        Self {
            phase: PhaseSpace::new(n.max(1)).expect("n >= 1"),
        }
    }
}

impl Hamiltonian for Harmonic {
    fn phase(&self) -> PhaseSpace {
        self.phase
    }
    fn m(&self) -> usize {
        1
    }
    fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, 0.5 * x.norm_squared())
    }
    fn gradient(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, x.len(), x.as_slice())
    }
    fn hessians(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::identity(x.len(), x.len())]
    }
}

/// All coordinates as components, `H(x) = x`.
#[derive(Debug, Clone, Copy)]
pub struct Coordinates {
    phase: PhaseSpace,
}

impl Hamiltonian for Coordinates {
    fn phase(&self) -> PhaseSpace {
        self.phase
    }
    fn m(&self) -> usize {
        self.phase.dim()
    }
    fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        x.clone()
    }
    fn gradient(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(x.len(), x.len())
    }
    fn hessians(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(x.len(), x.len()); x.len()]
    }
}

/// First position coordinate, `H(q, p) = q₁`. Its flow is a translation.
#[derive(Debug, Clone, Copy)]
pub struct Translation {
    phase: PhaseSpace,
}

impl Translation {
    pub fn new(n: usize) -> Self {
        Self {
            phase: PhaseSpace::new(n.max(1)).expect("n >= 1"),
        }
    }
}

impl Hamiltonian for Translation {
    fn phase(&self) -> PhaseSpace {
        self.phase
    }
    fn m(&self) -> usize {
        1
    }
    fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, x[0])
    }
    fn gradient(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(1, x.len());
        g[(0, 0)] = 1.0;
        g
    }
    fn hessians(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(x.len(), x.len())]
    }
}

/// Two electrons on half-lines attracted by a nucleus of charge `mu`:
/// `H = (p₁²/2 + p₂²/2 − mu/q₁ − mu/q₂, q₁, q₂)`.
#[derive(Debug, Clone, Copy)]
pub struct Helium {
    pub mu: f64,
}

impl Hamiltonian for Helium {
    fn phase(&self) -> PhaseSpace {
        PhaseSpace::new(2).expect("n = 2")
    }
    fn m(&self) -> usize {
        3
    }
    fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        let (q1, q2, p1, p2) = (x[0], x[1], x[2], x[3]);
        let e = 0.5 * (p1 * p1 + p2 * p2) - self.mu / q1 - self.mu / q2;
        DVector::from_vec(vec![e, q1, q2])
    }
    fn gradient(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (q1, q2, p1, p2) = (x[0], x[1], x[2], x[3]);
        #[rustfmt::skip]
        let g = DMatrix::from_row_slice(3, 4, &[
            self.mu / (q1 * q1), self.mu / (q2 * q2), p1, p2,
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
        ]);
        g
    }
    fn hessians(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let (q1, q2) = (x[0], x[1]);
        let e = DMatrix::from_diagonal(&DVector::from_vec(vec![
            -2.0 * self.mu / q1.powi(3),
            -2.0 * self.mu / q2.powi(3),
            1.0,
            1.0,
        ]));
        vec![e, DMatrix::zeros(4, 4), DMatrix::zeros(4, 4)]
    }
}

/// `H(z, w) = (|z|², |w|²)` on `T*ℂ`, with `z = q` and `w = p`.
#[derive(Debug, Clone, Copy)]
pub struct Bov;

impl Hamiltonian for Bov {
    fn phase(&self) -> PhaseSpace {
        PhaseSpace::new(2).expect("n = 2")
    }
    fn m(&self) -> usize {
        2
    }
    fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![x[0] * x[0] + x[1] * x[1], x[2] * x[2] + x[3] * x[3]])
    }
    fn gradient(&self, x: &DVector<f64>) -> DMatrix<f64> {
        #[rustfmt::skip]
        let g = DMatrix::from_row_slice(2, 4, &[
            2.0 * x[0], 2.0 * x[1], 0.0, 0.0,
            0.0, 0.0, 2.0 * x[2], 2.0 * x[3],
        ]);
        g
    }
    fn hessians(&self, _x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let z = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0, 0.0, 0.0]));
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 2.0, 2.0]));
        vec![z, w]
    }
}

/// `f(x) = ⟨c, x⟩`.
#[derive(Debug, Clone)]
pub struct Linear {
    c: DVector<f64>,
}

impl Linear {
    pub fn new(c: Vec<f64>) -> Self {
        Self {
            c: DVector::from_vec(c),
        }
    }
}

impl MeanFunction for Linear {
    fn dim(&self) -> usize {
        self.c.len()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.c.dot(x)
    }
    fn gradient(&self, _x: &DVector<f64>) -> DVector<f64> {
        self.c.clone()
    }
    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.c.len(), self.c.len())
    }
}

/// `f(x) = ½xᵀAx` with symmetric `A`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: DMatrix<f64>,
}

impl Quadratic {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a != a.transpose() {
            return Err(Error::InvalidArgument(
                "quadratic form must be square and symmetric".into(),
            ));
        }
        Ok(Self { a })
    }

    /// `x²/2` on ℝ.
    pub fn half_square() -> Self {
        Self {
            a: DMatrix::identity(1, 1),
        }
    }

    /// `½Σxᵢ² + ε·Σ_{i<j} xᵢxⱼ`.
    pub fn coupled(m: usize, epsilon: f64) -> Self {
        Self {
            a: DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { epsilon }),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

impl MeanFunction for Quadratic {
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.a * x))
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x
    }
    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }
}

/// `f(x₀, x₁, x₂) = x₀ + 1/(x₂ − x₁)` on `W = {x₂ > x₁}`.
#[derive(Debug, Clone, Copy)]
pub struct HeliumMean;

impl MeanFunction for HeliumMean {
    fn dim(&self) -> usize {
        3
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        x[0] + 1.0 / (x[2] - x[1])
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let s2 = (x[2] - x[1]).powi(2);
        DVector::from_vec(vec![1.0, 1.0 / s2, -1.0 / s2])
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let c = 2.0 / (x[2] - x[1]).powi(3);
        #[rustfmt::skip]
        let h = DMatrix::from_row_slice(3, 3, &[
            0.0, 0.0, 0.0,
            0.0, c, -c,
            0.0, -c, c,
        ]);
        h
    }
    fn in_domain(&self, x: &DVector<f64>) -> bool {
        x[2] > x[1]
    }
}

/// `f(x₁, x₂) = (x₂ − 8)/(8x₁)` on `W = (ℝ∖{0}) × ℝ`.
#[derive(Debug, Clone, Copy)]
pub struct BovMean;

impl MeanFunction for BovMean {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (x[1] - 8.0) / (8.0 * x[0])
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![
            -(x[1] - 8.0) / (8.0 * x[0] * x[0]),
            1.0 / (8.0 * x[0]),
        ])
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let off = -1.0 / (8.0 * x[0] * x[0]);
        DMatrix::from_row_slice(2, 2, &[(x[1] - 8.0) / (4.0 * x[0].powi(3)), off, off, 0.0])
    }
    fn in_domain(&self, x: &DVector<f64>) -> bool {
        x[0] != 0.0 && x[0].is_finite() && x[1].is_finite()
    }
}

pub fn example1_pair(c: f64) -> PairSpec {
    PairSpec::new(
        "example1-linear",
        Arc::new(Harmonic::new(1)),
        Arc::new(Linear::new(vec![c])),
    )
    .expect("dims agree")
}

pub fn example2_pair() -> PairSpec {
    PairSpec::new(
        "example2-harmonic",
        Arc::new(Harmonic::new(1)),
        Arc::new(Quadratic::half_square()),
    )
    .expect("dims agree")
}

pub fn example3_pair(mu: f64) -> PairSpec {
    PairSpec::new(
        "example3-helium",
        Arc::new(Helium { mu }),
        Arc::new(HeliumMean),
    )
    .expect("dims agree")
}

pub fn example4_pair() -> PairSpec {
    PairSpec::new("example4-bov", Arc::new(Bov), Arc::new(BovMean)).expect("dims agree")
}

pub fn example5_pair(epsilon: f64) -> PairSpec {
    let osc = example2_pair();
    product_pair(
        &[osc.clone(), osc],
        Arc::new(Quadratic::coupled(2, epsilon)),
        "example5-coupled-oscillators",
    )
    .expect("two scalar factors")
}

/// `H(x) = x` with `f = 0`; used for quadrature checks of the mean.
pub fn coordinate_pair(n: usize) -> PairSpec {
    let phase = PhaseSpace::new(n.max(1)).expect("n >= 1");
    PairSpec::new(
        "coordinates",
        Arc::new(Coordinates { phase }),
        Arc::new(Linear::new(vec![0.0; phase.dim()])),
    )
    .expect("dims agree")
}

/// Circle radius of the `k`-th circular solution of the BOV system.
pub fn bov_radius(k: u32) -> f64 {
    (16.0 * PI * PI * (k as f64).powi(2)).powf(-1.0 / 6.0)
}

/// A registered system together with the starting data of its solve.
#[derive(Debug, Clone)]
pub struct System {
    pub pair: PairSpec,
    pub mu0: DVector<f64>,
    pub guess: DVector<f64>,
    /// Evaluation-only systems have no solver seed.
    pub solvable: bool,
    pub params: BTreeMap<String, f64>,
    /// RK4 steps per grid interval that the registry recommends.
    pub substeps: usize,
}

pub const SYSTEM_NAMES: [&str; 5] = [
    "example1-linear",
    "example2-harmonic",
    "example3-helium",
    "example4-bov",
    "example5-coupled-oscillators",
];

struct Params<'a> {
    name: &'a str,
    given: &'a BTreeMap<String, f64>,
    used: BTreeMap<String, f64>,
}

impl<'a> Params<'a> {
    fn get(&mut self, key: &str, default: f64) -> f64 {
        let v = self.given.get(key).copied().unwrap_or(default);
        self.used.insert(key.to_string(), v);
        v
    }

    fn winding(&mut self, key: &str) -> Result<u32> {
        let v = self.get(key, 1.0);
        if v < 1.0 || v.fract() != 0.0 || v > 1e6 {
            return Err(Error::InvalidArgument(format!(
                "{}: {key} must be a positive integer, got {v}",
                self.name
            )));
        }
        Ok(v as u32)
    }

    fn finish(self) -> Result<BTreeMap<String, f64>> {
        if let Some(extra) = self.given.keys().find(|k| !self.used.contains_key(*k)) {
            return Err(Error::InvalidArgument(format!(
                "{}: unknown parameter {extra:?}",
                self.name
            )));
        }
        Ok(self.used)
    }
}

/// Look up a built-in system by name; unknown names or parameters are
/// invalid-argument errors.
pub fn build_system(name: &str, params: &BTreeMap<String, f64>) -> Result<System> {
    let mut p = Params {
        name,
        given: params,
        used: BTreeMap::new(),
    };
    let v = |xs: &[f64]| DVector::from_vec(xs.to_vec());
    let system = match name {
        "example1-linear" => {
            let c = p.get("c", 1.0);
            let amp = p.get("amplitude", 0.5);
            System {
                pair: example1_pair(c),
                mu0: v(&[0.5 * amp * amp]),
                guess: v(&[amp, 0.0]),
                solvable: true,
                params: BTreeMap::new(),
                substeps: 4,
            }
        }
        "example2-harmonic" => {
            let k = p.winding("k")? as f64;
            // start 5% below the branch energy on the q-axis
            let mu0 = p.get("mu0", 0.95 * 2.0 * PI * k);
            System {
                pair: example2_pair(),
                mu0: v(&[mu0]),
                guess: v(&[(2.0 * mu0).sqrt(), 0.0]),
                solvable: true,
                params: BTreeMap::new(),
                // the orbit turns k times at angular speed 2πk
                substeps: 4 * (k * k) as usize,
            }
        }
        "example3-helium" => {
            let mu = p.get("mu", 2.0);
            if mu <= 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "example3-helium: mu must exceed 1, got {mu}"
                )));
            }
            System {
                pair: example3_pair(mu),
                mu0: v(&[0.0, 1.0, 2.0]),
                guess: v(&[1.0, 2.0, 0.0, 0.0]),
                solvable: false,
                params: BTreeMap::new(),
                substeps: 4,
            }
        }
        "example4-bov" => {
            let k = p.winding("k")?;
            let r = bov_radius(k);
            // ż = −w/(4|z|²) on the circle z = R e^{2πikt} gives w = −8πik R³ e^{2πikt}
            let w = 8.0 * PI * k as f64 * r.powi(3);
            System {
                pair: example4_pair(),
                mu0: v(&[r * r, 4.0]),
                guess: v(&[r, 0.0, 0.0, -w]),
                solvable: true,
                params: BTreeMap::new(),
                substeps: 32 * k as usize,
            }
        }
        "example5-coupled-oscillators" => {
            let eps = p.get("epsilon", 0.1);
            let k1 = p.winding("k1")? as f64;
            let k2 = p.winding("k2")? as f64;
            // uncoupled energies as the starting mean
            let mu0 = v(&[2.0 * PI * k1, 2.0 * PI * k2]);
            let guess = v(&[(2.0 * mu0[0]).sqrt(), (2.0 * mu0[1]).sqrt(), 0.0, 0.0]);
            System {
                pair: example5_pair(eps),
                mu0,
                guess,
                solvable: true,
                params: BTreeMap::new(),
                substeps: 4 * (k1.max(k2) * k1.max(k2)) as usize,
            }
        }
        other => return Err(Error::InvalidArgument(format!("unknown system {other:?}"))),
    };
    let params = p.finish()?;
    Ok(System { params, ..system })
}
