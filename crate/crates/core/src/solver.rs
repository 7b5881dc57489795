//! Critical points of the action: 1-periodic orbits of the frozen field
//! `X_{df(μ)·H}` whose mean value reproduces `μ`.
//!
//! The self-consistency `μ = H̄(u)` and the periodicity `φ¹(x₀) = x₀` are
//! solved together by a damped Gauss–Newton iteration in `(x₀, μ)`. A pure
//! fixed-point iteration on `μ` does not work: for a non-resonant frozen
//! `μ` the only 1-periodic orbits are equilibria, so the iteration collapses
//! onto them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{integrate_flow, variational_flow};
use crate::grid::{FieldAlongLoop, Loop, TimeGrid};
use crate::kepler::{bov_residual, PlanarLoop};
use crate::pair::{MeanValue, PairSpec};
use crate::systems::{self, bov_radius};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub grid: usize,
    /// On `‖φ¹(x₀) − x₀‖∞`.
    pub inner_tol: f64,
    /// On `‖H̄(u) − μ‖∞`.
    pub outer_tol: f64,
    /// Backtracking factor of the line search, in `(0, 1]`.
    pub damping: f64,
    pub max_outer: usize,
    /// Newton iterations of [`periodic_orbit`].
    pub max_inner: usize,
    /// RK4 steps per grid interval.
    pub substeps: usize,
    /// Acceptance threshold on the spectral critical residual.
    pub critical_tol: f64,
    pub mu0: Option<Vec<f64>>,
    pub guess: Option<Vec<f64>>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            grid: 256,
            inner_tol: 1e-10,
            outer_tol: 1e-10,
            damping: 0.5,
            max_outer: 200,
            max_inner: 50,
            substeps: 4,
            critical_tol: 1e-8,
            mu0: None,
            guess: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "damping {} outside (0, 1]",
                self.damping
            )));
        }
        if self.substeps == 0 || self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidArgument(
                "step and iteration counts must be positive".into(),
            ));
        }
        TimeGrid::new(self.grid)?;
        Ok(())
    }

    fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid)
    }
}

/// A validated numerical critical point.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub pair: PairSpec,
    pub loop_: Loop,
    pub mean: MeanValue,
    pub residual_norm: f64,
    /// `df(H̄(u))`.
    pub covector: DVector<f64>,
    pub iterations: usize,
    pub mean_history: Vec<Vec<f64>>,
}

impl CriticalPoint {
    /// Validate an externally supplied loop.
    pub fn from_loop(pair: &PairSpec, u: Loop, tol: f64) -> Result<Self> {
        let residual_norm = pair.critical_residual(&u)?.sup_norm();
        if !(residual_norm <= tol) {
            return Err(Error::Precondition(format!(
                "loop is not critical: residual {residual_norm:.3e} > {tol:.1e}"
            )));
        }
        let mean = pair.mean_value(&u);
        let covector = pair.mean_function().gradient(&mean.value);
        Ok(Self {
            pair: pair.clone(),
            loop_: u,
            mean,
            residual_norm,
            covector,
            iterations: 0,
            mean_history: vec![],
        })
    }

    /// Mean Euclidean norm of the samples of coordinates `idx`.
    pub fn mean_radius(&self, idx: &[usize]) -> f64 {
        let r: Vec<f64> = self
            .loop_
            .samples()
            .iter()
            .map(|x| idx.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt())
            .collect();
        self.loop_.grid().quadrature(&r)
    }

    pub fn action(&self) -> Result<f64> {
        self.pair.action(&self.loop_)
    }

    /// Largest central difference `(𝒜(u + sv) − 𝒜(u − sv))/2s` over random
    /// smooth directions `v` of unit sup norm. Vanishes at a critical point
    /// up to the residual and `O(s²)`.
    pub fn action_gradient_probe(&self, directions: usize, seed: u64) -> Result<ActionProbe> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        const MODES: usize = 4;
        const STEP: f64 = 1e-5;
        let grid = self.loop_.grid();
        let d = self.loop_.dim();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut derivatives = Vec::with_capacity(directions);
        for _ in 0..directions {
            let coeffs: Vec<DVector<f64>> = (0..2 * MODES + 1)
                .map(|_| DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng)))
                .collect();
            let v = FieldAlongLoop::from_fn(grid, |t| {
                let mut y = coeffs[0].clone();
                for k in 1..=MODES {
                    let w = 2.0 * std::f64::consts::PI * k as f64 * t;
                    y += (&coeffs[2 * k - 1] * w.cos() + &coeffs[2 * k] * w.sin()) / k as f64;
                }
                y
            })?;
            let scale = v.sup_norm();
            let v = FieldAlongLoop::new(grid, v.samples().iter().map(|x| x / scale).collect())?;
            let plus = self.pair.action(&self.loop_.perturbed(&v, STEP)?)?;
            let minus = self.pair.action(&self.loop_.perturbed(&v, -STEP)?)?;
            derivatives.push((plus - minus) / (2.0 * STEP));
        }
        let max_abs = derivatives.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Ok(ActionProbe {
            step: STEP,
            derivatives,
            max_abs,
        })
    }
}

/// Finite-difference directional derivatives of the action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProbe {
    pub step: f64,
    pub derivatives: Vec<f64>,
    pub max_abs: f64,
}

fn sup(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Integrate `x0` over one period and keep the node samples.
fn orbit_on_grid<F>(field: F, x0: &DVector<f64>, grid: TimeGrid, substeps: usize) -> Result<Loop>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let traj = integrate_flow(
        |_, x: &DVector<f64>| field(x),
        x0,
        0.0,
        1.0,
        grid.len() * substeps,
    )?;
    Loop::new(
        grid,
        traj.into_iter()
            .step_by(substeps)
            .take(grid.len())
            .collect(),
    )
}

/// RK4 slightly damps and detunes rotations, so the discrete time-1 map
/// keeps a residual floor well above roundoff. A stalled Newton iteration
/// whose residual is within this factor of the tolerance is accepted; the
/// critical residual check decides afterwards.
pub const STAGNATION_FACTOR: f64 = 100.0;

/// At the floor, an accepted step that does not halve the residual ends
/// the iteration.
const STALL_RATIO: f64 = 0.5;

/// Relative cutoff of the least-squares solve. Directions that the
/// integrator leaves only slightly non-degenerate are treated as null.
const LSTSQ_RCOND: f64 = 1e-8;

/// Least-squares minimum-norm solve `Mδ = b`.
fn lstsq(m: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = m.svd(true, true);
    let eps = LSTSQ_RCOND * svd.singular_values.max().max(1e-300);
    svd.solve(b, eps)
        .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))
}

/// Newton on `φ¹(x) − x = 0` for an autonomous field, with a phase
/// condition against the field direction at the guess.
pub fn periodic_orbit<F, G>(
    field: F,
    jacobian: G,
    guess: &DVector<f64>,
    config: &SolveConfig,
) -> Result<Loop>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    G: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    config.validate()?;
    let grid = config.time_grid()?;
    let steps = grid.len() * config.substeps;
    let d = guess.len();
    let v = field(guess);
    let v_hat = if v.norm() > 0.0 {
        Some(&v / v.norm())
    } else {
        None
    };
    let residual = |x: &DVector<f64>| -> Result<(DVector<f64>, DMatrix<f64>)> {
        let flow = variational_flow(&field, &jacobian, x, 1.0, steps)?;
        let f = flow.states.last().expect("nonempty") - x;
        let jm = flow.psi.last().expect("nonempty") - DMatrix::identity(d, d);
        Ok((f, jm))
    };
    let mut x = guess.clone();
    let (mut f, mut jm) = residual(&x)?;
    for iter in 0..config.max_inner {
        if sup(&f) <= config.inner_tol {
            return orbit_on_grid(&field, &x, grid, config.substeps);
        }
        let rows = d + usize::from(v_hat.is_some());
        let mut m = DMatrix::zeros(rows, d);
        let mut b = DVector::zeros(rows);
        m.rows_mut(0, d).copy_from(&jm);
        b.rows_mut(0, d).copy_from(&(-&f));
        if let Some(vh) = &v_hat {
            m.row_mut(d).copy_from(&vh.transpose());
            b[d] = -vh.dot(&(&x - guess));
        }
        let delta = lstsq(m, &b)?;
        let stalled = sup(&f) <= STAGNATION_FACTOR * config.inner_tol;
        if stalled && delta.amax() <= config.inner_tol {
            return orbit_on_grid(&field, &x, grid, config.substeps);
        }
        let mut lambda = 1.0;
        loop {
            let trial = &x + &delta * lambda;
            match residual(&trial) {
                Ok((ft, jt)) if ft.norm() < f.norm() => {
                    let slow = ft.norm() > STALL_RATIO * f.norm();
                    x = trial;
                    f = ft;
                    jm = jt;
                    if stalled && slow {
                        return orbit_on_grid(&field, &x, grid, config.substeps);
                    }
                    break;
                }
                _ => {
                    lambda *= config.damping.min(0.5);
                    if lambda < 1e-8 && stalled {
                        return orbit_on_grid(&field, &x, grid, config.substeps);
                    }
                    if lambda < 1e-8 {
                        return Err(Error::SolverFailure {
                            iterations: iter + 1,
                            residual: sup(&f),
                            reason: "line search found no decrease of the time-1 residual".into(),
                            mean_history: vec![],
                        });
                    }
                }
            }
        }
    }
    if sup(&f) <= config.inner_tol {
        return orbit_on_grid(&field, &x, grid, config.substeps);
    }
    Err(Error::SolverFailure {
        iterations: config.max_inner,
        residual: sup(&f),
        reason: "periodic orbit did not converge".into(),
        mean_history: vec![],
    })
}

struct Evaluation {
    residual: DVector<f64>,
    jacobian: DMatrix<f64>,
    r1: f64,
    r2: f64,
}

/// Residual and Jacobian of the coupled system in `(x₀, μ)`.
fn evaluate(
    pair: &PairSpec,
    x0: &DVector<f64>,
    mu: &DVector<f64>,
    phase: Option<(&DVector<f64>, &DVector<f64>)>,
    grid: TimeGrid,
    substeps: usize,
) -> Result<Evaluation> {
    let d = x0.len();
    let m = mu.len();
    let f = pair.mean_function();
    let h = pair.hamiltonian();
    let c = f.gradient(mu);
    let a = f.hessian(mu);
    let jmat = pair.phase().j_matrix();
    // state: x (d), Ψ (d×d), Z (d×m), all column-major
    let size = d + d * d + d * m;
    let rhs = |_t: f64, y: &DVector<f64>| {
        let x = y.rows(0, d).into_owned();
        let dx = pair.field_jacobian(&c, &x);
        let psi = DMatrix::from_column_slice(d, d, &y.as_slice()[d..d + d * d]);
        let z = DMatrix::from_column_slice(d, m, &y.as_slice()[d + d * d..]);
        let grads = h.gradient(&x);
        let mut out = DVector::zeros(size);
        out.rows_mut(0, d).copy_from(&pair.vector_field(&c, &x));
        out.rows_mut(d, d * d)
            .copy_from_slice((&dx * psi).as_slice());
        let dz = &dx * z + &jmat * grads.transpose();
        out.rows_mut(d + d * d, d * m)
            .copy_from_slice(dz.as_slice());
        out
    };
    let mut y0 = DVector::zeros(size);
    y0.rows_mut(0, d).copy_from(x0);
    for i in 0..d {
        y0[d + i * d + i] = 1.0;
    }
    let n = grid.len();
    let traj = integrate_flow(rhs, &y0, 0.0, 1.0, n * substeps)?;
    let split = |y: &DVector<f64>| {
        (
            y.rows(0, d).into_owned(),
            DMatrix::from_column_slice(d, d, &y.as_slice()[d..d + d * d]),
            DMatrix::from_column_slice(d, m, &y.as_slice()[d + d * d..]),
        )
    };
    let mut mean = DVector::zeros(m);
    let mut dmean_dx = DMatrix::zeros(m, d);
    let mut dmean_dc = DMatrix::zeros(m, m);
    for y in traj.iter().step_by(substeps).take(n) {
        let (x, psi, z) = split(y);
        let g = h.gradient(&x);
        mean += h.value(&x);
        dmean_dx += &g * psi;
        dmean_dc += &g * z;
    }
    let inv = 1.0 / n as f64;
    mean *= inv;
    dmean_dx *= inv;
    dmean_dc *= inv;
    let (x1, psi1, z1) = split(traj.last().expect("nonempty"));

    let rows = d + m + usize::from(phase.is_some());
    let mut residual = DVector::zeros(rows);
    let mut jac = DMatrix::zeros(rows, d + m);
    let r1 = &x1 - x0;
    let r2 = &mean - mu;
    residual.rows_mut(0, d).copy_from(&r1);
    residual.rows_mut(d, m).copy_from(&r2);
    jac.view_mut((0, 0), (d, d))
        .copy_from(&(psi1 - DMatrix::identity(d, d)));
    jac.view_mut((0, d), (d, m)).copy_from(&(z1 * &a));
    jac.view_mut((d, 0), (m, d)).copy_from(&dmean_dx);
    jac.view_mut((d, d), (m, m))
        .copy_from(&(dmean_dc * &a - DMatrix::identity(m, m)));
    if let Some((guess, v_hat)) = phase {
        residual[d + m] = v_hat.dot(&(x0 - guess));
        jac.view_mut((d + m, 0), (1, d))
            .copy_from(&v_hat.transpose());
    }
    Ok(Evaluation {
        r1: sup(&r1),
        r2: sup(&r2),
        residual,
        jacobian: jac,
    })
}

fn domain_exit(mu: &DVector<f64>, history: &[Vec<f64>]) -> Error {
    Error::Domain(format!(
        "mean {:?} left W; trace {:?}",
        mu.as_slice(),
        history
    ))
}

/// Solve `u̇ = Σ c_i J∇H_i(u)`, `c = df(H̄(u))` for a loop `u`.
pub fn self_consistent_solve(pair: &PairSpec, config: &SolveConfig) -> Result<CriticalPoint> {
    config.validate()?;
    let grid = config.time_grid()?;
    let d = pair.phase().dim();
    let m = pair.m();
    let mu0 = DVector::from_vec(
        config
            .mu0
            .clone()
            .ok_or_else(|| Error::InvalidArgument("solve needs an initial mean mu0".into()))?,
    );
    let guess = DVector::from_vec(
        config
            .guess
            .clone()
            .ok_or_else(|| Error::InvalidArgument("solve needs an initial point guess".into()))?,
    );
    if mu0.len() != m || guess.len() != d {
        return Err(Error::InvalidArgument(format!(
            "mu0 has length {} (expected {m}), guess has length {} (expected {d})",
            mu0.len(),
            guess.len()
        )));
    }
    let f = pair.mean_function();
    if !f.in_domain(&mu0) {
        return Err(Error::InvalidArgument(format!(
            "mu0 {:?} is not in W",
            mu0.as_slice()
        )));
    }
    let v = pair.vector_field(&f.gradient(&mu0), &guess);
    let v_hat = (v.norm() > 0.0).then(|| &v / v.norm());
    let phase = v_hat.as_ref().map(|vh| (&guess, vh));

    let mut x0 = guess.clone();
    let mut mu = mu0;
    let mut history = vec![mu.as_slice().to_vec()];
    let mut eval = evaluate(pair, &x0, &mu, phase, grid, config.substeps)?;
    let mut iterations = 0;
    'newton: while !(eval.r1 <= config.inner_tol && eval.r2 <= config.outer_tol) {
        if iterations >= config.max_outer {
            return Err(Error::SolverFailure {
                iterations,
                residual: eval.r1.max(eval.r2),
                reason: "self-consistent iteration did not converge".into(),
                mean_history: history,
            });
        }
        iterations += 1;
        let delta = lstsq(eval.jacobian.clone(), &(-&eval.residual))?;
        let stalled = eval.r1 <= STAGNATION_FACTOR * config.inner_tol
            && eval.r2 <= STAGNATION_FACTOR * config.outer_tol;
        if stalled
            && delta.rows(0, d).amax() <= config.inner_tol
            && delta.rows(d, m).amax() <= config.outer_tol
        {
            break;
        }
        let mut lambda = 1.0;
        loop {
            let x_trial = &x0 + delta.rows(0, d) * lambda;
            let mu_trial = &mu + delta.rows(d, m) * lambda;
            if !f.in_domain(&mu_trial) {
                history.push(mu_trial.as_slice().to_vec());
                return Err(domain_exit(&mu_trial, &history));
            }
            match evaluate(pair, &x_trial, &mu_trial, phase, grid, config.substeps) {
                Ok(e) if e.residual.norm() < eval.residual.norm() => {
                    let slow = e.residual.norm() > STALL_RATIO * eval.residual.norm();
                    x0 = x_trial;
                    mu = mu_trial;
                    eval = e;
                    history.push(mu.as_slice().to_vec());
                    log::debug!(
                        "iteration {iterations}: R1 = {:.3e}, R2 = {:.3e}",
                        eval.r1,
                        eval.r2
                    );
                    if stalled && slow {
                        break 'newton;
                    }
                    break;
                }
                _ => {
                    lambda *= config.damping;
                    if lambda < 1e-8 && stalled {
                        break 'newton;
                    }
                    if lambda < 1e-8 {
                        return Err(Error::SolverFailure {
                            iterations,
                            residual: eval.r1.max(eval.r2),
                            reason: "line search found no decrease of the residual".into(),
                            mean_history: history,
                        });
                    }
                }
            }
        }
    }

    let c = f.gradient(&mu);
    let u = orbit_on_grid(|x| pair.vector_field(&c, x), &x0, grid, config.substeps)?;
    let mean = pair.mean_value(&u);
    if !mean.in_domain {
        return Err(domain_exit(&mean.value, &history));
    }
    let residual_norm = pair.critical_residual(&u)?.sup_norm();
    if !(residual_norm <= config.critical_tol) {
        return Err(Error::SolverFailure {
            iterations,
            residual: residual_norm,
            reason: format!(
                "converged loop fails the critical residual check ({:.1e})",
                config.critical_tol
            ),
            mean_history: history,
        });
    }
    let covector = f.gradient(&mean.value);
    Ok(CriticalPoint {
        pair: pair.clone(),
        loop_: u,
        mean,
        residual_norm,
        covector,
        iterations,
        mean_history: history,
    })
}

/// Circular solution of the BOV system, with both residual forms.
#[derive(Debug, Clone)]
pub struct BovSolution {
    pub critical_point: CriticalPoint,
    pub k: u32,
    /// `√(∫|z|²)`.
    pub radius: f64,
    pub first_order_residual: f64,
    pub second_order_residual: f64,
    pub z: PlanarLoop,
}

/// Seed the circular ansatz of winding `k` and polish it with the general
/// solver on the Example 4 pair.
pub fn bov_solve(k: u32, config: &SolveConfig) -> Result<BovSolution> {
    if k == 0 {
        return Err(Error::InvalidArgument("winding number must be >= 1".into()));
    }
    let params = std::collections::BTreeMap::from([("k".to_string(), k as f64)]);
    let system = systems::build_system("example4-bov", &params)?;
    let mut cfg = config.clone();
    cfg.mu0
        .get_or_insert_with(|| system.mu0.as_slice().to_vec());
    cfg.guess
        .get_or_insert_with(|| system.guess.as_slice().to_vec());
    // the second-order residual differentiates the RK4 samples twice
    cfg.substeps = cfg.substeps.max(system.substeps);
    let cp = self_consistent_solve(&system.pair, &cfg)?;
    let z = PlanarLoop::from_loop(&cp.loop_, 0, 1)?;
    let second_order_residual = bov_residual(&z).sup_norm();
    let radius = cp.mean.value[0].sqrt();
    debug_assert!((radius - bov_radius(k)).abs() < 1e-3);
    Ok(BovSolution {
        first_order_residual: cp.residual_norm,
        second_order_residual,
        radius,
        z,
        k,
        critical_point: cp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::apply_j;
    use crate::systems::{Linear, Translation};
    use std::collections::BTreeMap;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn cfg(grid: usize) -> SolveConfig {
        SolveConfig {
            grid,
            ..SolveConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(SolveConfig {
            damping: 0.0,
            ..cfg(64)
        }
        .validate()
        .is_err());
        assert!(SolveConfig {
            damping: 1.5,
            ..cfg(64)
        }
        .validate()
        .is_err());
        assert!(cfg(4).validate().is_err());
        assert!(cfg(64).validate().is_ok());
    }

    #[test]
    fn periodic_orbit_examples() {
        let jac = |c: f64| move |_x: &DVector<f64>| crate::symplectic::j_matrix(1) * c;
        // every point is 1-periodic for c = 2π
        let guess = DVector::from_vec(vec![3.5, 0.0]);
        let u = periodic_orbit(
            |x| apply_j(x) * (2.0 * PI),
            jac(2.0 * PI),
            &guess,
            &cfg(256),
        )
        .unwrap();
        assert!((&u.samples()[0] - &guess).norm() < 1e-12);
        assert!((u.samples()[64].norm() - 3.5).abs() < 1e-9);
        // only the origin for c = 1
        let u = periodic_orbit(
            apply_j,
            jac(1.0),
            &DVector::from_vec(vec![0.2, 0.1]),
            &cfg(64),
        )
        .unwrap();
        assert!(u.samples().iter().all(|x| x.norm() < 1e-10));
        // zero field
        let g = DVector::from_vec(vec![0.3, 0.4]);
        let u = periodic_orbit(
            |x: &DVector<f64>| DVector::zeros(x.len()),
            |_| DMatrix::zeros(2, 2),
            &g,
            &cfg(16),
        )
        .unwrap();
        assert!(u.samples().iter().all(|x| *x == g));
    }

    #[test]
    fn periodic_orbit_fails_without_orbits() {
        let err = periodic_orbit(
            |_x: &DVector<f64>| DVector::from_vec(vec![0.0, 1.0]),
            |_| DMatrix::zeros(2, 2),
            &DVector::from_vec(vec![0.0, 0.0]),
            &cfg(16),
        )
        .unwrap_err();
        assert!(matches!(err, Error::SolverFailure { .. }));
    }

    fn system_config(name: &str, params: &[(&str, f64)], grid: usize) -> (PairSpec, SolveConfig) {
        let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let s = systems::build_system(name, &p).unwrap();
        let c = SolveConfig {
            mu0: Some(s.mu0.as_slice().to_vec()),
            guess: Some(s.guess.as_slice().to_vec()),
            ..cfg(grid)
        };
        (s.pair, c)
    }

    #[test]
    fn example2_converges_to_closed_form() {
        let (pair, mut c) = system_config("example2-harmonic", &[], 256);
        c.mu0 = Some(vec![6.0]);
        c.guess = Some(vec![(12.0f64).sqrt(), 0.0]);
        let cp = self_consistent_solve(&pair, &c).unwrap();
        assert!((cp.mean.value[0] - 2.0 * PI).abs() < 1e-8);
        assert!((cp.mean_radius(&[0, 1]) - 2.0 * PI.sqrt()).abs() < 1e-6);
        assert!(cp.residual_norm <= 1e-8);
        let last = cp.mean_history.last().unwrap();
        assert!((cp.mean.value[0] - last[0]).abs() <= 1e-9);
    }

    #[test]
    fn example5_matches_linear_system() {
        let eps = 0.1;
        let (pair, c) = system_config("example5-coupled-oscillators", &[("epsilon", eps)], 128);
        let cp = self_consistent_solve(&pair, &c).unwrap();
        let expected = 2.0 * PI / (1.0 + eps);
        assert!((cp.mean.value[0] - expected).abs() < 1e-8);
        assert!((cp.mean.value[1] - expected).abs() < 1e-8);
        assert!((cp.mean_radius(&[0, 2]) - (2.0 * expected).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn bov_circular_solutions() {
        for (k, grid) in [(1, 256), (1, 512), (2, 512)] {
            let sol = bov_solve(k, &cfg(grid)).unwrap();
            assert!((sol.radius - bov_radius(k)).abs() < 1e-6);
            assert!(sol.first_order_residual <= 1e-8);
            assert!(
                sol.second_order_residual <= 1e-8,
                "{}",
                sol.second_order_residual
            );
            assert!(sol.critical_point.mean.in_domain && sol.critical_point.mean.value[0] > 0.0);
        }
    }

    #[test]
    fn translation_field_has_no_periodic_orbit() {
        let pair = PairSpec::new(
            "translation",
            Arc::new(Translation::new(1)),
            Arc::new(Linear::new(vec![1.0])),
        )
        .unwrap();
        let c = SolveConfig {
            mu0: Some(vec![0.0]),
            guess: Some(vec![0.0, 0.0]),
            ..cfg(32)
        };
        assert!(matches!(
            self_consistent_solve(&pair, &c),
            Err(Error::SolverFailure { .. })
        ));
    }

    #[test]
    fn mu0_outside_domain_is_rejected() {
        let (pair, mut c) = system_config("example4-bov", &[], 64);
        c.mu0 = Some(vec![0.0, 4.0]);
        assert!(self_consistent_solve(&pair, &c).is_err());
    }

    #[test]
    fn solve_is_deterministic() {
        let (pair, c) = system_config("example2-harmonic", &[], 256);
        let a = self_consistent_solve(&pair, &c).unwrap();
        let b = self_consistent_solve(&pair, &c).unwrap();
        assert_eq!(a.loop_, b.loop_);
    }

    #[test]
    fn action_is_stationary() {
        let (pair, c) = system_config("example2-harmonic", &[], 128);
        let cp = self_consistent_solve(&pair, &c).unwrap();
        let probe = cp.action_gradient_probe(20, 3).unwrap();
        assert_eq!(probe.derivatives.len(), 20);
        assert!(probe.max_abs <= 1e-5, "{}", probe.max_abs);
        assert_eq!(probe, cp.action_gradient_probe(20, 3).unwrap());
        // away from the critical point the same probe is far from zero
        let shifted = Loop::new(
            cp.loop_.grid(),
            cp.loop_.samples().iter().map(|x| x * 1.1).collect(),
        )
        .unwrap();
        let off = CriticalPoint {
            loop_: shifted,
            ..cp
        };
        assert!(off.action_gradient_probe(20, 3).unwrap().max_abs > 1e-3);
    }
}
