//! Fixed-step classical Runge–Kutta integration of flows and of their
//! linearizations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One classical RK4 step of `ẋ = f(t, x)`.
pub fn rk4_step<F>(field: &F, t: f64, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = field(t, x);
    let k2 = field(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
    let k3 = field(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
    let k4 = field(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Samples `φ^{t_j}(x0)` at `t_j = t0 + j·(t1 − t0)/steps`, `j = 0..=steps`.
pub fn integrate_flow<F>(
    field: F,
    x0: &DVector<f64>,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Vec<DVector<f64>>>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "flow integration needs at least one step".into(),
        ));
    }
    let h = (t1 - t0) / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    out.push(x.clone());
    for j in 0..steps {
        let t = t0 + j as f64 * h;
        x = rk4_step(&field, t, &x, h);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationBlowup { time: t + h });
        }
        out.push(x.clone());
    }
    Ok(out)
}

/// Solves `Ψ' = A(t)Ψ`, `Ψ(t0) = I` and returns `Ψ` at every step.
pub fn linearized_flow<F>(
    jacobian: F,
    dim: usize,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Vec<DMatrix<f64>>>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let field = |t: f64, y: &DVector<f64>| {
        let psi = DMatrix::from_column_slice(dim, dim, y.as_slice());
        let d = jacobian(t) * psi;
        DVector::from_column_slice(d.as_slice())
    };
    let id = DMatrix::<f64>::identity(dim, dim);
    let states = integrate_flow(
        field,
        &DVector::from_column_slice(id.as_slice()),
        t0,
        t1,
        steps,
    )?;
    Ok(states
        .into_iter()
        .map(|y| DMatrix::from_column_slice(dim, dim, y.as_slice()))
        .collect())
}

/// Trajectory and variational matrices of an autonomous field integrated
/// together: `ẋ = X(x)`, `Ψ' = DX(x)Ψ`.
pub struct VariationalFlow {
    pub states: Vec<DVector<f64>>,
    pub psi: Vec<DMatrix<f64>>,
}

pub fn variational_flow<F, G>(
    field: F,
    jacobian: G,
    x0: &DVector<f64>,
    horizon: f64,
    steps: usize,
) -> Result<VariationalFlow>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    G: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let d = x0.len();
    let augmented = |_t: f64, y: &DVector<f64>| {
        let x = y.rows(0, d).into_owned();
        let psi = DMatrix::from_column_slice(d, d, &y.as_slice()[d..]);
        let mut out = DVector::zeros(d + d * d);
        out.rows_mut(0, d).copy_from(&field(&x));
        let dpsi = jacobian(&x) * psi;
        out.rows_mut(d, d * d).copy_from_slice(dpsi.as_slice());
        out
    };
    let mut y0 = DVector::zeros(d + d * d);
    y0.rows_mut(0, d).copy_from(x0);
    for i in 0..d {
        y0[d + i * d + i] = 1.0;
    }
    let states = integrate_flow(augmented, &y0, 0.0, horizon, steps)?;
    let mut xs = Vec::with_capacity(states.len());
    let mut psi = Vec::with_capacity(states.len());
    for y in states {
        xs.push(y.rows(0, d).into_owned());
        psi.push(DMatrix::from_column_slice(d, d, &y.as_slice()[d..]));
    }
    Ok(VariationalFlow { states: xs, psi })
}
