//! Uniform grids on the unit circle and sampled loops / vector fields.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, FourierSeries};

pub const MIN_GRID: usize = 8;

/// Equispaced nodes `t_k = k/N` on `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    n: usize,
}

impl TimeGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_GRID {
            return Err(Error::InvalidArgument(format!(
                "grid size {n} below minimum {MIN_GRID}"
            )));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 / self.n as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    pub fn doubled(&self) -> Self {
        Self { n: 2 * self.n }
    }

    /// Periodic rectangle rule for `∫₀¹`; exact for constants and for
    /// trigonometric polynomials of degree below `N`.
    pub fn quadrature(&self, samples: &[f64]) -> f64 {
        debug_assert_eq!(samples.len(), self.n);
        samples.iter().sum::<f64>() / self.n as f64
    }

    /// Componentwise rectangle rule for vector-valued samples.
    pub fn quadrature_vec(&self, samples: &[DVector<f64>]) -> DVector<f64> {
        let mut acc = DVector::zeros(samples.first().map_or(0, |s| s.len()));
        for s in samples {
            acc += s;
        }
        acc / self.n as f64
    }

    /// Trapezoid partial integrals `∫₀^{t_k}` for `k = 0..=N`, where
    /// `samples` holds the `N` periodic values and the endpoint wraps.
    pub fn cumulative_trapezoid(&self, samples: &[f64]) -> Vec<f64> {
        let h = self.step();
        let mut out = Vec::with_capacity(self.n + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for k in 0..self.n {
            let next = samples[(k + 1) % self.n];
            acc += 0.5 * h * (samples[k] + next);
            out.push(acc);
        }
        out
    }
}

fn check_samples(grid: &TimeGrid, samples: &[DVector<f64>]) -> Result<usize> {
    if samples.len() != grid.len() {
        return Err(Error::InvalidArgument(format!(
            "{} samples on a grid of size {}",
            samples.len(),
            grid.len()
        )));
    }
    let dim = samples[0].len();
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "sample dimension {dim} is not even and positive"
        )));
    }
    for (k, s) in samples.iter().enumerate() {
        if s.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "sample {k} has dimension {} != {dim}",
                s.len()
            )));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample {k} is not finite")));
        }
    }
    Ok(dim)
}

fn component(samples: &[DVector<f64>], i: usize) -> Vec<f64> {
    samples.iter().map(|s| s[i]).collect()
}

fn from_components(columns: &[Vec<f64>]) -> Vec<DVector<f64>> {
    let len = columns[0].len();
    (0..len)
        .map(|k| DVector::from_iterator(columns.len(), columns.iter().map(|c| c[k])))
        .collect()
}

/// A closed loop `u: ℝ/ℤ → ℝ²ⁿ` sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Loop {
    grid: TimeGrid,
    samples: Vec<DVector<f64>>,
}

impl Loop {
    pub fn new(grid: TimeGrid, samples: Vec<DVector<f64>>) -> Result<Self> {
        check_samples(&grid, &samples)?;
        Ok(Self { grid, samples })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> DVector<f64>) -> Result<Self> {
        let samples = grid.nodes().into_iter().map(f).collect();
        Self::new(grid, samples)
    }

    pub fn constant(grid: TimeGrid, x: DVector<f64>) -> Result<Self> {
        Self::new(grid, vec![x; grid.len()])
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        component(&self.samples, i)
    }

    /// Spectral derivative `u̇(t_k)`.
    pub fn derivative(&self) -> Vec<DVector<f64>> {
        let cols: Vec<Vec<f64>> = (0..self.dim())
            .map(|i| spectral::derivative(&self.component(i)))
            .collect();
        from_components(&cols)
    }

    /// One trigonometric interpolant per coordinate.
    pub fn interpolant(&self) -> LoopInterpolant {
        LoopInterpolant {
            series: (0..self.dim())
                .map(|i| FourierSeries::from_samples(&self.component(i)))
                .collect(),
        }
    }

    /// Band-limited resampling onto another grid.
    pub fn resample(&self, grid: TimeGrid) -> Result<Self> {
        let interp = self.interpolant();
        Self::from_fn(grid, |t| interp.eval(t))
    }

    /// Pointwise `u + s·v`.
    pub fn perturbed(&self, direction: &FieldAlongLoop, s: f64) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .zip(direction.samples())
            .map(|(u, v)| u + v * s)
            .collect();
        Self::new(self.grid, samples)
    }
}

/// Trigonometric interpolant of a sampled loop, evaluable at any time.
#[derive(Debug, Clone)]
pub struct LoopInterpolant {
    series: Vec<FourierSeries>,
}

impl LoopInterpolant {
    pub fn eval(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(self.series.len(), self.series.iter().map(|s| s.eval(t)))
    }

    pub fn eval_derivative(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.series.len(),
            self.series.iter().map(|s| s.eval_derivative(t)),
        )
    }
}

/// A vector field `ξ(t_k) ∈ ℝ²ⁿ` along a loop or path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldAlongLoop {
    grid: TimeGrid,
    samples: Vec<DVector<f64>>,
}

impl FieldAlongLoop {
    pub fn new(grid: TimeGrid, samples: Vec<DVector<f64>>) -> Result<Self> {
        check_samples(&grid, &samples)?;
        Ok(Self { grid, samples })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> DVector<f64>) -> Result<Self> {
        let samples = grid.nodes().into_iter().map(f).collect();
        Self::new(grid, samples)
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Result<Self> {
        Self::new(grid, vec![DVector::zeros(dim); grid.len()])
    }

    /// Rebuild from a node-major flat vector (`index = k·dim + i`).
    pub fn from_flat(grid: TimeGrid, dim: usize, flat: &DVector<f64>) -> Result<Self> {
        if flat.len() != grid.len() * dim {
            return Err(Error::InvalidArgument(format!(
                "flat length {} != {} x {dim}",
                flat.len(),
                grid.len()
            )));
        }
        let samples = (0..grid.len())
            .map(|k| flat.rows(k * dim, dim).into_owned())
            .collect();
        Self::new(grid, samples)
    }

    pub fn to_flat(&self) -> DVector<f64> {
        let dim = self.dim();
        let mut out = DVector::zeros(self.samples.len() * dim);
        for (k, s) in self.samples.iter().enumerate() {
            out.rows_mut(k * dim, dim).copy_from(s);
        }
        out
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        component(&self.samples, i)
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().map(|s| s.amax()).fold(0.0, f64::max)
    }

    /// Discrete `L²(0,1)` norm by the rectangle rule.
    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.samples.iter().map(|s| s.norm_squared()).collect();
        self.grid.quadrature(&sq).sqrt()
    }

    /// Discrete `L²` inner product by the rectangle rule.
    pub fn l2_dot(&self, other: &FieldAlongLoop) -> f64 {
        let prods: Vec<f64> = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.dot(b))
            .collect();
        self.grid.quadrature(&prods)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_guard() {
        assert!(TimeGrid::new(7).is_err());
        assert_eq!(TimeGrid::new(8).unwrap().len(), 8);
    }

    #[test]
    fn quadrature_examples() {
        let g = TimeGrid::new(64).unwrap();
        assert_eq!(g.quadrature(&vec![1.0; 64]), 1.0);
        assert_eq!(g.quadrature(&vec![-2.5; 64]), -2.5);
        let s: Vec<f64> = g.nodes().iter().map(|t| (2.0 * PI * t).sin()).collect();
        assert!(g.quadrature(&s).abs() < 1e-12);
        let s2: Vec<f64> = g
            .nodes()
            .iter()
            .map(|t| (2.0 * PI * t).sin().powi(2))
            .collect();
        assert!((g.quadrature(&s2) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cumulative_trapezoid_endpoints() {
        let g = TimeGrid::new(32).unwrap();
        let s: Vec<f64> = g
            .nodes()
            .iter()
            .map(|t| 1.0 + 0.5 * (2.0 * PI * t).cos())
            .collect();
        let c = g.cumulative_trapezoid(&s);
        assert_eq!(c[0], 0.0);
        assert!((c[32] - 1.0).abs() < 1e-14);
        assert!(c.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn loop_validation() {
        let g = TimeGrid::new(8).unwrap();
        assert!(Loop::new(g, vec![DVector::zeros(2); 7]).is_err());
        assert!(Loop::new(g, vec![DVector::zeros(3); 8]).is_err());
        let mut bad = vec![DVector::zeros(2); 8];
        bad[3][1] = f64::NAN;
        assert!(Loop::new(g, bad).is_err());
    }

    #[test]
    fn loop_derivative_and_resample() {
        let g = TimeGrid::new(32).unwrap();
        let u = Loop::from_fn(g, |t| {
            DVector::from_vec(vec![(2.0 * PI * t).cos(), (2.0 * PI * t).sin()])
        })
        .unwrap();
        let du = u.derivative();
        for (k, d) in du.iter().enumerate() {
            let t = g.node(k);
            assert!((d[0] + 2.0 * PI * (2.0 * PI * t).sin()).abs() < 1e-12);
            assert!((d[1] - 2.0 * PI * (2.0 * PI * t).cos()).abs() < 1e-12);
        }
        let fine = u.resample(TimeGrid::new(100).unwrap()).unwrap();
        for (k, s) in fine.samples().iter().enumerate() {
            let t = k as f64 / 100.0;
            assert!((s[0] - (2.0 * PI * t).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn flat_round_trip() {
        let g = TimeGrid::new(8).unwrap();
        let f =
            FieldAlongLoop::from_fn(g, |t| DVector::from_vec(vec![t, 2.0 * t, 3.0, -t])).unwrap();
        let back = FieldAlongLoop::from_flat(g, 4, &f.to_flat()).unwrap();
        assert_eq!(f, back);
        assert!((f.l2_dot(&f) - f.l2_norm().powi(2)).abs() < 1e-14);
    }
}
