//! The squaring transform from solutions of the nonlocal second-order
//! equation for `z` to planar Kepler orbits `x = z²∘τ_z`.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldAlongLoop, Loop, TimeGrid};
use crate::spectral::{self, FourierSeries};

/// Samples below this modulus (relative to the largest) count as collisions.
pub const COLLISION_RTOL: f64 = 1e-8;

/// A planar loop `S¹ → ℂ` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarLoop {
    grid: TimeGrid,
    samples: Vec<Complex64>,
}

impl PlanarLoop {
    pub fn new(grid: TimeGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} samples on a grid of size {}",
                samples.len(),
                grid.len()
            )));
        }
        if samples
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidArgument(
                "planar loop has non-finite samples".into(),
            ));
        }
        Ok(Self { grid, samples })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    /// The plane spanned by coordinates `i` and `j` of a phase-space loop.
    pub fn from_loop(u: &Loop, i: usize, j: usize) -> Result<Self> {
        Self::new(
            u.grid(),
            u.samples()
                .iter()
                .map(|x| Complex64::new(x[i], x[j]))
                .collect(),
        )
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn re(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.im).collect()
    }

    pub fn min_modulus(&self) -> f64 {
        self.samples
            .iter()
            .map(|z| z.norm())
            .fold(f64::INFINITY, f64::min)
    }

    fn check_collision_free(&self) -> Result<()> {
        let max = self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let min = self.min_modulus();
        if !(min > COLLISION_RTOL * max.max(f64::MIN_POSITIVE)) {
            return Err(Error::Domain(format!(
                "loop passes through the origin (min |z| = {min:.3e})"
            )));
        }
        Ok(())
    }

    fn derivative(&self) -> Vec<Complex64> {
        zip_complex(
            spectral::derivative(&self.re()),
            spectral::derivative(&self.im()),
        )
    }

    fn second_derivative(&self) -> Vec<Complex64> {
        zip_complex(
            spectral::second_derivative(&self.re()),
            spectral::second_derivative(&self.im()),
        )
    }

    pub fn interpolant(&self) -> PlanarInterpolant {
        PlanarInterpolant {
            re: FourierSeries::from_samples(&self.re()),
            im: FourierSeries::from_samples(&self.im()),
        }
    }

    /// As a field of `ℝ²` vectors.
    pub fn to_field(&self) -> FieldAlongLoop {
        let samples = self
            .samples
            .iter()
            .map(|z| nalgebra::DVector::from_vec(vec![z.re, z.im]))
            .collect();
        FieldAlongLoop::new(self.grid, samples).expect("validated samples")
    }
}

fn zip_complex(re: Vec<f64>, im: Vec<f64>) -> Vec<Complex64> {
    re.into_iter()
        .zip(im)
        .map(|(a, b)| Complex64::new(a, b))
        .collect()
}

pub struct PlanarInterpolant {
    re: FourierSeries,
    im: FourierSeries,
}

impl PlanarInterpolant {
    pub fn eval(&self, t: f64) -> Complex64 {
        Complex64::new(self.re.eval(t), self.im.eval(t))
    }
}

/// `z̈ − (∫|ż|²/∫|z|² − 1/(2(∫|z|²)³))·z`.
pub fn bov_residual(z: &PlanarLoop) -> FieldAlongLoop {
    let g = z.grid();
    let dz = z.derivative();
    let ddz = z.second_derivative();
    let kinetic = g.quadrature(&dz.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>());
    let mass = g.quadrature(&z.samples().iter().map(|v| v.norm_sqr()).collect::<Vec<_>>());
    let coeff = kinetic / mass - 1.0 / (2.0 * mass.powi(3));
    let r = PlanarLoop {
        grid: g,
        samples: ddz
            .iter()
            .zip(z.samples())
            .map(|(a, b)| a - b * coeff)
            .collect(),
    };
    r.to_field()
}

/// `t_z(τ) = ∫₀^τ|z|² / ∫₀¹|z|²` and its inverse `τ_z`.
///
/// The forward map integrates the trigonometric interpolant of `|z|²`
/// exactly; the inverse is a safeguarded Newton iteration on it.
#[derive(Debug, Clone)]
pub struct TimeTransform {
    grid: TimeGrid,
    density: FourierSeries,
    total: f64,
    /// `t_z(τ_k)` for `k = 0..=N`.
    pub forward: Vec<f64>,
    /// `τ_z(t_k)` for `k = 0..=N`.
    pub inverse: Vec<f64>,
}

impl TimeTransform {
    pub fn t_z(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            0.0
        } else if tau >= 1.0 {
            1.0
        } else {
            (self.density.antiderivative(tau) / self.total).clamp(0.0, 1.0)
        }
    }

    fn rate(&self, tau: f64) -> f64 {
        self.density.eval(tau) / self.total
    }

    pub fn tau_z(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut tau = t;
        for _ in 0..100 {
            let f = self.t_z(tau) - t;
            if f.abs() <= 1e-15 {
                break;
            }
            if f > 0.0 {
                hi = tau;
            } else {
                lo = tau;
            }
            let step = tau - f / self.rate(tau);
            tau = if step > lo && step < hi {
                step
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-16 {
                break;
            }
        }
        tau
    }

    /// `max |t_z(τ_z(t)) − t|` over the nodes and cell midpoints.
    pub fn round_trip_error(&self) -> f64 {
        let n = self.grid.len();
        (0..=2 * n)
            .map(|k| {
                let t = k as f64 / (2 * n) as f64;
                (self.t_z(self.tau_z(t)) - t).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_monotone(&self) -> bool {
        self.forward.windows(2).all(|w| w[1] > w[0]) && self.inverse.windows(2).all(|w| w[1] > w[0])
    }

    pub fn endpoints_exact(&self) -> bool {
        self.forward[0] == 0.0 && self.forward[self.grid.len()] == 1.0
    }

    pub fn check(&self) -> TransformCheck {
        TransformCheck {
            monotone: self.is_monotone(),
            endpoints_exact: self.endpoints_exact(),
            round_trip_error: self.round_trip_error(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformCheck {
    pub monotone: bool,
    pub endpoints_exact: bool,
    pub round_trip_error: f64,
}

pub fn time_transform(z: &PlanarLoop) -> Result<TimeTransform> {
    z.check_collision_free()?;
    let g = z.grid();
    let density_samples: Vec<f64> = z.samples().iter().map(|v| v.norm_sqr()).collect();
    let density = FourierSeries::from_samples(&density_samples);
    let total = density.mean();
    // the interpolated density must stay positive between the nodes
    let fine_min = (0..8 * g.len())
        .map(|k| density.eval(k as f64 / (8 * g.len()) as f64))
        .fold(f64::INFINITY, f64::min);
    if !(fine_min > 0.0) {
        return Err(Error::Domain(format!(
            "interpolated |z|² is not positive (min {fine_min:.3e})"
        )));
    }
    let mut tt = TimeTransform {
        grid: g,
        density,
        total,
        forward: Vec::new(),
        inverse: Vec::new(),
    };
    let n = g.len();
    tt.forward = (0..=n).map(|k| tt.t_z(k as f64 / n as f64)).collect();
    tt.inverse = (0..=n).map(|k| tt.tau_z(k as f64 / n as f64)).collect();
    Ok(tt)
}

/// `x(t) = z(τ_z(t))²` on the same grid.
pub fn levi_civita_orbit(z: &PlanarLoop) -> Result<PlanarLoop> {
    let tt = time_transform(z)?;
    levi_civita_with(z, &tt)
}

pub fn levi_civita_with(z: &PlanarLoop, tt: &TimeTransform) -> Result<PlanarLoop> {
    let interp = z.interpolant();
    let n = z.grid().len();
    PlanarLoop::new(
        z.grid(),
        (0..n).map(|k| interp.eval(tt.inverse[k]).powu(2)).collect(),
    )
}

/// `max_t |ẍ + mu·x/|x|³|`.
pub fn kepler_residual(x: &PlanarLoop, mu: f64) -> Result<f64> {
    x.check_collision_free()?;
    let ddx = x.second_derivative();
    Ok(ddx
        .iter()
        .zip(x.samples())
        .map(|(a, b)| (a + b * (mu / b.norm().powi(3))).norm())
        .fold(0.0, f64::max))
}

/// Kepler energy `½|ẋ|² − mu/|x|` at the nodes.
pub fn kepler_energy(x: &PlanarLoop, mu: f64) -> Result<Vec<f64>> {
    x.check_collision_free()?;
    let dx = x.derivative();
    Ok(dx
        .iter()
        .zip(x.samples())
        .map(|(v, p)| 0.5 * v.norm_sqr() - mu / p.norm())
        .collect())
}

pub fn energy_drift(x: &PlanarLoop, mu: f64) -> Result<f64> {
    let e = kepler_energy(x, mu)?;
    let (lo, hi) = e
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    Ok(hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::bov_radius;
    use std::f64::consts::PI;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(n).unwrap()
    }

    fn circle(n: usize, r: f64, k: f64) -> PlanarLoop {
        PlanarLoop::from_fn(grid(n), |t| Complex64::from_polar(r, 2.0 * PI * k * t)).unwrap()
    }

    #[test]
    fn residual_on_circular_ansatz() {
        assert!(bov_residual(&circle(256, bov_radius(1), 1.0)).sup_norm() <= 1e-8);
        assert!(bov_residual(&circle(256, bov_radius(2), 2.0)).sup_norm() <= 1e-8);
        let wrong = bov_residual(&circle(256, 1.0, 1.0)).sup_norm();
        assert!(wrong > 0.1);
        assert!((wrong - (8.0 * PI * PI - 0.5)).abs() < 1e-9);
    }

    #[test]
    fn residual_is_not_homogeneous() {
        let z = PlanarLoop::from_fn(grid(64), |t| {
            Complex64::new(1.0 + 0.2 * (2.0 * PI * t).cos(), (2.0 * PI * t).sin())
        })
        .unwrap();
        let z2 = PlanarLoop::new(z.grid(), z.samples().iter().map(|v| v * 2.0).collect()).unwrap();
        let r1 = bov_residual(&z);
        let r2 = bov_residual(&z2);
        let diff = r1
            .samples()
            .iter()
            .zip(r2.samples())
            .map(|(a, b)| (b - a * 2.0).amax())
            .fold(0.0, f64::max);
        assert!(diff > 1e-3);
    }

    #[test]
    fn constant_modulus_gives_identity_transform() {
        let tt = time_transform(&circle(64, 0.7, 3.0)).unwrap();
        for k in 0..=64 {
            let t = k as f64 / 64.0;
            assert!((tt.forward[k] - t).abs() < 1e-14);
            assert!((tt.inverse[k] - t).abs() < 1e-14);
        }
        assert!(tt.endpoints_exact() && tt.is_monotone());
    }

    #[test]
    fn closed_form_transform() {
        // |z|² = 1 + ½cos(2πs)
        let z = PlanarLoop::from_fn(grid(64), |s| {
            Complex64::new((1.0 + 0.5 * (2.0 * PI * s).cos()).sqrt(), 0.0)
        })
        .unwrap();
        let tt = time_transform(&z).unwrap();
        for k in 0..=64 {
            let tau = k as f64 / 64.0;
            assert!((tt.forward[k] - (tau + (2.0 * PI * tau).sin() / (4.0 * PI))).abs() < 1e-13);
        }
        assert!(tt.round_trip_error() <= 1e-8);
        assert!(tt.check().monotone);
    }

    #[test]
    fn collisions_are_rejected() {
        let z =
            PlanarLoop::from_fn(grid(32), |t| Complex64::new((2.0 * PI * t).cos(), 0.0)).unwrap();
        assert!(matches!(time_transform(&z), Err(Error::Domain(_))));
        let zero = PlanarLoop::from_fn(grid(32), |_| Complex64::new(0.0, 0.0)).unwrap();
        assert!(matches!(kepler_residual(&zero, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn squaring_circles_and_constants() {
        let r = bov_radius(1);
        let x = levi_civita_orbit(&circle(128, r, 1.0)).unwrap();
        for (k, v) in x.samples().iter().enumerate() {
            let expected = Complex64::from_polar(r * r, 4.0 * PI * k as f64 / 128.0);
            assert!((v - expected).norm() < 1e-13);
        }
        let c = Complex64::new(0.3, -0.4);
        let x = levi_civita_orbit(&PlanarLoop::from_fn(grid(16), |_| c).unwrap()).unwrap();
        assert!(x.samples().iter().all(|v| (v - c * c).norm() < 1e-15));
    }

    #[test]
    fn transformed_orbit_converges_under_refinement() {
        let z = |t: f64| {
            Complex64::from_polar(
                1.0 + 0.3 * (2.0 * PI * t).cos(),
                2.0 * PI * t + 0.2 * (2.0 * PI * t).sin(),
            )
        };
        let reference = levi_civita_orbit(&PlanarLoop::from_fn(grid(512), z).unwrap()).unwrap();
        let dev = |n: usize| {
            let x = levi_civita_orbit(&PlanarLoop::from_fn(grid(n), z).unwrap()).unwrap();
            let stride = 512 / n;
            x.samples()
                .iter()
                .enumerate()
                .map(|(k, v)| (v - reference.samples()[k * stride]).norm())
                .fold(0.0, f64::max)
        };
        let (d16, d32) = (dev(16), dev(32));
        assert!(d32 <= d16 / 4.0 || d32 < 1e-12, "{d16} {d32}");
    }

    #[test]
    fn kepler_residual_examples() {
        let rho = 0.8;
        let x = circle(256, rho, 1.0);
        assert!(kepler_residual(&x, 4.0 * PI * PI * rho.powi(3)).unwrap() <= 1e-8);
        assert!((kepler_residual(&x, 0.0).unwrap() - 4.0 * PI * PI * rho).abs() < 1e-9);
        let r = bov_radius(1);
        let x = levi_civita_orbit(&circle(512, r, 1.0)).unwrap();
        assert!(kepler_residual(&x, 1.0).unwrap() <= 1e-6);
        assert!(energy_drift(&x, 1.0).unwrap() <= 1e-5);
    }
}
