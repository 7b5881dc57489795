//! Iteration and time shift: the monoid `ℤ* ⋉ S¹` acting on loops and on
//! pairs.
//!
//! The action on loops is `((n, r)·u)(t) = u(nt + r)`. With the product
//! `(n₁, r₁)(n₂, r₂) = (n₁n₂, n₁r₂ + r₁)` this is a right action:
//! `act(g₁g₂, u) = act(g₂, act(g₁, u))`. The reading `u(n(t + r))` is not
//! compatible with that product in either order.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Loop;
use crate::pair::{PairSpec, ScaledMean};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonoidElement {
    n: i64,
    r: f64,
}

impl MonoidElement {
    pub fn new(n: i64, r: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be nonzero".into()));
        }
        if !r.is_finite() {
            return Err(Error::InvalidArgument(format!("shift {r} is not finite")));
        }
        Ok(Self { n, r: frac(r) })
    }

    pub fn identity() -> Self {
        Self { n: 1, r: 0.0 }
    }

    pub fn n(&self) -> i64 {
        self.n
    }

    /// In `[0, 1)`.
    pub fn r(&self) -> f64 {
        self.r
    }
}

fn frac(x: f64) -> f64 {
    let f = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1 for tiny negative inputs
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// `(n₁n₂, frac(n₁r₂ + r₁))`.
pub fn compose(g1: MonoidElement, g2: MonoidElement) -> MonoidElement {
    MonoidElement {
        n: g1.n * g2.n,
        r: frac(g1.n as f64 * g2.r + g1.r),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resampling {
    /// Band-limited interpolation of the periodic samples.
    #[default]
    Trigonometric,
    /// Piecewise linear, for rough data.
    Linear,
}

pub fn act(g: MonoidElement, u: &Loop) -> Result<Loop> {
    act_with(g, u, Resampling::Trigonometric)
}

pub fn act_with(g: MonoidElement, u: &Loop, method: Resampling) -> Result<Loop> {
    let grid = u.grid();
    let times: Vec<f64> = grid
        .nodes()
        .into_iter()
        .map(|t| frac(g.n as f64 * t + g.r))
        .collect();
    let samples = match method {
        Resampling::Trigonometric => {
            let interp = u.interpolant();
            times.iter().map(|&s| interp.eval(s)).collect()
        }
        Resampling::Linear => {
            let n = grid.len();
            times
                .iter()
                .map(|&s| {
                    let x = s * n as f64;
                    let k = (x.floor() as usize).min(n - 1);
                    let w = x - k as f64;
                    &u.samples()[k] * (1.0 - w) + &u.samples()[(k + 1) % n] * w
                })
                .collect::<Vec<DVector<f64>>>()
        }
    };
    Loop::new(grid, samples)
}

/// `(f/n, H)`.
pub fn pullback_pair(g: MonoidElement, pair: &PairSpec) -> Result<PairSpec> {
    if g.n == 1 {
        return Ok(pair.clone());
    }
    let f = Arc::new(ScaledMean::new(
        pair.mean_function().clone(),
        1.0 / g.n as f64,
    ));
    pair.with_mean_function(f, format!("{}/{}", pair.name(), g.n))
}

pub const PROPOSITION_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropositionReport {
    pub n: i64,
    pub r: f64,
    pub tolerance: f64,
    /// Residual of `u` for the pulled-back pair.
    pub rho_pullback: f64,
    /// Residual of `act(g, u)` for the original pair.
    pub rho_iterate: f64,
    pub pullback_critical: bool,
    pub iterate_critical: bool,
    pub agreement: bool,
}

pub fn proposition_check(pair: &PairSpec, g: MonoidElement, u: &Loop) -> Result<PropositionReport> {
    proposition_check_with(pair, g, u, PROPOSITION_TOL)
}

pub fn proposition_check_with(
    pair: &PairSpec,
    g: MonoidElement,
    u: &Loop,
    tol: f64,
) -> Result<PropositionReport> {
    let pulled = pullback_pair(g, pair)?;
    let rho_pullback = pulled.critical_residual(u)?.sup_norm();
    let rho_iterate = pair.critical_residual(&act(g, u)?)?.sup_norm();
    let pullback_critical = rho_pullback <= tol;
    let iterate_critical = rho_iterate <= tol;
    Ok(PropositionReport {
        n: g.n,
        r: g.r,
        tolerance: tol,
        rho_pullback,
        rho_iterate,
        pullback_critical,
        iterate_critical,
        agreement: pullback_critical == iterate_critical,
    })
}
