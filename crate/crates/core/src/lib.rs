//! Mean-field Hamiltonian delay equations on ℝ²ⁿ.

// `!(x <= tol)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flow;
pub mod grid;
pub mod hessian;
pub mod kepler;
pub mod nullity;
pub mod operator;
pub mod pair;
pub mod solver;
pub mod spectral;
pub mod symmetry;
pub mod symplectic;
pub mod systems;

pub use error::{Error, Result};
pub use grid::{FieldAlongLoop, Loop, TimeGrid};
pub use pair::{MeanValue, PairSpec};
pub use symplectic::PhaseSpace;
