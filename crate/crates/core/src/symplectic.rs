//! Symplectic linear algebra on the standard phase space ℝ²ⁿ.
//!
//! Coordinates are ordered `(q₁..qₙ, p₁..pₙ)`. The complex structure is
//! `J(q, p) = (−p, q)`, the inner product is Euclidean, and the symplectic
//! form is `ω(x, y) = ⟨Jx, y⟩`. With these choices the Hamiltonian vector
//! field of `G` is `X_G = J∇G`, so that `dG = ω(·, X_G)` and
//! `ω(·, J·) = ⟨·,·⟩` both hold.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard phase space ℝ²ⁿ with its canonical structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSpace {
    n: usize,
}

impl PhaseSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "phase space half-dimension must be >= 1".into(),
            ));
        }
        Ok(Self { n })
    }

    pub fn half_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// The integer matrix of `J`.
    pub fn j_matrix(&self) -> DMatrix<f64> {
        j_matrix(self.n)
    }

    /// Product phase space; coordinates of the factors are interleaved into
    /// the global `(q, p)` ordering by [`PhaseSpace::embed_factor`].
    pub fn product(spaces: &[PhaseSpace]) -> Result<Self> {
        let n = spaces.iter().map(|s| s.n).sum();
        Self::new(n)
    }

    /// Global coordinate indices of factor `index` inside the product of
    /// `spaces`, as `(q indices, p indices)`.
    pub fn embed_factor(spaces: &[PhaseSpace], index: usize) -> (Vec<usize>, Vec<usize>) {
        let total: usize = spaces.iter().map(|s| s.n).sum();
        let offset: usize = spaces[..index].iter().map(|s| s.n).sum();
        let n = spaces[index].n;
        let q = (offset..offset + n).collect();
        let p = (total + offset..total + offset + n).collect();
        (q, p)
    }
}

pub fn j_matrix(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = 1.0;
    }
    j
}

/// `Jx` without forming the matrix.
pub fn apply_j(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len() / 2;
    let mut out = DVector::zeros(x.len());
    for i in 0..n {
        out[i] = -x[n + i];
        out[n + i] = x[i];
    }
    out
}

fn check_even(len: usize) -> Result<()> {
    if len == 0 || !len.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "vector dimension {len} is not even and positive"
        )));
    }
    Ok(())
}

/// `ω(x, y) = ⟨Jx, y⟩`.
pub fn omega(x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    check_even(x.len())?;
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(omega_unchecked(x, y))
}

pub(crate) fn omega_unchecked(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let n = x.len() / 2;
    let mut acc = 0.0;
    for i in 0..n {
        // (Jx)_i = -x_{n+i}, (Jx)_{n+i} = x_i
        acc += -x[n + i] * y[i] + x[i] * y[n + i];
    }
    acc
}

/// Hamiltonian vector field `X_G = J∇G` from the Euclidean gradient.
pub fn ham_vector_field(grad: &DVector<f64>) -> Result<DVector<f64>> {
    check_even(grad.len())?;
    Ok(apply_j(grad))
}

/// Inverse of a symplectic matrix through `Ψ⁻¹ = −JΨᵀJ`.
pub fn symplectic_inverse(psi: &DMatrix<f64>) -> DMatrix<f64> {
    let j = j_matrix(psi.nrows() / 2);
    -(&j * psi.transpose() * &j)
}

/// `‖ΨᵀJΨ − J‖` in the Frobenius norm.
pub fn symplecticity_defect(psi: &DMatrix<f64>) -> f64 {
    let j = j_matrix(psi.nrows() / 2);
    (psi.transpose() * &j * psi - j).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(dim: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        v
    }

    #[test]
    fn j_squares_to_minus_identity() {
        for n in 1..4 {
            let j = j_matrix(n);
            assert_eq!(&j * &j, -DMatrix::identity(2 * n, 2 * n));
            assert_eq!(j.transpose(), -j.clone());
            assert_eq!(j.transpose() * &j, DMatrix::identity(2 * n, 2 * n));
        }
    }

    #[test]
    fn omega_of_basis_vectors() {
        assert_eq!(omega(&e(2, 0), &e(2, 0)).unwrap(), 0.0);
        // ⟨J e_q, e_p⟩ = ⟨e_p, e_p⟩
        assert_eq!(omega(&e(2, 0), &e(2, 1)).unwrap(), 1.0);
        assert_eq!(omega(&e(2, 1), &e(2, 0)).unwrap(), -1.0);
    }

    #[test]
    fn omega_rejects_bad_dimensions() {
        assert!(matches!(
            omega(&e(2, 0), &e(4, 0)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            omega(&e(3, 0), &e(3, 0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn harmonic_vector_field() {
        // G = (q² + p²)/2 has gradient (q, p)
        let x = DVector::from_vec(vec![0.7, -1.3]);
        let xg = ham_vector_field(&x).unwrap();
        assert_eq!(xg, DVector::from_vec(vec![1.3, 0.7]));
        assert_eq!(
            ham_vector_field(&DVector::zeros(4)).unwrap(),
            DVector::zeros(4)
        );
    }

    #[test]
    fn vector_field_matches_finite_difference_differential() {
        // G(q1,q2,p1,p2) = sin(q1) p2 + q2² p1 + cosh(p1 q1)
        let g = |x: &DVector<f64>| x[0].sin() * x[3] + x[1] * x[1] * x[2] + (x[2] * x[0]).cosh();
        let grad = |x: &DVector<f64>| {
            DVector::from_vec(vec![
                x[0].cos() * x[3] + x[2] * (x[2] * x[0]).sinh(),
                2.0 * x[1] * x[2],
                x[1] * x[1] + x[0] * (x[2] * x[0]).sinh(),
                x[0].sin(),
            ])
        };
        let x = DVector::from_vec(vec![0.3, -0.4, 0.5, 1.1]);
        let xi = DVector::from_vec(vec![-0.2, 0.9, 0.4, -0.6]);
        let eps = 1e-5;
        let fd = (g(&(&x + &xi * eps)) - g(&(&x - &xi * eps))) / (2.0 * eps);
        let xg = ham_vector_field(&grad(&x)).unwrap();
        assert!((fd - omega(&xi, &xg).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn symplectic_inverse_of_rotation() {
        let theta: f64 = 0.37;
        let psi =
            DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let inv = symplectic_inverse(&psi);
        assert!((inv * &psi - DMatrix::identity(2, 2)).norm() < 1e-15);
        assert!(symplecticity_defect(&psi) < 1e-15);
    }

    #[test]
    fn product_embedding_orders_q_then_p() {
        let spaces = [PhaseSpace::new(1).unwrap(), PhaseSpace::new(2).unwrap()];
        assert_eq!(PhaseSpace::embed_factor(&spaces, 0), (vec![0], vec![3]));
        assert_eq!(
            PhaseSpace::embed_factor(&spaces, 1),
            (vec![1, 2], vec![4, 5])
        );
    }

    proptest! {
        #[test]
        fn omega_antisymmetric_and_compatible(v in proptest::collection::vec(-10.0f64..10.0, 12)) {
            let x = DVector::from_column_slice(&v[..6]);
            let y = DVector::from_column_slice(&v[6..]);
            let scale = x.norm() * y.norm() + 1.0;
            prop_assert!((omega(&x, &y).unwrap() + omega(&y, &x).unwrap()).abs() <= 1e-14 * scale);
            prop_assert!((omega(&x, &apply_j(&y)).unwrap() - x.dot(&y)).abs() <= 1e-14 * scale);
            prop_assert!((omega(&x, &apply_j(&x)).unwrap() - x.dot(&x)).abs() <= 1e-14 * scale);
        }
    }
}
