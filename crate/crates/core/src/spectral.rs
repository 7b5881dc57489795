//! Fourier tools for 1-periodic sampled data: differentiation,
//! band-limited interpolation and antiderivatives.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

fn fft(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

fn ifft_real(mut buf: Vec<Complex64>) -> Vec<f64> {
    let n = buf.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.into_iter().map(|c| c.re / n as f64).collect()
}

/// Signed wavenumber of FFT bin `k`; the Nyquist bin of an even length maps to `None`.
fn wavenumber(k: usize, n: usize) -> Option<f64> {
    if n.is_multiple_of(2) && k == n / 2 {
        None
    } else if k <= n / 2 {
        Some(k as f64)
    } else {
        Some(k as f64 - n as f64)
    }
}

fn apply_symbol(values: &[f64], symbol: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = values.len();
    let mut coeffs = fft(values);
    for (k, c) in coeffs.iter_mut().enumerate() {
        match wavenumber(k, n) {
            Some(w) => *c *= symbol(w),
            None => *c = Complex64::new(0.0, 0.0),
        }
    }
    ifft_real(coeffs)
}

/// First derivative of 1-periodic samples. The Nyquist mode of an even
/// length is annihilated, matching [`differentiation_matrix`].
pub fn derivative(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut coeffs = fft(values);
    for (k, c) in coeffs.iter_mut().enumerate() {
        match wavenumber(k, n) {
            Some(w) => *c *= Complex64::new(0.0, 2.0 * PI * w),
            None => *c = Complex64::new(0.0, 0.0),
        }
    }
    ifft_real(coeffs)
}

/// Second derivative of 1-periodic samples (Nyquist mode dropped).
pub fn second_derivative(values: &[f64]) -> Vec<f64> {
    apply_symbol(values, |w| -(2.0 * PI * w).powi(2))
}

/// Dense Fourier differentiation matrix on `n` equispaced nodes of [0, 1).
pub fn differentiation_matrix(n: usize) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; n]; n];
    if n.is_multiple_of(2) {
        for (j, row) in d.iter_mut().enumerate() {
            for (k, entry) in row.iter_mut().enumerate() {
                if j != k {
                    let diff = j as f64 - k as f64;
                    let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
                    *entry = PI * sign / (PI * diff / n as f64).tan();
                }
            }
        }
    } else {
        for (j, row) in d.iter_mut().enumerate() {
            for (k, entry) in row.iter_mut().enumerate() {
                if j != k {
                    let diff = j as f64 - k as f64;
                    let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
                    *entry = PI * sign / (PI * diff / n as f64).sin();
                }
            }
        }
    }
    d
}

/// Band-limited trigonometric interpolant of real 1-periodic samples.
#[derive(Debug, Clone)]
pub struct FourierSeries {
    n: usize,
    /// Coefficients `c_k` for `k = 0..=n/2`; negative modes are conjugates.
    coeffs: Vec<Complex64>,
}

impl FourierSeries {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let raw = fft(values);
        let coeffs = raw[..=n / 2].iter().map(|c| c / n as f64).collect();
        Self { n, coeffs }
    }

    fn nyquist(&self) -> Option<f64> {
        self.n.is_multiple_of(2).then(|| self.coeffs[self.n / 2].re)
    }

    fn top(&self) -> usize {
        (self.n - 1) / 2
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = self.coeffs[0].re;
        for k in 1..=self.top() {
            let phase = Complex64::from_polar(1.0, 2.0 * PI * k as f64 * t);
            acc += 2.0 * (self.coeffs[k] * phase).re;
        }
        if let Some(c) = self.nyquist() {
            acc += c * (PI * self.n as f64 * t).cos();
        }
        acc
    }

    /// Derivative of the interpolant without its Nyquist term.
    pub fn eval_derivative(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for k in 1..=self.top() {
            let w = 2.0 * PI * k as f64;
            let phase = Complex64::from_polar(1.0, w * t);
            acc += 2.0 * (self.coeffs[k] * phase * Complex64::new(0.0, w)).re;
        }
        acc
    }

    /// `∫₀ᵗ p(s) ds` of the interpolant `p`.
    pub fn antiderivative(&self, t: f64) -> f64 {
        let mut acc = self.coeffs[0].re * t;
        for k in 1..=self.top() {
            let w = 2.0 * PI * k as f64;
            let phase = Complex64::from_polar(1.0, w * t) - Complex64::new(1.0, 0.0);
            acc += 2.0 * (self.coeffs[k] * phase / Complex64::new(0.0, w)).re;
        }
        if let Some(c) = self.nyquist() {
            let w = PI * self.n as f64;
            acc += c * (w * t).sin() / w;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|k| f(k as f64 / n as f64)).collect()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn derivative_of_trig_polynomial() {
        for n in [16, 17, 64] {
            let u = samples(n, |t| (2.0 * PI * t).sin() + 0.5 * (6.0 * PI * t).cos());
            let du = derivative(&u);
            let exact = samples(n, |t| {
                2.0 * PI * (2.0 * PI * t).cos() - 3.0 * PI * (6.0 * PI * t).sin()
            });
            assert!(max_diff(&du, &exact) < 1e-12, "n={n}");
            let ddu = second_derivative(&u);
            let exact2 = samples(n, |t| {
                -4.0 * PI * PI * (2.0 * PI * t).sin() - 18.0 * PI * PI * (6.0 * PI * t).cos()
            });
            assert!(max_diff(&ddu, &exact2) < 1e-10, "n={n}");
        }
    }

    #[test]
    fn matrix_matches_fft_derivative() {
        for n in [8, 9, 32] {
            let d = differentiation_matrix(n);
            let u = samples(n, |t| (2.0 * PI * t).sin().exp());
            let via_matrix: Vec<f64> = d
                .iter()
                .map(|row| row.iter().zip(&u).map(|(a, b)| a * b).sum())
                .collect();
            assert!(max_diff(&via_matrix, &derivative(&u)) < 1e-10, "n={n}");
            for j in 0..n {
                for k in 0..n {
                    assert!((d[j][k] + d[k][j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn interpolant_reproduces_samples_and_modes() {
        let n = 32;
        let u = samples(n, |t| (2.0 * PI * t).cos() + 0.3 * (4.0 * PI * t).sin());
        let series = FourierSeries::from_samples(&u);
        for (k, &v) in u.iter().enumerate() {
            assert!((series.eval(k as f64 / n as f64) - v).abs() < 1e-13);
        }
        let t = 0.1234;
        let exact = (2.0 * PI * t).cos() + 0.3 * (4.0 * PI * t).sin();
        assert!((series.eval(t) - exact).abs() < 1e-13);
        let dexact = -2.0 * PI * (2.0 * PI * t).sin() + 1.2 * PI * (4.0 * PI * t).cos();
        assert!((series.eval_derivative(t) - dexact).abs() < 1e-12);
        // ∫₀ᵗ cos(2πs) + 0.3 sin(4πs) ds
        let iexact =
            (2.0 * PI * t).sin() / (2.0 * PI) + 0.3 * (1.0 - (4.0 * PI * t).cos()) / (4.0 * PI);
        assert!((series.antiderivative(t) - iexact).abs() < 1e-14);
    }

    #[test]
    fn nyquist_mode_interpolates_and_integrates() {
        let n = 8;
        let u: Vec<f64> = (0..n)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let series = FourierSeries::from_samples(&u);
        assert!((series.eval(3.0 / 8.0) + 1.0).abs() < 1e-14);
        assert!(series.antiderivative(1.0).abs() < 1e-14);
        assert!(derivative(&u).iter().all(|v| v.abs() < 1e-12));
    }
}
