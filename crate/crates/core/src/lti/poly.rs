//! Real polynomials stored highest degree first.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Drops leading zeros. An all-zero polynomial becomes empty.
pub fn trim(coeffs: &[f64]) -> Vec<f64> {
    let first = coeffs.iter().position(|&c| c != 0.0).unwrap_or(coeffs.len());
    coeffs[first..].to_vec()
}

pub fn eval(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Roots via the eigenvalues of the companion matrix.
pub fn roots(coeffs: &[f64]) -> Vec<Complex64> {
    let c = trim(coeffs);
    if c.len() <= 1 {
        return Vec::new();
    }
    let n = c.len() - 1;
    if n == 1 {
        return vec![Complex64::new(-c[1] / c[0], 0.0)];
    }
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        comp[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    comp.complex_eigenvalues().iter().copied().collect()
}
