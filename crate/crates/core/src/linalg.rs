//! Small dense helpers on complex matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `He(e^{j alpha} A)`.
pub fn rotated_hermitian(a: &CMat, alpha: f64) -> CMat {
    hermitian_part(&(a * Complex64::from_polar(1.0, alpha)))
}

fn eig2(h: &CMat) -> (f64, f64) {
    let a = h[(0, 0)].re;
    let d = h[(1, 1)].re;
    let b = h[(0, 1)];
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    (mean - rad, mean + rad)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn herm_eigenvalues(h: &CMat) -> Vec<f64> {
    match h.nrows() {
        0 => Vec::new(),
        1 => vec![h[(0, 0)].re],
        2 => {
            let (lo, hi) = eig2(h);
            vec![lo, hi]
        }
        _ => {
            let mut v: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
            v.sort_by(f64::total_cmp);
            v
        }
    }
}

pub fn lambda_min(h: &CMat) -> f64 {
    match h.nrows() {
        1 => h[(0, 0)].re,
        2 => eig2(h).0,
        _ => herm_eigenvalues(h).first().copied().unwrap_or(0.0),
    }
}

pub fn lambda_max(h: &CMat) -> f64 {
    match h.nrows() {
        1 => h[(0, 0)].re,
        2 => eig2(h).1,
        _ => herm_eigenvalues(h).last().copied().unwrap_or(0.0),
    }
}

/// `lambda_min(He(e^{j alpha} A))` without forming the rotated matrix for n <= 2.
pub fn lambda_min_rotated(a: &CMat, alpha: f64) -> f64 {
    let r = Complex64::from_polar(1.0, alpha);
    match a.nrows() {
        1 => (r * a[(0, 0)]).re,
        2 => {
            let p = r * a[(0, 0)];
            let q = r * a[(1, 1)];
            let off = 0.5 * (r * a[(0, 1)] + (r * a[(1, 0)]).conj());
            let mean = 0.5 * (p.re + q.re);
            let rad = (0.25 * (p.re - q.re).powi(2) + off.norm_sqr()).sqrt();
            mean - rad
        }
        _ => lambda_min(&rotated_hermitian(a, alpha)),
    }
}

/// Largest eigenpair of a Hermitian matrix.
pub fn top_eigenpair(h: &CMat) -> Option<(f64, DVector<Complex64>)> {
    let n = h.nrows();
    if n == 0 {
        return None;
    }
    let eig = nalgebra::linalg::SymmetricEigen::try_new(h.clone(), 1e-15, 10_000)?;
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))?;
    Some((val, eig.eigenvectors.column(idx).into_owned()))
}

pub fn sigma_max(a: &CMat) -> f64 {
    if a.nrows() == 1 && a.ncols() == 1 {
        return a[(0, 0)].norm();
    }
    lambda_max(&(a.adjoint() * a)).max(0.0).sqrt()
}

pub fn fro_norm(a: &CMat) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
