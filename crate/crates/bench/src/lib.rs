//! Shared fixtures for the criterion benchmarks.

use phasekit::linalg::CMat;
use phasekit::{Complex64, RealSignal};

/// Deterministic band-limited test signal with `channels` channels.
pub fn test_signal(len: usize, channels: usize, dt: f64) -> RealSignal {
    RealSignal::from_fn(len, channels, dt, |t, ch| {
        let k = ch as f64 + 1.0;
        (1.3 * k * t).sin() + 0.5 * (7.1 * t + k).cos() + 0.2 * (23.0 * k * t).sin()
    })
    .expect("fixture parameters are valid")
}

/// Dense `n x n` complex matrix with a positive-definite Hermitian part.
pub fn sectorial_matrix(n: usize) -> CMat {
    let mut a = CMat::from_fn(n, n, |i, j| {
        let x = ((i * 7 + j * 13) % 17) as f64 / 17.0 - 0.5;
        let y = ((i * 5 + j * 3) % 11) as f64 / 11.0 - 0.5;
        Complex64::new(x, y)
    });
    for i in 0..n {
        a[(i, i)] += Complex64::new(n as f64, 0.0);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_requested_shape() {
        let s = test_signal(64, 2, 1e-2);
        assert_eq!((s.len(), s.channels()), (64, 2));
        let a = sectorial_matrix(4);
        assert_eq!(a.shape(), (4, 4));
        let h = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        assert!(h.symmetric_eigenvalues().iter().all(|l| *l > 0.0));
    }
}
