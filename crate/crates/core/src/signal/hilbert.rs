//! Discrete Hilbert transform and analytic signals.
//!
//! The transform multiplies the DFT of each channel by `-j sgn(k)`, with the
//! DC and Nyquist bins mapped to zero. On signals without DC or Nyquist
//! content it is an isometric, anti-self-adjoint anti-involution, exactly
//! like its continuous-time counterpart.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{ComplexSignal, RealSignal};
use crate::error::{invalid, Result};

const REAL_OUTPUT_RTOL: f64 = 1e-12;

/// Per-channel FFT of a row-major signal, zero-padded to `padded` samples.
fn channel_spectra(data: &[Complex64], len: usize, channels: usize, padded: usize) -> Vec<Vec<Complex64>> {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(padded);
    (0..channels)
        .map(|ch| {
            let mut buf = vec![Complex64::new(0.0, 0.0); padded];
            for t in 0..len {
                buf[t] = data[t * channels + ch];
            }
            fft.process(&mut buf);
            buf
        })
        .collect()
}

fn inverse_into(spectra: Vec<Vec<Complex64>>, len: usize, channels: usize) -> Vec<Complex64> {
    let padded = spectra.first().map_or(0, Vec::len);
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(padded);
    let scale = 1.0 / padded as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); len * channels];
    for (ch, mut buf) in spectra.into_iter().enumerate() {
        ifft.process(&mut buf);
        for t in 0..len {
            out[t * channels + ch] = buf[t] * scale;
        }
    }
    out
}

fn hilbert_multiplier(k: usize, n: usize) -> Complex64 {
    let half = n / 2;
    if k == 0 || k == half {
        Complex64::new(0.0, 0.0)
    } else if k < half {
        Complex64::new(0.0, -1.0)
    } else {
        Complex64::new(0.0, 1.0)
    }
}

fn check_finite(data: &[Complex64]) -> Result<()> {
    if data.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(invalid("non-finite sample in Hilbert transform input"));
    }
    Ok(())
}

/// Hilbert transform of a complex signal.
///
/// Odd-length inputs are padded with one trailing zero and the result is
/// cut back to the original length. If the input is real, the imaginary
/// roundoff of the output is dropped.
pub fn hilbert(u: &ComplexSignal) -> Result<ComplexSignal> {
    check_finite(&u.data)?;
    let padded = u.len + u.len % 2;
    let mut spectra = channel_spectra(&u.data, u.len, u.channels, padded);
    for spec in &mut spectra {
        for (k, v) in spec.iter_mut().enumerate() {
            *v *= hilbert_multiplier(k, padded);
        }
    }
    let mut out = inverse_into(spectra, u.len, u.channels);
    if u.data.iter().all(|v| v.im == 0.0) {
        let peak = out.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        let max_im = out.iter().fold(0.0_f64, |m, v| m.max(v.im.abs()));
        if max_im <= REAL_OUTPUT_RTOL * peak.max(f64::MIN_POSITIVE) || peak == 0.0 {
            for v in &mut out {
                v.im = 0.0;
            }
        }
    }
    Ok(ComplexSignal::from_parts_unchecked(out, u.len, u.channels, u.dt))
}

/// Hilbert transform of a real signal, returned as a real signal.
pub fn hilbert_real(u: &RealSignal) -> Result<RealSignal> {
    Ok(hilbert(&u.to_complex())?.re())
}

/// Analytic signal `u_a = (u + j H u) / 2`.
///
/// The factor one half gives `||u_a||^2 = ||u||^2 / 2` for DC- and
/// Nyquist-free `u`.
pub fn analytic(u: &RealSignal) -> Result<ComplexSignal> {
    let c = u.to_complex();
    check_finite(&c.data)?;
    let padded = u.len + u.len % 2;
    let half = padded / 2;
    let mut spectra = channel_spectra(&c.data, u.len, u.channels, padded);
    // (1 + j * (-j sgn k)) / 2 = (1 + sgn k) / 2
    for spec in &mut spectra {
        for (k, v) in spec.iter_mut().enumerate() {
            let m = if k == 0 || k == half {
                0.5
            } else if k < half {
                1.0
            } else {
                0.0
            };
            *v *= m;
        }
    }
    let out = inverse_into(spectra, u.len, u.channels);
    Ok(ComplexSignal::from_parts_unchecked(out, u.len, u.channels, u.dt))
}

/// `||u||^2` evaluated in the frequency domain, `dt / T * sum_k |U_k|^2`.
pub fn spectral_energy(u: &ComplexSignal) -> f64 {
    let spectra = channel_spectra(&u.data, u.len, u.channels, u.len);
    let total: f64 = spectra.iter().flat_map(|s| s.iter()).map(|v| v.norm_sqr()).sum();
    total * u.dt / u.len as f64
}
