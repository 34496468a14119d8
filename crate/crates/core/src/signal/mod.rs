//! Uniformly sampled finite-window signals.
//!
//! A [`RealSignal`] holds `len` samples of an `n`-channel signal, stored
//! row-major (row `t` is the value at time `t * dt`). Inner products use the
//! rectangle rule, so `<u, v> = sum_t conj(u_t) . v_t * dt`.

mod corpus;
mod csvio;
mod hilbert;

pub use corpus::{gen_corpus, CorpusSpec, Family, FamilyBatch};
pub use csvio::{read_csv, write_csv};
pub use hilbert::{analytic, hilbert, hilbert_real, spectral_energy};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RealSignal {
    data: Vec<f64>,
    len: usize,
    channels: usize,
    dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    data: Vec<Complex64>,
    len: usize,
    channels: usize,
    dt: f64,
}

fn check_shape(data_len: usize, channels: usize, dt: f64) -> Result<usize> {
    if channels == 0 {
        return Err(invalid("signal must have at least one channel"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid(format!("sample period must be positive, got {dt}")));
    }
    if data_len % channels != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{data_len} samples do not divide into {channels} channels"
        )));
    }
    let len = data_len / channels;
    if len < 2 {
        return Err(invalid("signal needs at least two samples"));
    }
    Ok(len)
}

impl RealSignal {
    /// Builds a signal from row-major samples.
    pub fn new(data: Vec<f64>, channels: usize, dt: f64) -> Result<Self> {
        let len = check_shape(data.len(), channels, dt)?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self { data, len, channels, dt })
    }

    pub fn zeros(len: usize, channels: usize, dt: f64) -> Result<Self> {
        Self::new(vec![0.0; len * channels], channels, dt)
    }

    /// Samples `f(t, channel)` at `t = k * dt`.
    pub fn from_fn(len: usize, channels: usize, dt: f64, f: impl Fn(f64, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(len * channels);
        for k in 0..len {
            let t = k as f64 * dt;
            for ch in 0..channels {
                data.push(f(t, ch));
            }
        }
        Self::new(data, channels, dt)
    }

    pub(crate) fn from_parts_unchecked(data: Vec<f64>, len: usize, channels: usize, dt: f64) -> Self {
        debug_assert_eq!(data.len(), len * channels);
        Self { data, len, channels, dt }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Window length `len * dt` in seconds.
    pub fn duration(&self) -> f64 {
        self.len as f64 * self.dt
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.channels..(t + 1) * self.channels]
    }

    pub fn get(&self, t: usize, ch: usize) -> f64 {
        self.data[t * self.channels + ch]
    }

    pub fn channel(&self, ch: usize) -> Vec<f64> {
        self.data.iter().skip(ch).step_by(self.channels).copied().collect()
    }

    pub fn time(&self, t: usize) -> f64 {
        t as f64 * self.dt
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>() * self.dt
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Largest absolute sample over all channels.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_parts_unchecked(self.data.iter().map(|v| v * c).collect(), self.len, self.channels, self.dt)
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Self) -> Result<Self> {
        same_shape(self.len, self.channels, self.dt, other.len, other.channels, other.dt)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + c * b).collect();
        Ok(Self::from_parts_unchecked(data, self.len, self.channels, self.dt))
    }

    pub fn to_complex(&self) -> ComplexSignal {
        ComplexSignal {
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            len: self.len,
            channels: self.channels,
            dt: self.dt,
        }
    }

    pub(crate) fn same_shape(&self, other: &Self) -> Result<()> {
        same_shape(self.len, self.channels, self.dt, other.len, other.channels, other.dt)
    }
}

impl ComplexSignal {
    pub fn new(data: Vec<Complex64>, channels: usize, dt: f64) -> Result<Self> {
        let len = check_shape(data.len(), channels, dt)?;
        if let Some(i) = data.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self { data, len, channels, dt })
    }

    pub(crate) fn from_parts_unchecked(data: Vec<Complex64>, len: usize, channels: usize, dt: f64) -> Self {
        debug_assert_eq!(data.len(), len * channels);
        Self { data, len, channels, dt }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, t: usize, ch: usize) -> Complex64 {
        self.data[t * self.channels + ch]
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dt
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn re(&self) -> RealSignal {
        RealSignal::from_parts_unchecked(self.data.iter().map(|v| v.re).collect(), self.len, self.channels, self.dt)
    }

    pub fn im(&self) -> RealSignal {
        RealSignal::from_parts_unchecked(self.data.iter().map(|v| v.im).collect(), self.len, self.channels, self.dt)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_parts_unchecked(self.data.iter().map(|v| v * c).collect(), self.len, self.channels, self.dt)
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: Complex64, other: &Self) -> Result<Self> {
        same_shape(self.len, self.channels, self.dt, other.len, other.channels, other.dt)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + c * b).collect();
        Ok(Self::from_parts_unchecked(data, self.len, self.channels, self.dt))
    }
}

fn same_shape(l1: usize, c1: usize, dt1: f64, l2: usize, c2: usize, dt2: f64) -> Result<()> {
    if l1 != l2 || c1 != c2 {
        return Err(Error::ShapeMismatch(format!("{l1}x{c1} vs {l2}x{c2}")));
    }
    if (dt1 - dt2).abs() > 1e-12 * dt1.max(dt2) {
        return Err(Error::ShapeMismatch(format!("sample periods differ: {dt1} vs {dt2}")));
    }
    Ok(())
}

/// `<u, v> = sum_t u_t^* v_t dt`, conjugate-linear in `u`.
pub fn inner(u: &ComplexSignal, v: &ComplexSignal) -> Result<Complex64> {
    same_shape(u.len, u.channels, u.dt, v.len, v.channels, v.dt)?;
    let s: Complex64 = u.data.iter().zip(&v.data).map(|(a, b)| a.conj() * b).sum();
    Ok(s * u.dt)
}

/// Real inner product `<u, v>`.
pub fn inner_real(u: &RealSignal, v: &RealSignal) -> Result<f64> {
    u.same_shape(v)?;
    Ok(u.data.iter().zip(&v.data).map(|(a, b)| a * b).sum::<f64>() * u.dt)
}

/// `<a, y>` for a complex `a` and real `y` without promoting `y`.
pub fn inner_mixed(a: &ComplexSignal, y: &RealSignal) -> Result<Complex64> {
    same_shape(a.len, a.channels, a.dt, y.len, y.channels, y.dt)?;
    let s: Complex64 = a.data.iter().zip(&y.data).map(|(a, &b)| a.conj() * b).sum();
    Ok(s * a.dt)
}

/// Truncation: keeps samples with `t < t_cut`, zeroes the rest.
///
/// Sample `k` stands for the interval `[k dt, (k+1) dt)`, so `t_cut = 0`
/// yields the zero signal and `t_cut = duration` leaves `u` unchanged.
pub fn truncate(u: &RealSignal, t_cut: f64) -> Result<RealSignal> {
    if t_cut.is_nan() || t_cut < 0.0 {
        return Err(invalid(format!("truncation time must be nonnegative, got {t_cut}")));
    }
    let keep = ((t_cut / u.dt) - 1e-9).ceil().max(0.0);
    let keep = if keep >= u.len as f64 { u.len } else { keep as usize };
    let mut data = u.data.clone();
    for v in &mut data[keep * u.channels..] {
        *v = 0.0;
    }
    Ok(RealSignal::from_parts_unchecked(data, u.len, u.channels, u.dt))
}
