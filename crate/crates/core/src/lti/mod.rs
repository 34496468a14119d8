//! Rational transfer matrices and their frequency-domain quantities.

mod poly;
mod rational;
mod statespace;

pub use poly::roots;
pub use rational::{Rational, HURWITZ_MARGIN};
pub use statespace::{realize, StateSpace};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{golden_max, sigma_max, CMat};

/// Nonnegative frequencies (rad/s) at which responses are sampled, plus
/// whether the `w -> inf` limit takes part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    points: Vec<f64>,
    include_limit: bool,
}

impl Default for FrequencyGrid {
    /// 2000 log-spaced points on `[1e-3, 1e4]` rad/s, plus `w = 0` and the limit.
    fn default() -> Self {
        Self::log(1e-3, 1e4, 2000).expect("static grid parameters are valid")
    }
}

impl FrequencyGrid {
    /// Log-spaced grid on `[wmin, wmax]` augmented with `w = 0` and the limit.
    pub fn log(wmin: f64, wmax: f64, n: usize) -> Result<Self> {
        if !(wmin > 0.0 && wmax > wmin && wmax.is_finite()) || n < 2 {
            return Err(invalid(format!("bad grid: [{wmin}, {wmax}] with {n} points")));
        }
        let (l0, l1) = (wmin.log10(), wmax.log10());
        let mut points = vec![0.0];
        points.extend((0..n).map(|i| 10f64.powf(l0 + (l1 - l0) * i as f64 / (n - 1) as f64)));
        Ok(Self { points, include_limit: true })
    }

    /// Arbitrary finite nonnegative frequencies; sorted and deduplicated.
    pub fn from_points(mut points: Vec<f64>, include_limit: bool) -> Result<Self> {
        if points.is_empty() || points.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("grid points must be finite and nonnegative"));
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        Ok(Self { points, include_limit })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn include_limit(&self) -> bool {
        self.include_limit
    }

    pub fn max(&self) -> f64 {
        *self.points.last().expect("grid is nonempty")
    }

    /// Mirrored grid `-w_max .. 0 .. w_max`.
    pub fn signed(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.points.iter().rev().filter(|w| **w > 0.0).map(|w| -w).collect();
        out.extend(self.points.iter().copied());
        out
    }
}

/// Square matrix of proper rational functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Rational>>", into = "Vec<Vec<Rational>>")]
pub struct TransferMatrix {
    n: usize,
    entries: Vec<Rational>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurwitzReport {
    pub stable: bool,
    /// The offending pole when unstable.
    pub witness: Option<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HinfNorm {
    pub value: f64,
    /// Frequency of the peak; `f64::INFINITY` when attained in the limit.
    pub peak_w: f64,
}

/// High-frequency behaviour of a strictly proper transfer matrix:
/// `P(jw) ~ direction / w^order`.
#[derive(Debug, Clone, PartialEq)]
pub struct Asymptote {
    pub order: usize,
    pub direction: CMat,
}

impl TryFrom<Vec<Vec<Rational>>> for TransferMatrix {
    type Error = crate::error::Error;
    fn try_from(rows: Vec<Vec<Rational>>) -> Result<Self> {
        TransferMatrix::new(rows)
    }
}

impl From<TransferMatrix> for Vec<Vec<Rational>> {
    fn from(p: TransferMatrix) -> Self {
        p.rows()
    }
}

impl TransferMatrix {
    pub fn new(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(invalid("transfer matrix must be nonempty"));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid("transfer matrix must be square"));
        }
        Ok(Self { n, entries: rows.into_iter().flatten().collect() })
    }

    pub fn scalar(g: Rational) -> Self {
        Self { n: 1, entries: vec![g] }
    }

    pub fn constant(k: &DMatrix<f64>) -> Result<Self> {
        if k.nrows() != k.ncols() || k.nrows() == 0 {
            return Err(invalid("constant transfer matrix must be square and nonempty"));
        }
        let n = k.nrows();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(Rational::constant(k[(i, j)]));
            }
        }
        Ok(Self { n, entries })
    }

    pub fn rows(&self) -> Vec<Vec<Rational>> {
        self.entries.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(&DMatrix::identity(n, n)).expect("identity is square")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), &Rational)> {
        self.entries.iter().enumerate().map(move |(k, r)| ((k / self.n, k % self.n), r))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { n: self.n, entries: self.entries.iter().map(|r| r.scaled(c)).collect() }
    }

    pub fn freq_response(&self, w: f64) -> Result<CMat> {
        if !w.is_finite() {
            return Err(invalid(format!("frequency must be finite, got {w}")));
        }
        let mut m = CMat::zeros(self.n, self.n);
        for ((i, j), g) in self.entries() {
            m[(i, j)] = g.freq(w)?;
        }
        Ok(m)
    }

    pub fn is_hurwitz(&self) -> HurwitzReport {
        let witness = self
            .entries
            .iter()
            .filter_map(Rational::unstable_pole)
            .max_by(|a, b| a.re.total_cmp(&b.re));
        HurwitzReport { stable: witness.is_none(), witness }
    }

    pub(crate) fn require_stable(&self) -> Result<()> {
        match self.is_hurwitz().witness {
            Some(pole) => Err(Error::Unstable { pole }),
            None => Ok(()),
        }
    }

    /// `lim_{w -> inf} P(jw)`, the feedthrough matrix.
    pub fn limit_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.entry(i, j).high_freq_limit())
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.limit_matrix().iter().all(|v| *v == 0.0)
    }

    /// Leading high-frequency term when the feedthrough is zero.
    ///
    /// With `k` the smallest relative degree among nonzero entries,
    /// `P(jw) = Q (jw)^{-k} + O(w^{-k-1})`, and the returned direction is
    /// `Q (-j)^k` so that `P(jw) ~ direction / w^k`.
    pub fn asymptote(&self) -> Option<Asymptote> {
        if !self.is_strictly_proper() {
            return None;
        }
        let order = self.entries.iter().filter_map(Rational::relative_degree).min()?;
        let rot = Complex64::new(0.0, -1.0).powi(order as i32);
        let direction = CMat::from_fn(self.n, self.n, |i, j| rot * self.entry(i, j).asymptotic_coefficient(order));
        Some(Asymptote { order, direction })
    }

    /// Peak largest singular value over the grid, refined by golden-section
    /// search (in log frequency) around the best grid point.
    pub fn hinf_norm(&self, grid: &FrequencyGrid) -> Result<HinfNorm> {
        self.require_stable()?;
        let pts = grid.points();
        let sig: Vec<f64> = pts
            .par_iter()
            .map(|&w| self.freq_response(w).map(|m| sigma_max(&m)))
            .collect::<Result<_>>()?;
        let (imax, &smax) = sig
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid is nonempty");
        let mut best = HinfNorm { value: smax, peak_w: pts[imax] };

        let sigma_at = |w: f64| self.freq_response(w).map(|m| sigma_max(&m)).unwrap_or(0.0);
        let lo = if imax > 0 { pts[imax - 1] } else { pts[imax] };
        let hi = if imax + 1 < pts.len() { pts[imax + 1] } else { pts[imax] };
        if hi > lo {
            let (w, v) = if lo > 0.0 {
                let (lw, v) = golden_max(|lw| sigma_at(lw.exp()), lo.ln(), hi.ln(), 120);
                (lw.exp(), v)
            } else {
                golden_max(sigma_at, lo, hi, 120)
            };
            if v > best.value {
                best = HinfNorm { value: v, peak_w: w };
            }
        }
        if grid.include_limit() {
            let d = sigma_max(&crate::linalg::to_complex(&self.limit_matrix()));
            if d > best.value {
                best = HinfNorm { value: d, peak_w: f64::INFINITY };
            }
        }
        Ok(best)
    }
}

/// Nyquist samples of a stable scalar function over the mirrored grid, plus
/// the high-frequency limit (reported at `w = inf`).
pub fn nyquist_curve(g: &Rational, grid: &FrequencyGrid) -> Result<Vec<(f64, Complex64)>> {
    if let Some(pole) = g.unstable_pole() {
        return Err(Error::Unstable { pole });
    }
    let mut out = grid
        .signed()
        .into_iter()
        .map(|w| g.freq(w).map(|v| (w, v)))
        .collect::<Result<Vec<_>>>()?;
    out.push((f64::INFINITY, Complex64::new(g.high_freq_limit(), 0.0)));
    Ok(out)
}
