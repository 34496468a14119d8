//! System phase.
//!
//! For a stable transfer matrix the phase sector is read off the numerical
//! ranges of `P(jw)` over a frequency grid: a single rotation `alpha` that
//! puts every `P(jw)` into a closed half-plane certifies semi-sectoriality,
//! and the interval of the system is the envelope of the per-frequency ones.
//! Each frequency node is scaled to unit Frobenius norm before the rotation
//! search so that lightly damped peaks and roll-off do not dominate; angles
//! are unaffected by the scaling.
//!
//! For strictly proper systems the closure of the range also contains the
//! direction in which `P(jw)` vanishes, `Q (-j)^k` where `k` is the smallest
//! relative degree; that direction is added as an extra node.
//!
//! Static nonlinear classes (sector maps, logarithmic quantizers, very
//! strictly passive systems) have closed-form phase bounds, also provided here.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::linalg::{fro_norm, lambda_min, lambda_min_rotated, rotated_hermitian, sigma_max, to_complex, CMat};
use crate::lti::{FrequencyGrid, HinfNorm, TransferMatrix};
use crate::nrange::{
    bisect_epsilon, matrix_phase_interval, scan_profile, sector_margin, support_arc, wrap_angle, MatrixPhase,
    PhaseInterval, SectorKind,
};
use crate::signal::{hilbert_real, inner_real, RealSignal};

pub use crate::nrange::DEFAULT_TOL;

/// Verdict on the sectoriality of a system.
pub type SectorVerdict = SectorKind;

/// Normalized sector margin below which a system counts as only semi-sectorial.
pub const SECTORIAL_THRESHOLD: f64 = 1e-6;

/// Phase data at one frequency; `lo`/`hi` are absent where the matrix is
/// indefinite or zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPhase {
    pub w: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl FrequencyPhase {
    pub fn interval(&self) -> Option<PhaseInterval> {
        Some(PhaseInterval::new(self.lo?, self.hi?).expect("stored intervals are valid"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemPhaseReport {
    pub interval: Option<PhaseInterval>,
    pub verdict: SectorVerdict,
    pub per_frequency: Vec<FrequencyPhase>,
    /// Phase of the feedthrough matrix when it takes part (`w = inf`).
    pub limit: Option<FrequencyPhase>,
    pub hinf: Option<HinfNorm>,
    pub nu_index: Option<f64>,
}

impl SystemPhaseReport {
    pub fn is_sectorial(&self) -> bool {
        matches!(self.verdict, SectorKind::Sectorial { .. })
    }

    pub fn is_semi_sectorial(&self) -> bool {
        !matches!(self.verdict, SectorKind::Indefinite)
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.verdict {
            SectorKind::Sectorial { alpha, .. } | SectorKind::SemiSectorial { alpha } => Some(alpha),
            SectorKind::Indefinite => None,
        }
    }

    pub fn verdict_name(&self) -> &'static str {
        match self.verdict {
            SectorKind::Sectorial { .. } => "sectorial",
            SectorKind::SemiSectorial { .. } => "semi-sectorial",
            SectorKind::Indefinite => "indefinite",
        }
    }

    /// Envelope of the per-frequency intervals (including the limit node),
    /// aligned to the branch of `reference`.
    pub fn per_frequency_envelope(&self, reference: &PhaseInterval) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for fp in self.per_frequency.iter().chain(self.limit.iter()) {
            let i = fp.interval()?;
            let shift = wrap_angle(i.center() - reference.center()) - (i.center() - reference.center());
            lo = lo.min(i.lo() + shift);
            hi = hi.max(i.hi() + shift);
        }
        lo.is_finite().then_some((lo, hi))
    }
}

impl Serialize for SystemPhaseReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("SystemPhaseReport", 12)?;
        let i = self.interval;
        st.serialize_field("phase_lo_rad", &i.map(|i| i.lo()))?;
        st.serialize_field("phase_hi_rad", &i.map(|i| i.hi()))?;
        st.serialize_field("phase_lo_deg", &i.map(|i| i.lo_deg()))?;
        st.serialize_field("phase_hi_deg", &i.map(|i| i.hi_deg()))?;
        st.serialize_field("verdict", self.verdict_name())?;
        st.serialize_field("alpha_rad", &self.alpha())?;
        let eps = match self.verdict {
            SectorKind::Sectorial { epsilon, .. } => Some(epsilon),
            _ => None,
        };
        st.serialize_field("epsilon", &eps)?;
        st.serialize_field("hinf", &self.hinf.map(|h| h.value))?;
        st.serialize_field("hinf_peak_w", &self.hinf.and_then(|h| h.peak_w.is_finite().then_some(h.peak_w)))?;
        st.serialize_field("nu_index", &self.nu_index)?;
        st.serialize_field("limit", &self.limit.map(|l| (l.lo, l.hi)))?;
        st.serialize_field("per_frequency", &self.per_frequency)?;
        st.end()
    }
}

/// Sampled scalar multiplier `Pi(jw)` of unit modulus on a frequency grid,
/// extended to negative frequencies by conjugation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSpec {
    w: Vec<f64>,
    values: Vec<Complex64>,
    at_infinity: Option<Complex64>,
}

impl MultiplierSpec {
    const UNIT_TOL: f64 = 1e-12;

    pub fn new(w: Vec<f64>, values: Vec<Complex64>, at_infinity: Option<Complex64>) -> Result<Self> {
        if w.len() != values.len() || w.is_empty() {
            return Err(invalid("multiplier needs one value per grid point"));
        }
        if w.windows(2).any(|p| p[1] <= p[0]) || w[0] < 0.0 {
            return Err(invalid("multiplier grid must be nonnegative and increasing"));
        }
        if values.iter().chain(at_infinity.iter()).any(|v| (v.norm() - 1.0).abs() > Self::UNIT_TOL) {
            return Err(Error::Domain("multiplier must have unit modulus at every node".into()));
        }
        Ok(Self { w, values, at_infinity })
    }

    /// `Pi = 1`, defined at infinity as well.
    pub fn identity(grid: &FrequencyGrid) -> Self {
        let w = grid.points().to_vec();
        let values = vec![Complex64::new(1.0, 0.0); w.len()];
        Self { w, values, at_infinity: Some(Complex64::new(1.0, 0.0)) }
    }

    pub fn points(&self) -> &[f64] {
        &self.w
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at_infinity(&self) -> Option<Complex64> {
        self.at_infinity
    }

    /// Value at a grid frequency (either sign); `None` off the grid.
    pub fn eval(&self, w: f64) -> Option<Complex64> {
        let idx = self.w.binary_search_by(|p| p.total_cmp(&w.abs())).ok()?;
        let v = self.values[idx];
        Some(if w < 0.0 { v.conj() } else { v })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencywisePhase {
    pub per_frequency: Vec<(f64, Option<PhaseInterval>)>,
    pub limit: Option<PhaseInterval>,
    pub multiplier: MultiplierSpec,
    /// `min_w lambda_min(He(Pi(jw)^* P(jw)))`.
    pub delta: f64,
}

/// Frequency nodes of a (possibly multiplier-weighted) response.
struct Nodes {
    raw: Vec<CMat>,
    normalized: Vec<CMat>,
    /// Unit-norm high-frequency direction of a strictly proper system.
    asymptote: Option<CMat>,
}

#[derive(Clone, Copy)]
enum Weight<'a> {
    None,
    /// Multiply by `conj(Pi)`.
    Conj(&'a MultiplierSpec),
    /// Multiply by `Pi`.
    Plain(&'a MultiplierSpec),
}

impl Weight<'_> {
    fn spec(&self) -> Option<&MultiplierSpec> {
        match self {
            Weight::None => None,
            Weight::Conj(m) | Weight::Plain(m) => Some(m),
        }
    }

    fn apply(&self, v: Complex64) -> Complex64 {
        match self {
            Weight::Conj(_) => v.conj(),
            _ => v,
        }
    }

    fn at(&self, idx: usize) -> Complex64 {
        match self.spec() {
            None => Complex64::new(1.0, 0.0),
            Some(m) => self.apply(m.values[idx]),
        }
    }

    /// Weight at infinity; `None` means the limit nodes are skipped.
    fn at_infinity(&self) -> Option<Complex64> {
        match self.spec() {
            None => Some(Complex64::new(1.0, 0.0)),
            Some(m) => m.at_infinity.map(|v| self.apply(v)),
        }
    }
}

fn normalize(a: &CMat) -> Option<CMat> {
    let f = fro_norm(a);
    (f > 0.0).then(|| a / Complex64::new(f, 0.0))
}

fn collect_nodes(p: &TransferMatrix, grid: &FrequencyGrid, weight: Weight) -> Result<Nodes> {
    if let Some(m) = weight.spec() {
        if m.points() != grid.points() {
            return Err(invalid("multiplier is sampled on a different grid"));
        }
    }
    let mut raw: Vec<CMat> = grid
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, &w)| p.freq_response(w).map(|m| m * weight.at(i)))
        .collect::<Result<_>>()?;
    let mut asymptote = None;
    if grid.include_limit() {
        if let Some(winf) = weight.at_infinity() {
            let d = p.limit_matrix();
            if d.iter().any(|v| *v != 0.0) {
                raw.push(to_complex(&d) * winf);
            } else if let Some(a) = p.asymptote() {
                asymptote = normalize(&(a.direction * winf));
            }
        }
    }
    let normalized: Vec<CMat> = raw.iter().filter_map(normalize).collect();
    if normalized.is_empty() && asymptote.is_none() {
        return Err(Error::ZeroMatrix);
    }
    Ok(Nodes { raw, normalized, asymptote })
}

fn nodes_phase(nodes: &Nodes, tol: f64) -> (SectorVerdict, Option<PhaseInterval>) {
    let g = |alpha: f64| {
        let m = nodes.normalized.iter().map(|a| lambda_min_rotated(a, alpha)).fold(f64::INFINITY, f64::min);
        match &nodes.asymptote {
            Some(d) => m.min(lambda_min_rotated(d, alpha)),
            None => m,
        }
    };
    let profile = scan_profile(&g);
    let Some(arc) = support_arc(&g, &profile, tol) else {
        return (SectorKind::Indefinite, None);
    };
    let interval = arc.phase_interval();
    let alpha = wrap_angle(arc.center());

    let hi_norm = nodes.normalized.iter().map(|a| 0.5 / sigma_max(a)).fold(f64::INFINITY, f64::min);
    let eps_hat = bisect_epsilon(
        |e| nodes.normalized.par_iter().all(|a| sector_margin(a, alpha, e) >= -tol),
        if hi_norm.is_finite() { hi_norm } else { 0.5 },
    );
    let asym_ok = nodes.asymptote.as_ref().map_or(true, |d| lambda_min_rotated(d, alpha) > SECTORIAL_THRESHOLD);
    let sectorial = arc.g_star >= 0.0 && arc.alpha1 < arc.alpha2 && eps_hat > SECTORIAL_THRESHOLD && asym_ok;
    if !sectorial {
        return (SectorKind::SemiSectorial { alpha }, Some(interval));
    }
    let scale = nodes.raw.iter().map(fro_norm).fold(0.0, f64::max);
    let hi_raw = nodes.raw.iter().filter(|a| fro_norm(a) > 0.0).map(|a| 0.5 / sigma_max(a)).fold(f64::INFINITY, f64::min);
    let epsilon = bisect_epsilon(
        |e| nodes.raw.par_iter().all(|a| sector_margin(a, alpha, e) >= -tol * scale),
        if hi_raw.is_finite() { hi_raw } else { 0.5 },
    );
    (SectorKind::Sectorial { alpha, epsilon }, Some(interval))
}

fn frequency_phase(w: f64, a: &CMat, tol: f64) -> Result<FrequencyPhase> {
    match matrix_phase_interval(a, tol) {
        Ok(MatrixPhase::Sector(i)) => Ok(FrequencyPhase { w, lo: Some(i.lo()), hi: Some(i.hi()) }),
        Ok(MatrixPhase::Indefinite) | Err(Error::ZeroMatrix) => Ok(FrequencyPhase { w, lo: None, hi: None }),
        Err(e) => Err(e),
    }
}

fn weighted_phase(p: &TransferMatrix, grid: &FrequencyGrid, weight: Weight, tol: f64) -> Result<SystemPhaseReport> {
    p.require_stable()?;
    let nodes = collect_nodes(p, grid, weight)?;
    let (verdict, interval) = nodes_phase(&nodes, tol);
    let npts = grid.points().len();
    let per_frequency = grid
        .points()
        .par_iter()
        .zip(nodes.raw[..npts].par_iter())
        .map(|(&w, a)| frequency_phase(w, a, tol))
        .collect::<Result<Vec<_>>>()?;
    let limit = match nodes.raw.get(npts) {
        Some(d) => Some(frequency_phase(f64::INFINITY, d, tol)?),
        None => None,
    };
    Ok(SystemPhaseReport { interval, verdict, per_frequency, limit, hinf: None, nu_index: None })
}

/// Phase sector and sectoriality verdict of a stable transfer matrix.
pub fn lti_phase(p: &TransferMatrix, grid: &FrequencyGrid, tol: f64) -> Result<SystemPhaseReport> {
    weighted_phase(p, grid, Weight::None, tol)
}

/// Phase of `Pi^* P` (the `Pi`-phase of `P`).
pub fn multiplier_phase(p: &TransferMatrix, pi: &MultiplierSpec, grid: &FrequencyGrid, tol: f64) -> Result<SystemPhaseReport> {
    weighted_phase(p, grid, Weight::Conj(pi), tol)
}

/// Phase of `Pi C` (the `Pi^*`-phase of `C`).
pub fn adjoint_multiplier_phase(c: &TransferMatrix, pi: &MultiplierSpec, grid: &FrequencyGrid, tol: f64) -> Result<SystemPhaseReport> {
    weighted_phase(c, grid, Weight::Plain(pi), tol)
}

/// [`lti_phase`] together with the H-infinity norm and the symmetric passivity index.
pub fn analyze_lti(p: &TransferMatrix, grid: &FrequencyGrid, tol: f64) -> Result<SystemPhaseReport> {
    let mut report = lti_phase(p, grid, tol)?;
    report.hinf = Some(p.hinf_norm(grid)?);
    report.nu_index = Some(lti_passivity_index(p, grid)?);
    Ok(report)
}

/// Per-frequency phases and the centering multiplier `Pi(jw) = e^{j phi_c(w)}`,
/// which rotates each `P(jw)` so that `Pi^* P` is centered on the positive
/// real axis. Frequencies where `P(jw) = 0` get `Pi = 1`.
pub fn lti_phase_frequencywise(p: &TransferMatrix, grid: &FrequencyGrid, tol: f64) -> Result<FrequencywisePhase> {
    p.require_stable()?;
    let pts = grid.points();
    let evaluated: Vec<(CMat, Option<PhaseInterval>)> = pts
        .par_iter()
        .map(|&w| {
            let a = p.freq_response(w)?;
            let ph = match matrix_phase_interval(&a, tol) {
                Ok(MatrixPhase::Sector(i)) => Some(i),
                Ok(MatrixPhase::Indefinite) => return Err(Error::Hypothesis(format!("P(jw) is indefinite at w = {w}"))),
                Err(Error::ZeroMatrix) => None,
                Err(e) => return Err(e),
            };
            Ok((a, ph))
        })
        .collect::<Result<_>>()?;
    let center = |ph: &Option<PhaseInterval>| ph.map_or(Complex64::new(1.0, 0.0), |i| Complex64::from_polar(1.0, i.center()));
    let values: Vec<Complex64> = evaluated.iter().map(|(_, ph)| center(ph)).collect();

    let mut limit = None;
    let mut at_infinity = None;
    let d = p.limit_matrix();
    if grid.include_limit() && d.iter().any(|v| *v != 0.0) {
        let dc = to_complex(&d);
        match matrix_phase_interval(&dc, tol)? {
            MatrixPhase::Sector(i) => {
                limit = Some(i);
                at_infinity = Some(Complex64::from_polar(1.0, i.center()));
            }
            MatrixPhase::Indefinite => return Err(Error::Hypothesis("feedthrough matrix is indefinite".into())),
        }
    }

    let mut delta = evaluated
        .iter()
        .zip(&values)
        .map(|((a, _), pi)| lambda_min(&rotated_hermitian(a, -pi.arg())))
        .fold(f64::INFINITY, f64::min);
    if let (Some(pi), true) = (at_infinity, limit.is_some()) {
        delta = delta.min(lambda_min(&rotated_hermitian(&to_complex(&d), -pi.arg())));
    }
    let multiplier = MultiplierSpec::new(pts.to_vec(), values, at_infinity)?;
    let per_frequency = pts.iter().copied().zip(evaluated.into_iter().map(|(_, ph)| ph)).collect();
    Ok(FrequencywisePhase { per_frequency, limit, multiplier, delta })
}

/// Static sector `(h(x) - a x)(h(x) - b x) <= 0` with `0 < a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorBound {
    a: f64,
    b: f64,
}

impl SectorBound {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > a) {
            return Err(Error::Domain(format!("sector bound needs 0 < a < b, got a = {a}, b = {b}")));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `arcsin((b - a) / (b + a))`.
    pub fn half_angle(&self) -> f64 {
        ((self.b - self.a) / (self.b + self.a)).asin()
    }

    /// Indices `(ab/(a+b), 1/(a+b))` under which the sector is very strictly passive.
    pub fn passivity_indices(&self) -> PassivityIndices {
        PassivityIndices { delta: self.a * self.b / (self.a + self.b), epsilon: 1.0 / (self.a + self.b) }
    }
}

/// A closed disk on the real axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: f64,
    pub radius: f64,
}

impl Disk {
    pub fn distance(&self, z: Complex64) -> f64 {
        (z - self.center).norm() - self.radius
    }
}

/// Phase bound of a sector nonlinearity and the disk `D(a, b)` that contains
/// its graph's slopes: center `(a + b)/2`, radius `(b - a)/2`.
pub fn sector_phase(bound: &SectorBound) -> (PhaseInterval, Disk) {
    let interval = PhaseInterval::symmetric(bound.half_angle()).expect("half angle is below pi/2");
    let disk = Disk { center: 0.5 * (bound.a + bound.b), radius: 0.5 * (bound.b - bound.a) };
    (interval, disk)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerParams {
    rho: f64,
}

impl QuantizerParams {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Domain(format!("quantization density must lie in (0, 1), got {rho}")));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Sector `(2 rho/(1 + rho), 2/(1 + rho))` of the logarithmic quantizer.
pub fn quantizer_sector(q: &QuantizerParams) -> SectorBound {
    let r = q.rho;
    SectorBound::new(2.0 * r / (1.0 + r), 2.0 / (1.0 + r)).expect("0 < rho < 1 gives a valid sector")
}

/// Input and output passivity indices: `<u, Pu> >= delta |u|^2 + epsilon |Pu|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassivityIndices {
    pub delta: f64,
    pub epsilon: f64,
}

/// `[-arcsin sqrt(1 - 4 delta epsilon), +...]` for very strictly passive systems.
pub fn vsp_phase(idx: &PassivityIndices) -> Result<PhaseInterval> {
    let (d, e) = (idx.delta, idx.epsilon);
    let prod = d * e;
    if !(d > 0.0 && e > 0.0 && prod <= 0.25) {
        return Err(Error::Domain(format!("need delta, epsilon > 0 with delta*epsilon <= 1/4, got {d}, {e}")));
    }
    PhaseInterval::symmetric((1.0 - 4.0 * prod).max(0.0).sqrt().asin())
}

/// Largest `nu` with `He(P(jw)) >= nu (I + P(jw)^* P(jw))` on the grid (and
/// at the feedthrough when the grid includes the limit), i.e. the passivity
/// index with `delta = epsilon = nu`.
pub fn lti_passivity_index(p: &TransferMatrix, grid: &FrequencyGrid) -> Result<f64> {
    p.require_stable()?;
    let n = p.dim();
    let mut nodes: Vec<CMat> = grid.points().par_iter().map(|&w| p.freq_response(w)).collect::<Result<_>>()?;
    if grid.include_limit() {
        nodes.push(to_complex(&p.limit_matrix()));
    }
    let pairs: Vec<(CMat, CMat)> = nodes
        .into_iter()
        .map(|a| {
            let he = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
            let q = CMat::identity(n, n) + a.adjoint() * &a;
            (he, q)
        })
        .collect();
    let margin = |nu: f64| {
        pairs
            .par_iter()
            .map(|(he, q)| lambda_min(&(he - q * Complex64::new(nu, 0.0))))
            .reduce(|| f64::INFINITY, f64::min)
    };
    let mut lo = -1.0;
    while margin(lo) < 0.0 {
        lo *= 2.0;
        if lo < -1e12 {
            return Err(Error::Domain("passivity index below -1e12".into()));
        }
    }
    let mut hi = 0.5;
    if margin(hi) >= 0.0 {
        return Ok(hi);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if margin(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `<u, cos(alpha) y - sin(alpha) H y>`.
pub fn supply_rate_check(u: &RealSignal, y: &RealSignal, alpha: f64) -> Result<f64> {
    u.same_shape(y)?;
    let hy = hilbert_real(y)?;
    Ok(alpha.cos() * inner_real(u, y)? - alpha.sin() * inner_real(u, &hy)?)
}

/// `<u, H y> / <u, y>`, or `None` when the real energy `<u, y>` vanishes
/// relative to `|u| |y|`.
pub fn reactive_ratio(u: &RealSignal, y: &RealSignal) -> Result<Option<f64>> {
    u.same_shape(y)?;
    let real = inner_real(u, y)?;
    if real.abs() <= 1e-12 * u.norm() * y.norm() {
        return Ok(None);
    }
    Ok(Some(inner_real(u, &hilbert_real(y)?)? / real))
}

/// Degrees, for reports.
pub fn deg(x: f64) -> f64 {
    x * 180.0 / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::lti::Rational;
    use crate::signal::{gen_corpus, CorpusSpec};
    use crate::sim::simulate;
    use nalgebra::DMatrix;

    fn lag() -> TransferMatrix {
        TransferMatrix::scalar(Rational::new(vec![1.0], vec![1.0, 1.0]).unwrap())
    }

    fn lag2() -> TransferMatrix {
        TransferMatrix::scalar(Rational::new(vec![1.0], vec![1.0, 2.0, 1.0]).unwrap())
    }

    #[test]
    fn identity_is_sectorial_with_zero_phase() {
        let r = lti_phase(&TransferMatrix::identity(2), &FrequencyGrid::default(), DEFAULT_TOL).unwrap();
        let i = r.interval.unwrap();
        assert!(i.lo().abs() < 1e-9 && i.hi().abs() < 1e-9);
        assert!(r.is_sectorial());
    }

    #[test]
    fn first_order_lag_phase() {
        let r = lti_phase(&lag(), &FrequencyGrid::default(), DEFAULT_TOL).unwrap();
        let i = r.interval.unwrap();
        assert!((i.lo() + PI / 2.0).abs() < 0.01, "{i:?}");
        assert!(i.hi().abs() < 0.01, "{i:?}");
        assert!(r.is_semi_sectorial());
        // output strictly passive: He(P) >= 2 eps |P|^2 holds with eps > 0
        assert!(r.is_sectorial());
    }

    #[test]
    fn double_lag_has_spread_pi() {
        let r = lti_phase(&lag2(), &FrequencyGrid::default(), DEFAULT_TOL).unwrap();
        assert!(matches!(r.verdict, SectorKind::SemiSectorial { .. }), "{:?}", r.verdict);
        let i = r.interval.unwrap();
        assert!((i.spread() - PI).abs() < 1e-6);
    }

    #[test]
    fn scaling_leaves_phase_unchanged() {
        let grid = FrequencyGrid::log(1e-2, 1e3, 300).unwrap();
        let p = bundled::mimo_plant();
        let a = lti_phase(&p, &grid, DEFAULT_TOL).unwrap().interval.unwrap();
        let b = lti_phase(&p.scaled(7.5), &grid, DEFAULT_TOL).unwrap().interval.unwrap();
        assert!((a.lo() - b.lo()).abs() < 1e-9 && (a.hi() - b.hi()).abs() < 1e-9);
    }

    #[test]
    fn global_interval_is_envelope_of_frequencies() {
        let grid = FrequencyGrid::log(1e-3, 1e4, 400).unwrap();
        let r = lti_phase(&bundled::mimo_plant(), &grid, DEFAULT_TOL).unwrap();
        let i = r.interval.unwrap();
        let (lo, hi) = r.per_frequency_envelope(&i).unwrap();
        assert!(lo >= i.lo() - 1e-7 && hi <= i.hi() + 1e-7);
        // the asymptotic direction only adds -pi/2, which is inside the envelope here
        assert!((lo - i.lo()).abs() < 1e-6 && (hi - i.hi()).abs() < 1e-6, "{lo} {hi} {i:?}");
    }

    #[test]
    fn unstable_is_rejected() {
        let p = TransferMatrix::scalar(Rational::new(vec![1.0], vec![1.0, -1.0]).unwrap());
        assert!(matches!(lti_phase(&p, &FrequencyGrid::default(), DEFAULT_TOL), Err(Error::Unstable { .. })));
    }

    #[test]
    fn frequencywise_multiplier_for_double_lag() {
        let grid = FrequencyGrid::default();
        let f = lti_phase_frequencywise(&lag2(), &grid, DEFAULT_TOL).unwrap();
        for ((w, ph), pi) in f.per_frequency.iter().zip(f.multiplier.values()) {
            let expect = -2.0 * w.atan();
            let ph = ph.unwrap();
            assert!((ph.lo() - expect).abs() < 1e-6 && (ph.hi() - expect).abs() < 1e-6);
            assert!((pi - Complex64::from_polar(1.0, expect)).norm() < 1e-6);
        }
        let wmax = grid.max();
        assert!((f.delta - 1.0 / (1.0 + wmax * wmax)).abs() < 1e-12);
        assert!(f.multiplier.at_infinity().is_none());
        let w = grid.points()[700];
        assert_eq!(f.multiplier.eval(-w).unwrap(), f.multiplier.eval(w).unwrap().conj());
    }

    #[test]
    fn frequencywise_identity() {
        let f = lti_phase_frequencywise(&TransferMatrix::identity(2), &FrequencyGrid::default(), DEFAULT_TOL).unwrap();
        assert!(f.multiplier.values().iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-9));
        assert!((f.delta - 1.0).abs() < 1e-9);
    }

    #[test]
    fn centered_multiplier_centers_the_mimo_plant() {
        let grid = FrequencyGrid::log(1e-2, 1e2, 200).unwrap();
        let p = bundled::mimo_plant();
        let f = lti_phase_frequencywise(&p, &grid, DEFAULT_TOL).unwrap();
        for (k, &w) in grid.points().iter().enumerate() {
            let rotated = p.freq_response(w).unwrap() * f.multiplier.values()[k].conj();
            let i = matrix_phase_interval(&rotated, DEFAULT_TOL).unwrap().interval().unwrap();
            assert!(i.center().abs() < 1e-6, "w = {w}: {i:?}");
        }
    }

    #[test]
    fn multiplier_rejects_non_unit_values() {
        let r = MultiplierSpec::new(vec![0.0, 1.0], vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)], None);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn closed_form_bounds() {
        let s = quantizer_sector(&QuantizerParams::new(1.0 / 3.0).unwrap());
        assert!((s.a() - 0.5).abs() < 1e-15 && (s.b() - 1.5).abs() < 1e-15);
        let (i, disk) = sector_phase(&s);
        assert!((i.hi() - PI / 6.0).abs() < 1e-12);
        assert_eq!(disk, Disk { center: 1.0, radius: 0.5 });
        let (i, _) = sector_phase(&SectorBound::new(1.0, 3.0).unwrap());
        assert!((i.hi() - PI / 6.0).abs() < 1e-12);
        assert!(SectorBound::new(1.0, 1.0).is_err());

        let half = quantizer_sector(&QuantizerParams::new(0.5).unwrap());
        assert!((half.a() - 2.0 / 3.0).abs() < 1e-15 && (half.b() - 4.0 / 3.0).abs() < 1e-15);
        let fine = quantizer_sector(&QuantizerParams::new(0.999).unwrap());
        assert!((sector_phase(&fine).0.hi() - (0.001f64 / 1.999).asin()).abs() < 1e-12);
        assert!(QuantizerParams::new(1.0).is_err());
    }

    #[test]
    fn vsp_bounds() {
        let i = vsp_phase(&PassivityIndices { delta: 2.0 / 3.0, epsilon: 1.0 / 3.0 }).unwrap();
        assert!((i.hi_deg() - 19.4712).abs() < 5e-5);
        let z = vsp_phase(&PassivityIndices { delta: 0.5, epsilon: 0.5 }).unwrap();
        assert_eq!(z.hi(), 0.0);
        assert!(vsp_phase(&PassivityIndices { delta: 1.0, epsilon: 1.0 }).is_err());
        let s = SectorBound::new(0.7, 2.9).unwrap();
        let a = vsp_phase(&s.passivity_indices()).unwrap();
        assert!((a.hi() - sector_phase(&s).0.hi()).abs() < 1e-12);
    }

    #[test]
    fn passivity_index_of_identity_and_lag() {
        let grid = FrequencyGrid::default();
        let nu = lti_passivity_index(&TransferMatrix::identity(2), &grid).unwrap();
        assert!((nu - 0.5).abs() < 1e-12);
        // at w -> inf, P -> 0 leaves no output surplus: the index is 0
        let nu = lti_passivity_index(&lag(), &grid).unwrap();
        assert!(nu.abs() < 1e-12, "{nu}");
        let finite = FrequencyGrid::from_points(grid.points().to_vec(), false).unwrap();
        let nu = lti_passivity_index(&lag(), &finite).unwrap();
        let wmax = grid.max();
        assert!((nu - 1.0 / (2.0 + wmax * wmax)).abs() < 1e-12, "{nu}");
    }

    #[test]
    fn passivity_bridge() {
        let grid = FrequencyGrid::log(1e-2, 1e2, 200).unwrap();
        for p in [lag(), TransferMatrix::identity(2), TransferMatrix::constant(&DMatrix::from_row_slice(2, 2, &[2.0, 0.5, -0.5, 1.0])).unwrap()] {
            if lti_passivity_index(&p, &grid).unwrap() >= 0.0 {
                let i = lti_phase(&p, &grid, DEFAULT_TOL).unwrap().interval.unwrap();
                assert!(i.lo() >= -PI / 2.0 - 1e-9 && i.hi() <= PI / 2.0 + 1e-9);
            }
        }
    }

    fn small_corpus(count: usize) -> Vec<RealSignal> {
        gen_corpus(&CorpusSpec::with_window(11, 1, 8192, 1e-2, count)).unwrap()
    }

    #[test]
    fn supply_rate_identities() {
        for u in small_corpus(6) {
            let n2 = u.norm_sq();
            assert!((supply_rate_check(&u, &u, 0.0).unwrap() - n2).abs() < 1e-12 * n2);
            assert!(supply_rate_check(&u, &u, PI / 2.0).unwrap().abs() < 1e-9 * n2);
            assert!(reactive_ratio(&u, &u).unwrap().unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn supply_rate_of_passive_lag() {
        let ss = crate::lti::realize(&lag()).unwrap();
        for u in small_corpus(12) {
            let y = simulate(&ss, &u).unwrap();
            assert!(supply_rate_check(&u, &y, 0.0).unwrap() >= -1e-9 * u.norm() * y.norm());
        }
    }

    #[test]
    fn reactive_ratio_of_tone_through_lag() {
        let dt = 1e-2;
        let len = 16_384;
        let w = 2.0 * PI * 26.0 / (len as f64 * dt);
        let u = RealSignal::from_fn(len, 1, dt, |t, _| (w * t).cos()).unwrap();
        let p = Rational::new(vec![1.0], vec![1.0, 1.0]).unwrap().freq(w).unwrap();
        let y = RealSignal::from_fn(len, 1, dt, |t, _| p.norm() * (w * t + p.arg()).cos()).unwrap();
        let r = reactive_ratio(&u, &y).unwrap().unwrap();
        assert!((r - p.arg().tan()).abs() < 0.02, "{r} vs {}", p.arg().tan());
        // a pure quadrature output has no real energy
        let q = RealSignal::from_fn(len, 1, dt, |t, _| (w * t).sin()).unwrap();
        assert_eq!(reactive_ratio(&u, &q).unwrap(), None);
    }
}
