//! Feedback stability criteria.
//!
//! Every checker returns a [`StabilityVerdict`] with named margins; a verdict
//! passes exactly when all its margins are strictly positive. Criteria whose
//! class hypotheses are not met report [`Outcome::HypothesisUnmet`], which is
//! not evidence of instability. Phase inputs carry a provenance label, and
//! any empirical input marks the verdict as indicative only.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::EmpiricalPhase;
use crate::lti::{nyquist_curve, FrequencyGrid, Rational, TransferMatrix};
use crate::nrange::{matrix_phase_interval, MatrixPhase, PhaseInterval, SectorKind};
use crate::phase::{
    adjoint_multiplier_phase, deg, lti_phase, multiplier_phase, Disk, MultiplierSpec, PassivityIndices, SectorBound,
    SystemPhaseReport,
};

pub const DEFAULT_TOL_MARGIN: f64 = 1e-6;

/// Samples per circle when checking that the cone covers the disk.
pub const CONE_DISK_SAMPLES: usize = 720;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Fail,
    HypothesisUnmet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub criterion: String,
    pub outcome: Outcome,
    pub pass: bool,
    pub margins: BTreeMap<String, f64>,
    pub inputs: BTreeMap<String, f64>,
    pub provenance: Vec<String>,
    /// Set when some input phase was estimated rather than certified.
    pub indicative: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl StabilityVerdict {
    fn new(criterion: &str, provenance: Vec<String>) -> Self {
        let indicative = provenance.iter().any(|p| p.starts_with("empirical"));
        Self {
            criterion: criterion.into(),
            outcome: Outcome::Fail,
            pass: false,
            margins: BTreeMap::new(),
            inputs: BTreeMap::new(),
            provenance,
            indicative,
            note: None,
        }
    }

    fn margin(mut self, name: &str, value: f64) -> Self {
        self.margins.insert(name.into(), value);
        self
    }

    fn input(mut self, name: &str, value: f64) -> Self {
        self.inputs.insert(name.into(), value);
        self
    }

    /// Pass iff every margin is strictly positive.
    fn decide(mut self) -> Self {
        self.pass = !self.margins.is_empty() && self.margins.values().all(|m| *m > 0.0);
        self.outcome = if self.pass { Outcome::Pass } else { Outcome::Fail };
        self
    }

    fn unmet(mut self, note: impl Into<String>) -> Self {
        self.outcome = Outcome::HypothesisUnmet;
        self.pass = false;
        self.note = Some(note.into());
        self
    }

    pub fn is_unmet(&self) -> bool {
        self.outcome == Outcome::HypothesisUnmet
    }
}

/// Which class a phase input is known to belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseClass {
    Sectorial,
    SemiSectorial,
    Indefinite,
}

impl From<&SectorKind> for PhaseClass {
    fn from(k: &SectorKind) -> Self {
        match k {
            SectorKind::Sectorial { .. } => PhaseClass::Sectorial,
            SectorKind::SemiSectorial { .. } => PhaseClass::SemiSectorial,
            SectorKind::Indefinite => PhaseClass::Indefinite,
        }
    }
}

/// A phase interval together with its class and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseInput {
    pub interval: Option<PhaseInterval>,
    pub class: PhaseClass,
    pub provenance: String,
}

impl PhaseInput {
    pub fn new(interval: PhaseInterval, class: PhaseClass, provenance: impl Into<String>) -> Self {
        Self { interval: Some(interval), class, provenance: provenance.into() }
    }

    pub fn from_report(r: &SystemPhaseReport) -> Self {
        Self { interval: r.interval, class: (&r.verdict).into(), provenance: "lti-certified".into() }
    }

    /// A closed-form bound for a sectorial nonlinear class.
    pub fn closed_form(interval: PhaseInterval, provenance: impl Into<String>) -> Self {
        Self::new(interval, PhaseClass::Sectorial, provenance)
    }

    /// A sampled estimate; `class` is the caller's assumption about the system.
    pub fn empirical(e: &EmpiricalPhase, class: PhaseClass) -> Self {
        Self { interval: e.interval, class: if e.indefinite { PhaseClass::Indefinite } else { class }, provenance: "empirical".into() }
    }
}

pub fn small_gain_check(gp: f64, gc: f64) -> Result<StabilityVerdict> {
    if !(gp >= 0.0 && gc >= 0.0) {
        return Err(Error::Domain(format!("gains must be nonnegative, got {gp} and {gc}")));
    }
    Ok(StabilityVerdict::new("small-gain", vec![])
        .input("gain_p", gp)
        .input("gain_c", gc)
        .margin("gain", 1.0 - gp * gc)
        .decide())
}

fn phase_sums(criterion: &str, p: &PhaseInput, c: &PhaseInput) -> StabilityVerdict {
    let v = StabilityVerdict::new(criterion, vec![p.provenance.clone(), c.provenance.clone()]);
    let (Some(ip), Some(ic)) = (p.interval, c.interval) else {
        return v.unmet("a phase interval is undefined");
    };
    let v = v.input("p_lo_deg", ip.lo_deg()).input("p_hi_deg", ip.hi_deg()).input("c_lo_deg", ic.lo_deg()).input("c_hi_deg", ic.hi_deg());
    use PhaseClass::*;
    let ok = matches!((p.class, c.class), (Sectorial, Sectorial | SemiSectorial) | (SemiSectorial, Sectorial));
    if !ok {
        return v.unmet(format!("need one sectorial and one semi-sectorial side, got {:?} and {:?}", p.class, c.class));
    }
    v.margin("upper_deg", deg(PI - (ip.hi() + ic.hi()))).margin("lower_deg", deg(ip.lo() + ic.lo() + PI)).decide()
}

/// `hi_P + hi_C < pi` and `lo_P + lo_C > -pi`, with one side sectorial and
/// the other at least semi-sectorial.
pub fn small_phase_check(p: &PhaseInput, c: &PhaseInput) -> StabilityVerdict {
    phase_sums("small-phase", p, c)
}

/// Small phase condition on the `Pi`-phase of `P` and the `Pi^*`-phase of `C`.
pub fn generalized_small_phase_check(
    p: &TransferMatrix,
    c: &TransferMatrix,
    pi: &MultiplierSpec,
    grid: &FrequencyGrid,
    tol: f64,
) -> Result<StabilityVerdict> {
    if p.dim() != c.dim() {
        return Err(Error::ShapeMismatch(format!("P is {0}x{0}, C is {1}x{1}", p.dim(), c.dim())));
    }
    let rp = multiplier_phase(p, pi, grid, tol)?;
    let rc = adjoint_multiplier_phase(c, pi, grid, tol)?;
    let mut ip = PhaseInput::from_report(&rp);
    let mut ic = PhaseInput::from_report(&rc);
    ip.provenance = "lti-multiplier".into();
    ic.provenance = "lti-multiplier".into();
    Ok(phase_sums("generalized-small-phase", &ip, &ic))
}

fn freq_interval(m: &crate::linalg::CMat, tol: f64) -> Result<Option<Option<PhaseInterval>>> {
    match matrix_phase_interval(m, tol) {
        Ok(MatrixPhase::Sector(i)) => Ok(Some(Some(i))),
        Ok(MatrixPhase::Indefinite) => Ok(None),
        Err(Error::ZeroMatrix) => Ok(Some(None)),
        Err(e) => Err(e),
    }
}

/// Frequency-by-frequency small phase condition over the (positive) grid;
/// negative frequencies mirror the positive ones for real-rational systems.
pub fn freqwise_small_phase_check(p: &TransferMatrix, c: &TransferMatrix, grid: &FrequencyGrid, tol: f64) -> Result<StabilityVerdict> {
    if p.dim() != c.dim() {
        return Err(Error::ShapeMismatch(format!("P is {0}x{0}, C is {1}x{1}", p.dim(), c.dim())));
    }
    p.require_stable()?;
    c.require_stable()?;
    let v = StabilityVerdict::new("freqwise-small-phase", vec!["lti-certified".into(), "lti-certified".into()]);
    let rows: Vec<(f64, Option<Option<PhaseInterval>>, Option<Option<PhaseInterval>>)> = grid
        .points()
        .par_iter()
        .map(|&w| Ok((w, freq_interval(&p.freq_response(w)?, tol)?, freq_interval(&c.freq_response(w)?, tol)?)))
        .collect::<Result<_>>()?;
    let (mut upper, mut lower) = ((f64::INFINITY, f64::NAN), (f64::INFINITY, f64::NAN));
    for (w, pp, cc) in rows {
        let Some(Some(ip)) = pp.filter(|i| i.map_or(false, |i| i.spread() < PI)) else {
            return Ok(v.unmet(format!("P(jw) is not matrix-sectorial at w = {w}")));
        };
        let Some(ic) = cc else {
            return Ok(v.unmet(format!("C(jw) is indefinite at w = {w}")));
        };
        let Some(ic) = ic else { continue };
        let up = PI - (ip.hi() + ic.hi());
        let lo = ip.lo() + ic.lo() + PI;
        if up < upper.0 {
            upper = (up, w);
        }
        if lo < lower.0 {
            lower = (lo, w);
        }
    }
    if !upper.0.is_finite() {
        return Ok(v.unmet("C vanishes on the whole grid"));
    }
    Ok(v.margin("upper_deg", deg(upper.0))
        .margin("lower_deg", deg(lower.0))
        .input("worst_w_upper", upper.1)
        .input("worst_w_lower", lower.1)
        .decide())
}

/// Disk `D(-1/a, -1/b)` avoided by the Nyquist plot in the circle criterion,
/// and the forbidden cone `|arg z| >= pi - theta` spanned by it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForbiddenRegion {
    pub disk: Disk,
    /// `theta = arcsin((b - a)/(b + a))`.
    pub cone_half_angle: f64,
}

impl ForbiddenRegion {
    pub fn new(bound: &SectorBound) -> Self {
        let (a, b) = (bound.a(), bound.b());
        Self {
            disk: Disk { center: -(a + b) / (2.0 * a * b), radius: (b - a) / (2.0 * a * b) },
            cone_half_angle: bound.half_angle(),
        }
    }

    /// Open cone of admissible loop angles `(theta - pi, pi - theta)`.
    pub fn allowed_cone(&self) -> (f64, f64) {
        (self.cone_half_angle - PI, PI - self.cone_half_angle)
    }

    /// Whether every sampled boundary point of the disk lies in the forbidden cone.
    pub fn cone_contains_disk(&self) -> bool {
        let edge = PI - self.cone_half_angle;
        (0..CONE_DISK_SAMPLES).all(|k| {
            let t = 2.0 * PI * k as f64 / CONE_DISK_SAMPLES as f64;
            let z = Complex64::new(self.disk.center, 0.0) + Complex64::from_polar(self.disk.radius, t);
            z.norm() == 0.0 || z.arg().abs() >= edge - 1e-12
        })
    }
}

fn require_stable_scalar(g: &Rational) -> Result<()> {
    match g.unstable_pole() {
        Some(pole) => Err(Error::Unstable { pole }),
        None => Ok(()),
    }
}

/// Distance of the Nyquist plot (signed grid plus the limit) from the disk
/// `D(-1/a, -1/b)`; passes when it exceeds `tol_margin`.
pub fn circle_criterion_check(g: &Rational, bound: &SectorBound, grid: &FrequencyGrid, tol_margin: f64) -> Result<StabilityVerdict> {
    require_stable_scalar(g)?;
    let region = ForbiddenRegion::new(bound);
    let curve = nyquist_curve(g, grid)?;
    let (dmin, wmin) = curve
        .iter()
        .map(|(w, z)| (region.disk.distance(*z), *w))
        .fold((f64::INFINITY, f64::NAN), |acc, x| if x.0 < acc.0 { x } else { acc });
    Ok(StabilityVerdict::new("circle", vec!["lti-certified".into(), "sector-closed-form".into()])
        .input("a", bound.a())
        .input("b", bound.b())
        .input("disk_center", region.disk.center)
        .input("disk_radius", region.disk.radius)
        .input("worst_w", wmin)
        .margin("distance", dmin - tol_margin)
        .decide())
}

/// Phase version of the circle criterion: a semi-sectorial `P` whose angles
/// stay in `(theta - pi, pi - theta)`.
pub fn phase_cone_check(g: &Rational, bound: &SectorBound, grid: &FrequencyGrid, tol: f64) -> Result<StabilityVerdict> {
    require_stable_scalar(g)?;
    let region = ForbiddenRegion::new(bound);
    let v = StabilityVerdict::new("phase-cone", vec!["lti-certified".into(), "sector-closed-form".into()])
        .input("a", bound.a())
        .input("b", bound.b())
        .input("cone_half_angle_deg", deg(region.cone_half_angle))
        .input("cone_contains_disk", if region.cone_contains_disk() { 1.0 } else { 0.0 });
    let report = lti_phase(&TransferMatrix::scalar(g.clone()), grid, tol)?;
    if report.interval.is_none() {
        return Ok(v.unmet("P is not semi-sectorial"));
    }
    let edge = PI - region.cone_half_angle;
    let (worst, wworst) = nyquist_curve(g, grid)?
        .into_iter()
        .filter(|(_, z)| z.norm() > 1e-12)
        .map(|(w, z)| (edge - z.arg().abs(), w))
        .fold((f64::INFINITY, f64::NAN), |acc, x| if x.0 < acc.0 { x } else { acc });
    if !worst.is_finite() {
        return Ok(v.unmet("P vanishes on the grid"));
    }
    Ok(v.margin("cone_deg", deg(worst)).input("worst_w", wworst).decide())
}

/// Phase cone of a parallel connection: if both summands lie in `target`
/// (spread below `pi`) so does their sum. Returns the hull of the two inputs.
pub fn parallel_phase(a: &PhaseInterval, b: &PhaseInterval, target: &PhaseInterval) -> Result<PhaseInterval> {
    if !(target.spread() > 0.0 && target.spread() < PI) {
        return Err(Error::Hypothesis(format!("target spread {} is not in (0, pi)", target.spread())));
    }
    for (name, x) in [("first", a), ("second", b)] {
        if !target.contains_interval(x, 0.0) {
            return Err(Error::Hypothesis(format!("{name} interval [{}, {}] is outside the target", x.lo(), x.hi())));
        }
    }
    PhaseInterval::new(a.lo().min(b.lo()), a.hi().max(b.hi()))
}

/// Outer bounds on the phases of `e1 -> y1` and `e2 -> y2` in a stable loop.
pub fn closed_loop_phase_bound(p: &PhaseInterval, c: &PhaseInterval) -> Result<(PhaseInterval, PhaseInterval)> {
    if !(p.hi() + c.hi() <= PI && p.lo() + c.lo() >= -PI) {
        return Err(Error::Hypothesis(format!(
            "phase sums [{}, {}] leave [-pi, pi]",
            p.lo() + c.lo(),
            p.hi() + c.hi()
        )));
    }
    let g1 = PhaseInterval::new(p.lo().min(-c.hi()), p.hi().max(-c.lo()))?;
    let g2 = PhaseInterval::new(c.lo().min(-p.hi()), c.hi().max(-p.lo()))?;
    Ok((g1, g2))
}

/// Index form of the passivity theorem: `delta1 + eps2 > 0` and `delta2 + eps1 > 0`.
pub fn passivity_index_check(p: &PassivityIndices, c: &PassivityIndices) -> StabilityVerdict {
    StabilityVerdict::new("passivity-index", vec![])
        .input("delta_p", p.delta)
        .input("epsilon_p", p.epsilon)
        .input("delta_c", c.delta)
        .input("epsilon_c", c.epsilon)
        .margin("delta_p_plus_epsilon_c", p.delta + c.epsilon)
        .margin("delta_c_plus_epsilon_p", c.delta + p.epsilon)
        .decide()
}
