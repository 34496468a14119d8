//! Sampling-based phase and passivity estimates for systems available only
//! through simulation.
//!
//! Each corpus input `u` contributes the complex number `<u_a, y>` with
//! `y = sys(u)` and `u_a` the analytic signal of `u`. The angles of these
//! samples form an inner approximation of the phase sector: adding inputs can
//! only widen it, and nothing here is a certificate.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nrange::PhaseInterval;
use crate::signal::{analytic, inner_mixed, inner_real, RealSignal};
use crate::sim::{simulate, Dynamics};

/// Relative magnitude below which a sample has no defined angle.
pub const EXCLUSION_THRESHOLD: f64 = 1e-12;

/// A black-box input-output map on sampled signals.
pub trait SignalMap: Sync {
    fn apply(&self, u: &RealSignal) -> Result<RealSignal>;

    /// Whether distinct inputs may be processed concurrently.
    fn parallel_safe(&self) -> bool {
        true
    }
}

impl<F> SignalMap for F
where
    F: Fn(&RealSignal) -> Result<RealSignal> + Sync,
{
    fn apply(&self, u: &RealSignal) -> Result<RealSignal> {
        self(u)
    }
}

/// Wraps a simulated system as a [`SignalMap`].
pub struct Simulated<'a>(pub &'a dyn Dynamics);

impl SignalMap for Simulated<'_> {
    fn apply(&self, u: &RealSignal) -> Result<RealSignal> {
        simulate(self.0, u)
    }
}

/// Parallel connection `u -> N1 u + N2 u`.
pub struct Parallel<'a, A: SignalMap, B: SignalMap>(pub &'a A, pub &'a B);

impl<A: SignalMap, B: SignalMap> SignalMap for Parallel<'_, A, B> {
    fn apply(&self, u: &RealSignal) -> Result<RealSignal> {
        self.0.apply(u)?.add_scaled(1.0, &self.1.apply(u)?)
    }

    fn parallel_safe(&self) -> bool {
        self.0.parallel_safe() && self.1.parallel_safe()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseSample {
    pub id: usize,
    pub z: Complex64,
    pub norm_u: f64,
    pub norm_y: f64,
    pub excluded: bool,
}

impl PhaseSample {
    pub fn from_pair(id: usize, u: &RealSignal, y: &RealSignal) -> Result<Self> {
        let z = inner_mixed(&analytic(u)?, y)?;
        let (norm_u, norm_y) = (u.norm(), y.norm());
        let excluded = z.norm() <= EXCLUSION_THRESHOLD * norm_u * norm_y;
        Ok(Self { id, z, norm_u, norm_y, excluded })
    }

    pub fn angle(&self) -> f64 {
        self.z.arg()
    }
}

fn run_map<S: SignalMap + ?Sized>(sys: &S, id: usize, u: &RealSignal) -> Result<RealSignal> {
    let y = sys.apply(u).map_err(|e| match e {
        Error::Callback { .. } => e,
        other => Error::Callback { id, reason: other.to_string() },
    })?;
    if y.len() != u.len() || y.channels() != u.channels() {
        return Err(Error::Callback { id, reason: format!("output shape {}x{} differs from input", y.len(), y.channels()) });
    }
    Ok(y)
}

/// Outputs of `sys` on every corpus member, in corpus order.
pub fn evaluate<S: SignalMap + ?Sized>(sys: &S, corpus: &[RealSignal]) -> Result<Vec<RealSignal>> {
    if sys.parallel_safe() {
        corpus.par_iter().enumerate().map(|(i, u)| run_map(sys, i, u)).collect()
    } else {
        corpus.iter().enumerate().map(|(i, u)| run_map(sys, i, u)).collect()
    }
}

/// `<u_a, y>` samples for aligned inputs and outputs.
pub fn samples_from_pairs(inputs: &[RealSignal], outputs: &[RealSignal]) -> Result<Vec<PhaseSample>> {
    if inputs.len() != outputs.len() {
        return Err(Error::ShapeMismatch(format!("{} inputs vs {} outputs", inputs.len(), outputs.len())));
    }
    inputs.par_iter().zip(outputs).enumerate().map(|(i, (u, y))| PhaseSample::from_pair(i, u, y)).collect()
}

/// Simulates every corpus member and returns its phase sample.
pub fn empirical_nrange<S: SignalMap + ?Sized>(sys: &S, corpus: &[RealSignal]) -> Result<Vec<PhaseSample>> {
    let outputs = evaluate(sys, corpus)?;
    samples_from_pairs(corpus, &outputs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalPhase {
    /// Smallest arc containing all used sample angles, `[lo, hi]` with
    /// `hi - lo` possibly above `pi`.
    pub lo: f64,
    pub hi: f64,
    /// Present when the spread is at most `pi`.
    pub interval: Option<PhaseInterval>,
    /// Spread above `pi`: no half-plane holds the samples.
    pub indefinite: bool,
    pub n_used: usize,
    pub n_excluded: usize,
    /// Vertices of the convex hull of the used samples and the origin.
    pub hull_vertices: usize,
    /// Whether the origin is a vertex of that hull, i.e. the samples
    /// span a pointed cone.
    pub origin_on_hull: bool,
    pub label: &'static str,
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Monotone-chain convex hull, counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Angular extent of the used samples, taking the branch that leaves the
/// largest angular gap outside the interval.
pub fn empirical_phase(samples: &[PhaseSample]) -> Result<EmpiricalPhase> {
    let used: Vec<&PhaseSample> = samples.iter().filter(|s| !s.excluded).collect();
    if used.is_empty() {
        return Err(Error::Hypothesis("every phase sample was excluded".into()));
    }
    let mut angles: Vec<f64> = used.iter().map(|s| s.angle()).collect();
    angles.sort_by(f64::total_cmp);
    let n = angles.len();
    // gap after angles[i], wrapping around
    let (mut best_gap, mut best_i) = (angles[0] + 2.0 * PI - angles[n - 1], n - 1);
    for i in 0..n - 1 {
        let gap = angles[i + 1] - angles[i];
        if gap > best_gap {
            best_gap = gap;
            best_i = i;
        }
    }
    let lo = angles[(best_i + 1) % n];
    let mut hi = angles[best_i];
    if hi < lo {
        hi += 2.0 * PI;
    }
    let spread = hi - lo;
    let interval = if spread <= PI { PhaseInterval::new(lo, hi).ok() } else { None };

    let scale = used.iter().map(|s| s.z.norm()).fold(0.0, f64::max);
    let mut pts: Vec<(f64, f64)> = used.iter().map(|s| (s.z.re / scale, s.z.im / scale)).collect();
    pts.push((0.0, 0.0));
    let hull = convex_hull(&pts);
    let origin_on_hull = hull.contains(&(0.0, 0.0));
    Ok(EmpiricalPhase {
        lo,
        hi,
        interval,
        indefinite: spread > PI,
        n_used: n,
        n_excluded: samples.len() - n,
        hull_vertices: hull.len(),
        origin_on_hull,
        label: "inner-estimate",
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassivityMargin {
    /// `min_i <u_i, y_i> - delta |u_i|^2 - epsilon |y_i|^2`.
    pub raw: f64,
    /// The same minimum with each term divided by `|u_i|^2 + |y_i|^2`.
    pub relative: f64,
    pub worst_id: usize,
}

/// Checks `<u, y> >= delta |u|^2 + epsilon |y|^2` on input-output pairs.
pub fn empirical_passivity(inputs: &[RealSignal], outputs: &[RealSignal], delta: f64, epsilon: f64) -> Result<PassivityMargin> {
    if inputs.len() != outputs.len() || inputs.is_empty() {
        return Err(Error::ShapeMismatch("need equally many, and at least one, inputs and outputs".into()));
    }
    let margins: Vec<(f64, f64)> = inputs
        .par_iter()
        .zip(outputs)
        .map(|(u, y)| {
            let (nu, ny) = (u.norm_sq(), y.norm_sq());
            let m = inner_real(u, y)? - delta * nu - epsilon * ny;
            let scale = nu + ny;
            Ok((m, if scale > 0.0 { m / scale } else { 0.0 }))
        })
        .collect::<Result<_>>()?;
    let raw = margins.iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
    let (worst_id, rel) = margins
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, m)| (i, m.1))
        .expect("nonempty");
    Ok(PassivityMargin { raw, relative: rel, worst_id })
}

/// Writes `id,re_z,im_z,angle_rad,norm_u,norm_y,excluded`.
pub fn write_samples_csv<W: Write>(samples: &[PhaseSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "re_z", "im_z", "angle_rad", "norm_u", "norm_y", "excluded"])?;
    for s in samples {
        w.write_record([
            s.id.to_string(),
            format!("{:.16e}", s.z.re),
            format!("{:.16e}", s.z.im),
            format!("{:.16e}", s.angle()),
            format!("{:.16e}", s.norm_u),
            format!("{:.16e}", s.norm_y),
            s.excluded.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
