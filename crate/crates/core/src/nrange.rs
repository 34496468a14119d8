//! Numerical ranges of complex matrices, their supporting rays, and
//! matrix-level (semi-)sectoriality certificates.
//!
//! Everything here rests on one scalar function of a rotation angle,
//! `g(alpha) = lambda_min(He(e^{j alpha} A))`. The numerical range of `A`
//! sits in the closed half-plane `{z : Re(e^{j alpha} z) >= 0}` exactly when
//! `g(alpha) >= 0`, so the set of feasible rotations is an arc
//! `[alpha1, alpha2]` and the phase interval is
//! `[-pi/2 - alpha1, pi/2 - alpha2]`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{fro_norm, golden_max, lambda_min, lambda_min_rotated, rotated_hermitian, sigma_max, top_eigenpair, CMat};

/// Rotations examined by the coarse scan.
pub const SCAN_POINTS: usize = 720;
/// Bisection steps used to locate each edge of the feasible arc.
pub const EDGE_BISECTIONS: usize = 60;
/// Default relative tolerance for positive semidefiniteness tests.
pub const DEFAULT_TOL: f64 = 1e-9;

const GOLDEN_ITERS: usize = 80;
const EPS_BISECTIONS: usize = 60;

/// Maps an angle to `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x % (2.0 * PI);
    if y <= -PI {
        y += 2.0 * PI;
    } else if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// A closed phase interval `[lo, hi]` with spread at most `pi`.
///
/// The representation is normalized so that the center lies in `(-pi, pi]`;
/// `lo` and `hi` are then within `pi/2` of the center and may leave `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseInterval {
    lo: f64,
    hi: f64,
    center: f64,
}

impl PhaseInterval {
    /// Slack allowed on the spread when validating (`hi - lo <= pi`).
    const SPREAD_SLACK: f64 = 1e-12;

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(invalid("phase interval endpoints must be finite"));
        }
        if lo > hi {
            return Err(invalid(format!("phase interval needs lo <= hi, got [{lo}, {hi}]")));
        }
        if hi - lo > PI + Self::SPREAD_SLACK {
            return Err(Error::Domain(format!("phase spread {} exceeds pi", hi - lo)));
        }
        let mid = 0.5 * (lo + hi);
        let shift = wrap_angle(mid) - mid;
        Ok(Self { lo: lo + shift, hi: (hi + shift).min(lo + shift + PI), center: mid + shift })
    }

    pub fn point(angle: f64) -> Self {
        Self::new(angle, angle).expect("a point interval is valid")
    }

    /// `[-half, half]`.
    pub fn symmetric(half: f64) -> Result<Self> {
        if !(half >= 0.0) {
            return Err(invalid(format!("half-width must be nonnegative, got {half}")));
        }
        Self::new(-half, half)
    }

    pub fn from_degrees(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo.to_radians(), hi.to_radians())
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn spread(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn lo_deg(&self) -> f64 {
        self.lo.to_degrees()
    }

    pub fn hi_deg(&self) -> f64 {
        self.hi.to_degrees()
    }

    /// Whether `theta` (any branch) lies in the interval widened by `slack`.
    pub fn contains_angle(&self, theta: f64, slack: f64) -> bool {
        let d = wrap_angle(theta - self.center);
        d >= self.lo - self.center - slack && d <= self.hi - self.center + slack
    }

    /// Whether `other` lies inside `self` widened by `slack`, after moving
    /// `other` to the branch closest to `self`.
    pub fn contains_interval(&self, other: &PhaseInterval, slack: f64) -> bool {
        let shift = wrap_angle(other.center - self.center) - (other.center - self.center);
        other.lo + shift >= self.lo - slack && other.hi + shift <= self.hi + slack
    }

    /// Widens both ends by `s`, capping the spread at `pi`.
    pub fn inflate(&self, s: f64) -> Self {
        let lo = self.lo - s;
        let hi = (self.hi + s).min(lo + PI);
        Self::new(lo, hi).expect("inflated interval stays valid")
    }

    /// The same interval rotated by `theta`.
    pub fn rotate(&self, theta: f64) -> Self {
        Self::new(self.lo + theta, self.hi + theta).expect("rotation preserves spread")
    }
}

/// Phase of a single matrix: a sector, or no half-plane contains its range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixPhase {
    Sector(PhaseInterval),
    Indefinite,
}

impl MatrixPhase {
    pub fn interval(&self) -> Option<PhaseInterval> {
        match self {
            MatrixPhase::Sector(i) => Some(*i),
            MatrixPhase::Indefinite => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SectorKind {
    Sectorial { alpha: f64, epsilon: f64 },
    SemiSectorial { alpha: f64 },
    Indefinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSectorCertificate {
    pub kind: SectorKind,
    /// `(alpha, lambda_min(He(e^{j alpha} A)))` on the coarse scan.
    pub min_eig_profile: Vec<(f64, f64)>,
}

/// Feasible rotations `[alpha1, alpha2]` for a family of matrices, together
/// with the rotation that maximizes the worst-case smallest eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportArc {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha_star: f64,
    pub g_star: f64,
}

impl SupportArc {
    pub fn center(&self) -> f64 {
        0.5 * (self.alpha1 + self.alpha2)
    }

    pub fn phase_interval(&self) -> PhaseInterval {
        let lo = -PI / 2.0 - self.alpha1;
        let hi = PI / 2.0 - self.alpha2;
        PhaseInterval::new(lo, hi.max(lo)).expect("arc widths never exceed pi")
    }
}

fn scan_angle(k: usize) -> f64 {
    -PI + 2.0 * PI * (k + 1) as f64 / SCAN_POINTS as f64
}

/// Scan values of `g` on the coarse rotation grid.
pub fn scan_profile(g: &(impl Fn(f64) -> f64 + Sync)) -> Vec<(f64, f64)> {
    (0..SCAN_POINTS).into_par_iter().map(|k| {
        let a = scan_angle(k);
        (a, g(a))
    }).collect()
}

/// Locates the arc of rotations with `g(alpha) >= 0`.
///
/// Returns `None` when `max g < -tol`. When `-tol <= max g < 0` the arc
/// degenerates to the single maximizing rotation (spread exactly `pi`).
pub fn support_arc(g: &(impl Fn(f64) -> f64 + Sync), profile: &[(f64, f64)], tol: f64) -> Option<SupportArc> {
    let (kbest, _) = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    let step = 2.0 * PI / SCAN_POINTS as f64;
    let a0 = profile[kbest].0;
    let (mut alpha_star, mut g_star) = golden_max(g, a0 - step, a0 + step, GOLDEN_ITERS);
    if profile[kbest].1 > g_star {
        alpha_star = a0;
        g_star = profile[kbest].1;
    }
    if g_star < -tol {
        return None;
    }
    if g_star < 0.0 {
        return Some(SupportArc { alpha1: alpha_star, alpha2: alpha_star, alpha_star, g_star });
    }
    let feasible = |a: f64| g(a) >= 0.0;
    let edge = |mut inside: f64, mut outside: f64| {
        if feasible(outside) {
            return outside;
        }
        for _ in 0..EDGE_BISECTIONS {
            let mid = 0.5 * (inside + outside);
            if feasible(mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let alpha1 = edge(alpha_star, alpha_star - PI);
    let alpha2 = edge(alpha_star, alpha_star + PI);
    Some(SupportArc { alpha1, alpha2, alpha_star, g_star })
}

/// Largest `eps` in `[0, hi]` with `ok(eps)`, assuming monotonicity.
pub(crate) fn bisect_epsilon(ok: impl Fn(f64) -> bool, hi: f64) -> f64 {
    if !(hi > 0.0) || !ok(0.0) {
        return 0.0;
    }
    if ok(hi) {
        return hi;
    }
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..EPS_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `lambda_min(He(e^{j alpha} A) - 2 eps A^* A)`.
pub(crate) fn sector_margin(a: &CMat, alpha: f64, eps: f64) -> f64 {
    let h = rotated_hermitian(a, alpha) - (a.adjoint() * a) * Complex64::new(2.0 * eps, 0.0);
    lambda_min(&h)
}

fn check_matrix(a: &CMat) -> Result<f64> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::ShapeMismatch(format!("expected a nonempty square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    if a.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(invalid("matrix has non-finite entries"));
    }
    let f = fro_norm(a);
    if f == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(f)
}

/// Samples the boundary of the numerical range `{x^* A x : |x| = 1}` along
/// `k` equally spaced support directions.
pub fn nrange_boundary(a: &CMat, k: usize) -> Result<Vec<Complex64>> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::ShapeMismatch("numerical range needs a nonempty square matrix".into()));
    }
    if k < 8 {
        return Err(invalid(format!("need at least 8 directions, got {k}")));
    }
    (0..k)
        .into_par_iter()
        .map(|i| {
            let theta = 2.0 * PI * i as f64 / k as f64;
            let h = rotated_hermitian(a, -theta);
            let (_, x) = top_eigenpair(&h).ok_or(Error::Eigen)?;
            Ok((x.adjoint() * a * &x)[(0, 0)])
        })
        .collect()
}

/// Phase interval of a single matrix, or `Indefinite` when no closed
/// half-plane through the origin contains its numerical range.
///
/// `tol` is relative to the Frobenius norm of `a`.
pub fn matrix_phase_interval(a: &CMat, tol: f64) -> Result<MatrixPhase> {
    let f = check_matrix(a)?;
    let an = a / Complex64::new(f, 0.0);
    let g = |alpha: f64| lambda_min_rotated(&an, alpha);
    let profile = scan_profile(&g);
    Ok(match support_arc(&g, &profile, tol) {
        Some(arc) => MatrixPhase::Sector(arc.phase_interval()),
        None => MatrixPhase::Indefinite,
    })
}

/// Decides whether `He(e^{j alpha} A) >= 2 eps A^* A` admits a solution with
/// `eps > 0` (sectorial), only with `eps = 0` (semi-sectorial), or none.
///
/// The rotation reported is the center of the feasible arc, which is where
/// `eps` is maximized by bisection.
pub fn matrix_sector_certify(a: &CMat, tol: f64) -> Result<MatrixSectorCertificate> {
    let f = check_matrix(a)?;
    let an = a / Complex64::new(f, 0.0);
    let g = |alpha: f64| lambda_min_rotated(&an, alpha);
    let profile = scan_profile(&g);
    let kind = match support_arc(&g, &profile, tol) {
        None => SectorKind::Indefinite,
        Some(arc) => {
            let alpha = wrap_angle(arc.center());
            let abs_tol = tol * f;
            let eps = bisect_epsilon(|e| sector_margin(a, alpha, e) >= -abs_tol, 0.5 / sigma_max(a));
            let eps_norm = eps * f;
            if arc.g_star > 0.0 && eps_norm > 1e-6 {
                SectorKind::Sectorial { alpha, epsilon: eps }
            } else {
                SectorKind::SemiSectorial { alpha }
            }
        }
    };
    Ok(MatrixSectorCertificate { kind, min_eig_profile: profile })
}

/// Convenience: a complex matrix from a real one.
pub fn real_matrix(m: &DMatrix<f64>) -> CMat {
    crate::linalg::to_complex(m)
}
