//! Fixed-step RK4 simulation of single systems and of the standard feedback
//! interconnection
//!
//! ```text
//!   u1 = e1 - y2,   y1 = P u1,
//!   u2 = e2 + y1,   y2 = C u2.
//! ```
//!
//! Inputs are sampled signals; between samples they are interpolated
//! linearly, so the half-step RK4 stages see the midpoint average.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lti::StateSpace;
use crate::signal::RealSignal;

/// States whose magnitude exceeds this are treated as a blow-up.
const DIVERGENCE_LIMIT: f64 = 1e12;

/// How the output depends on the current input.
#[derive(Debug, Clone, PartialEq)]
pub enum Feedthrough {
    /// `y = g(x)`.
    None,
    /// `y = g0(x) + D u`.
    Linear(DMatrix<f64>),
    /// Anything else; the loop has to be iterated.
    Nonlinear,
}

/// A causal finite-dimensional system `x' = f(t, x, u)`, `y = g(t, x, u)`
/// started from `x(0) = 0`.
pub trait Dynamics: Send + Sync {
    fn states(&self) -> usize;
    fn channels(&self) -> usize;
    fn deriv(&self, t: f64, x: &[f64], u: &[f64], dx: &mut [f64]);
    fn output(&self, t: f64, x: &[f64], u: &[f64], y: &mut [f64]);
    fn feedthrough(&self) -> Feedthrough;
}

/// Static maps whose graph lies in a sector `[a, b]`, applied channelwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum SectorFunction {
    Linear { k: f64 },
    /// Slope `b` on `|x| <= knee`, slope `a` beyond.
    Saturated { a: f64, b: f64, knee: f64 },
    /// Odd piecewise-linear map; `slopes[i]` applies between `knots[i-1]` and `knots[i]`.
    PiecewiseLinear { knots: Vec<f64>, slopes: Vec<f64> },
    /// `a x + (b - a) tanh(x)`.
    Tanh { a: f64, b: f64 },
    /// Logarithmic quantizer with levels `rho^i`.
    LogQuantizer { rho: f64 },
}

impl SectorFunction {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(invalid(format!("sector function: {m}")));
        match self {
            SectorFunction::Linear { k } if !k.is_finite() => bad("gain must be finite"),
            SectorFunction::Saturated { a, b, knee } if !(knee > &0.0 && a.is_finite() && b.is_finite()) => {
                bad("knee must be positive and slopes finite")
            }
            SectorFunction::PiecewiseLinear { knots, slopes } => {
                if slopes.len() != knots.len() + 1 {
                    return bad("need one more slope than knots");
                }
                if knots.windows(2).any(|w| w[1] <= w[0]) || knots.first().is_some_and(|k| *k <= 0.0) {
                    return bad("knots must be positive and increasing");
                }
                if slopes.iter().any(|s| !s.is_finite()) {
                    return bad("slopes must be finite");
                }
                Ok(())
            }
            SectorFunction::Tanh { a, b } if !(a.is_finite() && b.is_finite()) => bad("slopes must be finite"),
            SectorFunction::LogQuantizer { rho } if !(*rho > 0.0 && *rho < 1.0) => bad("rho must lie in (0, 1)"),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SectorFunction::Linear { k } => k * x,
            SectorFunction::Saturated { a, b, knee } => {
                if x.abs() <= *knee {
                    b * x
                } else {
                    x.signum() * (b * knee + a * (x.abs() - knee))
                }
            }
            SectorFunction::PiecewiseLinear { knots, slopes } => {
                let r = x.abs();
                let mut acc = 0.0;
                let mut prev = 0.0;
                for (i, &k) in knots.iter().enumerate() {
                    if r <= k {
                        return x.signum() * (acc + slopes[i] * (r - prev));
                    }
                    acc += slopes[i] * (k - prev);
                    prev = k;
                }
                x.signum() * (acc + slopes[knots.len()] * (r - prev))
            }
            SectorFunction::Tanh { a, b } => a * x + (b - a) * x.tanh(),
            SectorFunction::LogQuantizer { rho } => {
                if x == 0.0 {
                    return 0.0;
                }
                let c = 0.5 * (1.0 + rho);
                let l = (x.abs() / c).ln() / rho.ln();
                let i = l.floor() + 1.0;
                x.signum() * rho.powf(i)
            }
        }
    }
}

/// Two-state cubic system with unit feedthrough
/// `x1' = -x1 - x2 - x1^3 + u1`, `x2' = -x2 + x1 - x2^3 + u2`, `y = x + u`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CubicVsp;

impl Dynamics for CubicVsp {
    fn states(&self) -> usize {
        2
    }

    fn channels(&self) -> usize {
        2
    }

    fn deriv(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        dx[0] = -x[0] - x[1] - x[0].powi(3) + u[0];
        dx[1] = -x[1] + x[0] - x[1].powi(3) + u[1];
    }

    fn output(&self, _t: f64, x: &[f64], u: &[f64], y: &mut [f64]) {
        y[0] = x[0] + u[0];
        y[1] = x[1] + u[1];
    }

    fn feedthrough(&self) -> Feedthrough {
        Feedthrough::Linear(DMatrix::identity(2, 2))
    }
}

impl Dynamics for StateSpace {
    fn states(&self) -> usize {
        StateSpace::states(self)
    }

    fn channels(&self) -> usize {
        StateSpace::channels(self)
    }

    fn deriv(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        let (a, b) = (self.a(), self.b());
        for i in 0..x.len() {
            let mut s = 0.0;
            for j in 0..x.len() {
                s += a[(i, j)] * x[j];
            }
            for j in 0..u.len() {
                s += b[(i, j)] * u[j];
            }
            dx[i] = s;
        }
    }

    fn output(&self, _t: f64, x: &[f64], u: &[f64], y: &mut [f64]) {
        let (c, d) = (self.c(), self.d());
        for i in 0..y.len() {
            let mut s = 0.0;
            for j in 0..x.len() {
                s += c[(i, j)] * x[j];
            }
            for j in 0..u.len() {
                s += d[(i, j)] * u[j];
            }
            y[i] = s;
        }
    }

    fn feedthrough(&self) -> Feedthrough {
        if self.is_strictly_proper() {
            Feedthrough::None
        } else {
            Feedthrough::Linear(self.d().clone())
        }
    }
}

/// A memoryless channelwise map.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticMap {
    pub map: SectorFunction,
    pub channels: usize,
}

impl Dynamics for StaticMap {
    fn states(&self) -> usize {
        0
    }

    fn channels(&self) -> usize {
        self.channels
    }

    fn deriv(&self, _t: f64, _x: &[f64], _u: &[f64], _dx: &mut [f64]) {}

    fn output(&self, _t: f64, _x: &[f64], u: &[f64], y: &mut [f64]) {
        for (yi, ui) in y.iter_mut().zip(u) {
            *yi = self.map.eval(*ui);
        }
    }

    fn feedthrough(&self) -> Feedthrough {
        match self.map {
            SectorFunction::Linear { k } => Feedthrough::Linear(DMatrix::identity(self.channels, self.channels) * k),
            _ => Feedthrough::Nonlinear,
        }
    }
}

/// Systems the simulator knows how to run.
#[derive(Clone)]
pub enum System {
    Lti(StateSpace),
    CubicVsp,
    Static(StaticMap),
    Custom(Arc<dyn Dynamics>),
}

impl fmt::Debug for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            System::Lti(ss) => f.debug_tuple("Lti").field(ss).finish(),
            System::CubicVsp => f.write_str("CubicVsp"),
            System::Static(m) => f.debug_tuple("Static").field(m).finish(),
            System::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl System {
    pub fn static_map(map: SectorFunction, channels: usize) -> Result<Self> {
        map.validate()?;
        if channels == 0 {
            return Err(invalid("static map needs at least one channel"));
        }
        Ok(System::Static(StaticMap { map, channels }))
    }

    fn dynamics(&self) -> &dyn Dynamics {
        match self {
            System::Lti(ss) => ss,
            System::CubicVsp => &CubicVsp,
            System::Static(m) => m,
            System::Custom(d) => d.as_ref(),
        }
    }
}

impl Dynamics for System {
    fn states(&self) -> usize {
        self.dynamics().states()
    }

    fn channels(&self) -> usize {
        self.dynamics().channels()
    }

    fn deriv(&self, t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        self.dynamics().deriv(t, x, u, dx)
    }

    fn output(&self, t: f64, x: &[f64], u: &[f64], y: &mut [f64]) {
        self.dynamics().output(t, x, u, y)
    }

    fn feedthrough(&self) -> Feedthrough {
        self.dynamics().feedthrough()
    }
}

fn interp(sig: &RealSignal, k: usize, frac: f64, out: &mut [f64]) {
    let a = sig.row(k);
    if frac == 0.0 || k + 1 >= sig.len() {
        out.copy_from_slice(a);
        return;
    }
    let b = sig.row(k + 1);
    for c in 0..out.len() {
        out[c] = a[c] + frac * (b[c] - a[c]);
    }
}

fn check_state(x: &[f64], t: f64) -> Result<()> {
    if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
        return Err(Error::Divergence { t });
    }
    Ok(())
}

/// `y = sys(u)` from zero initial state.
pub fn simulate(sys: &dyn Dynamics, u: &RealSignal) -> Result<RealSignal> {
    let m = sys.channels();
    if u.channels() != m {
        return Err(Error::ShapeMismatch(format!("system has {m} channels, input has {}", u.channels())));
    }
    let n = sys.states();
    let dt = u.dt();
    let mut x = vec![0.0; n];
    let mut y = Vec::with_capacity(u.len() * m);
    let mut yk = vec![0.0; m];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut xs = vec![0.0; n];
    let (mut um, mut ue) = (vec![0.0; m], vec![0.0; m]);
    for k in 0..u.len() {
        let t = k as f64 * dt;
        sys.output(t, &x, u.row(k), &mut yk);
        if yk.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { t });
        }
        y.extend_from_slice(&yk);
        if n == 0 || k + 1 == u.len() {
            continue;
        }
        interp(u, k, 0.5, &mut um);
        interp(u, k + 1, 0.0, &mut ue);
        sys.deriv(t, &x, u.row(k), &mut k1);
        for i in 0..n {
            xs[i] = x[i] + 0.5 * dt * k1[i];
        }
        sys.deriv(t + 0.5 * dt, &xs, &um, &mut k2);
        for i in 0..n {
            xs[i] = x[i] + 0.5 * dt * k2[i];
        }
        sys.deriv(t + 0.5 * dt, &xs, &um, &mut k3);
        for i in 0..n {
            xs[i] = x[i] + dt * k3[i];
        }
        sys.deriv(t + dt, &xs, &ue, &mut k4);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        check_state(&x, t + dt)?;
    }
    Ok(RealSignal::from_parts_unchecked(y, u.len(), m, dt))
}

/// Strategy for the algebraic loop `u1 = e1 - C(u2)`, `u2 = e2 + P(u1)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LoopSolve {
    #[default]
    /// Pick an ordering or a linear solve from the feedthrough structure,
    /// falling back to fixed-point iteration.
    Auto,
    /// Requires one side strictly proper.
    Direct,
    FixedPoint { tol: f64, max_iter: usize, damping: f64 },
}

impl LoopSolve {
    pub const DEFAULT_FIXED_POINT: LoopSolve = LoopSolve::FixedPoint { tol: 1e-10, max_iter: 50, damping: 0.5 };
}

pub struct FeedbackSpec<'a> {
    pub p: &'a dyn Dynamics,
    pub c: &'a dyn Dynamics,
    pub e1: &'a RealSignal,
    pub e2: &'a RealSignal,
    pub solve: LoopSolve,
}

#[derive(Debug, Clone)]
pub struct FeedbackTrace {
    pub u1: RealSignal,
    pub u2: RealSignal,
    pub y1: RealSignal,
    pub y2: RealSignal,
    /// Largest loop-equation residual over all evaluations.
    pub max_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ordering {
    PFirst,
    CFirst,
    Linear,
    Iterate { tol: f64, max_iter: usize, damping: f64 },
}

struct Loop<'a> {
    p: &'a dyn Dynamics,
    c: &'a dyn Dynamics,
    m: usize,
    np: usize,
    order: Ordering,
    /// `(I + Dc Dp)^{-1}` and the two feedthroughs, when both are linear.
    linear: Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)>,
}

struct LoopSignals {
    u1: Vec<f64>,
    u2: Vec<f64>,
    y1: Vec<f64>,
    y2: Vec<f64>,
}

impl LoopSignals {
    fn new(m: usize) -> Self {
        Self { u1: vec![0.0; m], u2: vec![0.0; m], y1: vec![0.0; m], y2: vec![0.0; m] }
    }
}

impl<'a> Loop<'a> {
    fn new(spec: &FeedbackSpec<'a>) -> Result<Self> {
        let m = spec.p.channels();
        let (fp, fc) = (spec.p.feedthrough(), spec.c.feedthrough());
        let mut linear = None;
        let order = match spec.solve {
            LoopSolve::Direct => match (&fp, &fc) {
                (Feedthrough::None, _) => Ordering::PFirst,
                (_, Feedthrough::None) => Ordering::CFirst,
                _ => return Err(invalid("direct loop ordering needs a strictly proper side")),
            },
            LoopSolve::FixedPoint { tol, max_iter, damping } => {
                if !(tol > 0.0 && max_iter > 0 && damping > 0.0 && damping <= 1.0) {
                    return Err(invalid("fixed-point settings need tol > 0, max_iter > 0, damping in (0, 1]"));
                }
                Ordering::Iterate { tol, max_iter, damping }
            }
            LoopSolve::Auto => match (&fp, &fc) {
                (Feedthrough::None, _) => Ordering::PFirst,
                (_, Feedthrough::None) => Ordering::CFirst,
                (Feedthrough::Linear(dp), Feedthrough::Linear(dc)) => {
                    let k = DMatrix::identity(m, m) + dc * dp;
                    let inv = k.try_inverse().ok_or(Error::IllPosed { t: 0.0, residual: f64::INFINITY })?;
                    linear = Some((inv, dp.clone(), dc.clone()));
                    Ordering::Linear
                }
                _ => match LoopSolve::DEFAULT_FIXED_POINT {
                    LoopSolve::FixedPoint { tol, max_iter, damping } => Ordering::Iterate { tol, max_iter, damping },
                    _ => unreachable!(),
                },
            },
        };
        Ok(Self { p: spec.p, c: spec.c, m, np: spec.p.states(), order, linear })
    }

    /// Resolves the loop at time `t` for stacked state `x = [xp; xc]`;
    /// returns the loop-equation residual.
    fn resolve(&self, t: f64, x: &[f64], e1: &[f64], e2: &[f64], s: &mut LoopSignals) -> Result<f64> {
        let (xp, xc) = x.split_at(self.np);
        let m = self.m;
        match self.order {
            Ordering::PFirst => {
                self.p.output(t, xp, &vec![0.0; m], &mut s.y1);
                for i in 0..m {
                    s.u2[i] = e2[i] + s.y1[i];
                }
                self.c.output(t, xc, &s.u2, &mut s.y2);
                for i in 0..m {
                    s.u1[i] = e1[i] - s.y2[i];
                }
                Ok(0.0)
            }
            Ordering::CFirst => {
                self.c.output(t, xc, &vec![0.0; m], &mut s.y2);
                for i in 0..m {
                    s.u1[i] = e1[i] - s.y2[i];
                }
                self.p.output(t, xp, &s.u1, &mut s.y1);
                for i in 0..m {
                    s.u2[i] = e2[i] + s.y1[i];
                }
                Ok(0.0)
            }
            Ordering::Linear => {
                let (inv, dp, dc) = self.linear.as_ref().expect("linear loop data");
                let zero = vec![0.0; m];
                let mut y1f = vec![0.0; m];
                let mut y2f = vec![0.0; m];
                self.p.output(t, xp, &zero, &mut y1f);
                self.c.output(t, xc, &zero, &mut y2f);
                let rhs = DVector::from_fn(m, |i, _| e1[i] - y2f[i]) - dc * DVector::from_fn(m, |i, _| e2[i] + y1f[i]);
                let u1 = inv * rhs;
                s.u1.copy_from_slice(u1.as_slice());
                let u2 = DVector::from_fn(m, |i, _| e2[i] + y1f[i]) + dp * &u1;
                s.u2.copy_from_slice(u2.as_slice());
                self.p.output(t, xp, &s.u1, &mut s.y1);
                self.c.output(t, xc, &s.u2, &mut s.y2);
                Ok(self.residual(e1, e2, s))
            }
            Ordering::Iterate { tol, max_iter, damping } => {
                let mut next = vec![0.0; m];
                let mut res = f64::INFINITY;
                for _ in 0..max_iter {
                    self.c.output(t, xc, &s.u2, &mut s.y2);
                    for i in 0..m {
                        next[i] = e1[i] - s.y2[i];
                    }
                    for i in 0..m {
                        s.u1[i] += damping * (next[i] - s.u1[i]);
                    }
                    self.p.output(t, xp, &s.u1, &mut s.y1);
                    for i in 0..m {
                        s.u2[i] = e2[i] + s.y1[i];
                    }
                    self.c.output(t, xc, &s.u2, &mut s.y2);
                    res = self.residual(e1, e2, s);
                    if res <= tol {
                        return Ok(res);
                    }
                }
                Err(Error::IllPosed { t, residual: res })
            }
        }
    }

    fn residual(&self, e1: &[f64], e2: &[f64], s: &LoopSignals) -> f64 {
        (0..self.m)
            .map(|i| (s.u1[i] - (e1[i] - s.y2[i])).abs().max((s.u2[i] - (e2[i] + s.y1[i])).abs()))
            .fold(0.0, f64::max)
    }

    fn deriv(&self, t: f64, x: &[f64], e1: &[f64], e2: &[f64], s: &mut LoopSignals, dx: &mut [f64]) -> Result<f64> {
        let res = self.resolve(t, x, e1, e2, s)?;
        let (xp, xc) = x.split_at(self.np);
        let (dxp, dxc) = dx.split_at_mut(self.np);
        self.p.deriv(t, xp, &s.u1, dxp);
        self.c.deriv(t, xc, &s.u2, dxc);
        Ok(res)
    }
}

/// Simulates the feedback loop from zero initial state.
pub fn simulate_feedback(spec: &FeedbackSpec) -> Result<FeedbackTrace> {
    let m = spec.p.channels();
    if spec.c.channels() != m || spec.e1.channels() != m || spec.e2.channels() != m {
        return Err(Error::ShapeMismatch("P, C, e1 and e2 must share the channel count".into()));
    }
    spec.e1.same_shape(spec.e2)?;
    let lp = Loop::new(spec)?;
    let n = spec.p.states() + spec.c.states();
    let len = spec.e1.len();
    let dt = spec.e1.dt();
    let mut x = vec![0.0; n];
    let mut s = LoopSignals::new(m);
    let mut traces = [Vec::with_capacity(len * m), Vec::with_capacity(len * m), Vec::with_capacity(len * m), Vec::with_capacity(len * m)];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut xs = vec![0.0; n];
    let (mut e1m, mut e2m, mut e1e, mut e2e) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut max_res: f64 = 0.0;
    for k in 0..len {
        let t = k as f64 * dt;
        let (e1, e2) = (spec.e1.row(k), spec.e2.row(k));
        max_res = max_res.max(lp.deriv(t, &x, e1, e2, &mut s, &mut k1)?);
        if [&s.u1, &s.u2, &s.y1, &s.y2].iter().any(|v| v.iter().any(|z| !z.is_finite())) {
            return Err(Error::Divergence { t });
        }
        traces[0].extend_from_slice(&s.u1);
        traces[1].extend_from_slice(&s.u2);
        traces[2].extend_from_slice(&s.y1);
        traces[3].extend_from_slice(&s.y2);
        if k + 1 == len || n == 0 {
            continue;
        }
        interp(spec.e1, k, 0.5, &mut e1m);
        interp(spec.e2, k, 0.5, &mut e2m);
        interp(spec.e1, k + 1, 0.0, &mut e1e);
        interp(spec.e2, k + 1, 0.0, &mut e2e);
        for i in 0..n {
            xs[i] = x[i] + 0.5 * dt * k1[i];
        }
        max_res = max_res.max(lp.deriv(t + 0.5 * dt, &xs, &e1m, &e2m, &mut s, &mut k2)?);
        for i in 0..n {
            xs[i] = x[i] + 0.5 * dt * k2[i];
        }
        max_res = max_res.max(lp.deriv(t + 0.5 * dt, &xs, &e1m, &e2m, &mut s, &mut k3)?);
        for i in 0..n {
            xs[i] = x[i] + dt * k3[i];
        }
        max_res = max_res.max(lp.deriv(t + dt, &xs, &e1e, &e2e, &mut s, &mut k4)?);
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        check_state(&x, t + dt)?;
    }
    let mk = |v: Vec<f64>| RealSignal::from_parts_unchecked(v, len, m, dt);
    let [u1, u2, y1, y2] = traces;
    Ok(FeedbackTrace { u1: mk(u1), u2: mk(u2), y1: mk(y1), y2: mk(y2), max_residual: max_res })
}

/// `max_{t >= t_after} |x(t)| / max_t |x(t)|` in the sup norm over channels;
/// zero for the zero signal.
pub fn convergence_metric(x: &RealSignal, t_after: f64) -> Result<f64> {
    if !(t_after >= 0.0 && t_after < x.duration()) {
        return Err(invalid(format!("t_after = {t_after} must lie in [0, {})", x.duration())));
    }
    let peak = x.max_abs();
    if peak == 0.0 {
        return Ok(0.0);
    }
    let tail = (0..x.len())
        .filter(|&k| x.time(k) >= t_after)
        .flat_map(|k| x.row(k).iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    Ok(tail / peak)
}
