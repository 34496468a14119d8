//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with the
//! measured quantities and the wall time. Exits nonzero if any line fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use phasekit::bundled::{self, experiment_pulses, EXPERIMENT_DT, EXPERIMENT_DURATION};
use phasekit::estimate::{empirical_nrange, empirical_passivity, empirical_phase, evaluate, Simulated};
use phasekit::linalg::CMat;
use phasekit::lti::realize;
use phasekit::nrange::{matrix_phase_interval, MatrixPhase};
use phasekit::phase::{
    analyze_lti, deg, quantizer_sector, sector_phase, vsp_phase, PassivityIndices, QuantizerParams, DEFAULT_TOL,
};
use phasekit::signal::{analytic, gen_corpus, hilbert_real, inner, inner_mixed, inner_real};
use phasekit::sim::{convergence_metric, simulate_feedback, FeedbackSpec, LoopSolve, SectorFunction, System};
use phasekit::stability::{
    circle_criterion_check, closed_loop_phase_bound, passivity_index_check, phase_cone_check, small_gain_check,
    small_phase_check, ForbiddenRegion, PhaseInput, DEFAULT_TOL_MARGIN,
};
use phasekit::{Complex64, CorpusSpec, FrequencyGrid, PhaseInterval, Rational, RealSignal, SectorBound};

struct Outcome {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

/// DC- and Nyquist-free white noise of even length.
fn band_limited_noise(rng: &mut ChaCha8Rng, len: usize, dt: f64) -> RealSignal {
    let mut x: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let mean = x.iter().sum::<f64>() / len as f64;
    let alt = x.iter().enumerate().map(|(t, v)| if t % 2 == 0 { *v } else { -*v }).sum::<f64>() / len as f64;
    for (t, v) in x.iter_mut().enumerate() {
        *v -= mean + if t % 2 == 0 { alt } else { -alt };
    }
    RealSignal::new(x, 1, dt).unwrap()
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale
}

fn hilbert_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = [0.0f64; 6];
    for _ in 0..100 {
        let u = band_limited_noise(&mut rng, 4096, 1e-2);
        let v = band_limited_noise(&mut rng, 4096, 1e-2);
        let n2 = u.norm_sq();
        let scale = u.norm() * v.norm();
        let hu = hilbert_real(&u).unwrap();
        let hhu = hilbert_real(&hu).unwrap();
        let (ua, va) = (analytic(&u).unwrap(), analytic(&v).unwrap());
        let uv_a = inner_mixed(&va, &u).unwrap().conj();
        let ua_v = inner_mixed(&ua, &v).unwrap();
        let ua_va = inner(&ua, &va).unwrap();
        let errs = [
            rel(hu.norm_sq(), n2, n2),
            hhu.add_scaled(1.0, &u).unwrap().norm() / u.norm(),
            inner_real(&u, &hu).unwrap().abs() / n2,
            rel(ua.norm_sq(), 0.5 * n2, n2),
            (ua_v - uv_a).norm() / scale,
            (uv_a - ua_va).norm() / scale,
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    let ok = worst.iter().all(|e| *e <= 1e-9);
    check(
        ok,
        format!(
            "max rel err: isometry {:.1e}, anti-involution {:.1e}, orthogonality {:.1e}, |u_a|^2 {:.1e}, <u_a,v>=<u,v_a> {:.1e}, <u,v_a>=<u_a,v_a> {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
        ),
    )
}

fn tone_shift() -> Outcome {
    let (len, dt, periods) = (4096, 1e-3, 37.0);
    let w = 2.0 * PI * periods / (len as f64 * dt);
    let c = RealSignal::from_fn(len, 1, dt, |t, _| (w * t).cos()).unwrap();
    let s = RealSignal::from_fn(len, 1, dt, |t, _| (w * t).sin()).unwrap();
    let h = hilbert_real(&c).unwrap();
    let rms = (h.add_scaled(-1.0, &s).unwrap().as_slice().iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    check(rms <= 1e-8, format!("RMS(H cos - sin) = {rms:.2e}"))
}

fn lti_reproduction() -> Outcome {
    let r = analyze_lti(&bundled::mimo_plant(), &FrequencyGrid::default(), DEFAULT_TOL).unwrap();
    let Some(i) = r.interval else { return check(false, "no phase interval") };
    let hinf = r.hinf.unwrap().value;
    let nu = r.nu_index.unwrap();
    let ok = (i.lo_deg() + 159.925).abs() <= 0.2
        && (i.hi_deg() - 19.1142).abs() <= 0.2
        && rel(hinf, 60.8331, 60.8331) <= 0.005
        && (nu + 0.4526).abs() <= 0.005;
    check(
        ok,
        format!("phase [{:.4}, {:.4}] deg, hinf {:.4}, nu {:.5}, verdict {}", i.lo_deg(), i.hi_deg(), hinf, nu, r.verdict_name()),
    )
}

fn closed_form_bounds() -> Outcome {
    let s = quantizer_sector(&QuantizerParams::new(1.0 / 3.0).unwrap());
    let (q, _) = sector_phase(&s);
    let sector_ok = (s.a() - 0.5).abs() <= 1e-15 && (s.b() - 1.5).abs() <= 1e-15;
    let q_ok = (q.lo() + PI / 6.0).abs() <= 1e-12 && (q.hi() - PI / 6.0).abs() <= 1e-12;
    let v = vsp_phase(&PassivityIndices { delta: 2.0 / 3.0, epsilon: 1.0 / 3.0 }).unwrap();
    let v_ok = format!("{:.4}", v.hi_deg()) == "19.4712" && format!("{:.4}", v.lo_deg()) == "-19.4712";
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a = rng.random_range(0.01..10.0);
        let b = a + rng.random_range(0.01..10.0);
        let bound = SectorBound::new(a, b).unwrap();
        let via_vsp = vsp_phase(&bound.passivity_indices()).unwrap();
        worst = worst.max((via_vsp.hi() - sector_phase(&bound).0.hi()).abs());
    }
    let reduce_ok = worst <= 1e-12;
    check(
        sector_ok && q_ok && v_ok && reduce_ok,
        format!(
            "quantizer sector ({}, {}), phase +-{:.15} rad; vsp +-{:.4} deg; vsp vs sector max diff {:.1e}",
            s.a(),
            s.b(),
            q.hi(),
            v.hi_deg(),
            worst
        ),
    )
}

fn random_sector_function(rng: &mut ChaCha8Rng) -> (SectorFunction, SectorBound) {
    let a = rng.random_range(0.1..2.0);
    let b = a + rng.random_range(0.1..3.0);
    let f = match rng.random_range(0..5) {
        0 => SectorFunction::Linear { k: rng.random_range(a..=b) },
        1 => SectorFunction::Saturated { a, b, knee: rng.random_range(0.1..2.0) },
        2 => SectorFunction::Tanh { a, b },
        3 => {
            let knots = vec![0.3, 0.8, 1.5];
            let slopes = (0..4).map(|_| rng.random_range(a..=b)).collect();
            SectorFunction::PiecewiseLinear { knots, slopes }
        }
        _ => {
            let rho = rng.random_range(0.2..0.9);
            let s = quantizer_sector(&QuantizerParams::new(rho).unwrap());
            return (SectorFunction::LogQuantizer { rho }, s);
        }
    };
    (f, SectorBound::new(a, b).unwrap())
}

fn containment() -> Outcome {
    let slack = 1e-3;
    let corpus1 = gen_corpus(&CorpusSpec::standard(11, 1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = f64::NEG_INFINITY;
    let mut total = 0;
    for _ in 0..20 {
        let (f, bound) = random_sector_function(&mut rng);
        let (limit, _) = sector_phase(&bound);
        let sys = System::static_map(f, 1).unwrap();
        for s in empirical_nrange(&Simulated(&sys), &corpus1).unwrap().iter().filter(|s| !s.excluded) {
            worst = worst.max(s.angle().abs() - limit.hi());
            total += 1;
        }
    }
    let corpus2 = gen_corpus(&CorpusSpec::standard(12, 2)).unwrap();
    let limit = vsp_phase(&PassivityIndices { delta: 2.0 / 3.0, epsilon: 1.0 / 3.0 }).unwrap();
    let c = bundled::cubic_controller();
    let mut worst_c = f64::NEG_INFINITY;
    for s in empirical_nrange(&Simulated(&c), &corpus2).unwrap().iter().filter(|s| !s.excluded) {
        worst_c = worst_c.max(s.angle().abs() - limit.hi());
        total += 1;
    }
    check(
        worst <= slack && worst_c <= slack,
        format!("{total} samples; max excess over bound: sectors {worst:.2e} rad, cubic controller {worst_c:.2e} rad"),
    )
}

fn plant_phase_input() -> (PhaseInput, f64, f64) {
    let r = analyze_lti(&bundled::mimo_plant(), &FrequencyGrid::default(), DEFAULT_TOL).unwrap();
    (PhaseInput::from_report(&r), r.hinf.unwrap().value, r.nu_index.unwrap())
}

fn controller_gain_lower_bound() -> f64 {
    let corpus = gen_corpus(&CorpusSpec::with_window(5, 2, 20_000, 1e-3, 40)).unwrap();
    let out = evaluate(&Simulated(&bundled::cubic_controller()), &corpus).unwrap();
    corpus.iter().zip(&out).map(|(u, y)| y.norm() / u.norm()).fold(0.0, f64::max)
}

fn verdict_triple() -> Outcome {
    let (p, hinf, nu) = plant_phase_input();
    let cidx = PassivityIndices { delta: 2.0 / 3.0, epsilon: 1.0 / 3.0 };
    let c = PhaseInput::closed_form(vsp_phase(&cidx).unwrap(), "vsp-closed-form");
    let sp = small_phase_check(&p, &c);
    let gc = controller_gain_lower_bound();
    let sg = small_gain_check(hinf, gc).unwrap();
    let pi = passivity_index_check(&PassivityIndices { delta: nu, epsilon: nu }, &cidx);
    check(
        sp.pass && !sg.pass && !sg.is_unmet() && !pi.pass && !pi.is_unmet() && (1.1..=2.0).contains(&gc),
        format!(
            "small-phase {:?} (upper {:.3} deg, lower {:.3} deg); small-gain {:?} (|P| {:.3} x |C| >= {:.3}); passivity-index {:?} (delta1+eps2 = {:.4})",
            sp.outcome,
            sp.margins["upper_deg"],
            sp.margins["lower_deg"],
            sg.outcome,
            hinf,
            gc,
            pi.outcome,
            pi.margins["delta_p_plus_epsilon_c"]
        ),
    )
}

fn simulation() -> Outcome {
    let plant = System::Lti(realize(&bundled::mimo_plant()).unwrap());
    let c = bundled::cubic_controller();
    let (e1, e2) = experiment_pulses(EXPERIMENT_DT, EXPERIMENT_DURATION).unwrap();
    let trace = simulate_feedback(&FeedbackSpec { p: &plant, c: &c, e1: &e1, e2: &e2, solve: LoopSolve::Auto }).unwrap();
    let d1 = convergence_metric(&trace.u1, 40.0).unwrap();
    let d2 = convergence_metric(&trace.u2, 40.0).unwrap();

    let corpus = gen_corpus(&CorpusSpec::with_window(21, 2, 20_000, 1e-3, 40)).unwrap();
    let out = evaluate(&Simulated(&c), &corpus).unwrap();
    let mut inputs = corpus;
    let mut outputs = out;
    inputs.push(trace.u2.clone());
    outputs.push(trace.y2.clone());
    let m = empirical_passivity(&inputs, &outputs, 2.0 / 3.0, 1.0 / 3.0).unwrap();
    check(
        d1 <= 0.01 && d2 <= 0.01 && m.relative >= -1e-6,
        format!("decay ratio u1 {d1:.2e}, u2 {d2:.2e}; VSP(2/3, 1/3) relative margin {:.3e}", m.relative),
    )
}

fn random_sectorial_matrix(rng: &mut ChaCha8Rng) -> CMat {
    let g = |rng: &mut ChaCha8Rng| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    let b = CMat::from_fn(3, 3, |_, _| g(rng));
    let s = CMat::from_fn(3, 3, |_, _| g(rng));
    let s = (&s + s.adjoint()) * Complex64::new(0.5, 0.0);
    let a = b.adjoint() * &b + CMat::identity(3, 3) * Complex64::new(0.1, 0.0) + s * Complex64::new(0.0, rng.random_range(0.2..2.0));
    a * Complex64::from_polar(1.0, rng.random_range(-PI..PI))
}

fn gaussian_vector(rng: &mut ChaCha8Rng) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_fn(3, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Angle extremes of `x^* A x` from `n` evaluations and no eigen-solver:
/// a fifth are uniform on the sphere, the rest are a shrinking random
/// search started from the best uniform samples. Angles are measured
/// relative to `center`.
fn sampled_interval(a: &CMat, center: f64, rng: &mut ChaCha8Rng, n: usize) -> (f64, f64) {
    let rot = Complex64::from_polar(1.0, -center);
    let angle = |x: &nalgebra::DVector<Complex64>| ((x.adjoint() * a * x)[(0, 0)] * rot).arg();
    let uniform = n / 5;
    let mut pool: Vec<(f64, nalgebra::DVector<Complex64>)> = (0..uniform)
        .map(|_| {
            let x = gaussian_vector(rng);
            (angle(&x), x)
        })
        .collect();
    pool.sort_by(|p, q| p.0.total_cmp(&q.0));
    let starts = 10;
    let steps = (n - uniform) / (2 * starts);
    let mut lo = pool[0].0;
    let mut hi = pool[pool.len() - 1].0;
    for (sign, seeds) in [(-1.0, &pool[..starts]), (1.0, &pool[pool.len() - starts..])] {
        for (v0, x0) in seeds {
            let (mut best, mut x) = (sign * v0, x0.normalize());
            for k in 0..steps {
                let sigma = 0.3 * (-8.0 * k as f64 / steps as f64).exp();
                let y = (&x + gaussian_vector(rng) * Complex64::new(sigma, 0.0)).normalize();
                let v = sign * angle(&y);
                if v > best {
                    best = v;
                    x = y;
                }
            }
            if sign < 0.0 {
                lo = lo.min(-best);
            } else {
                hi = hi.max(best);
            }
        }
    }
    (lo + center, hi + center)
}

fn nrange_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(314);
    let (mut worst_gap, mut violations) = (0.0f64, 0);
    for _ in 0..100 {
        let a = random_sectorial_matrix(&mut rng);
        let MatrixPhase::Sector(i) = matrix_phase_interval(&a, DEFAULT_TOL).unwrap() else {
            violations += 1;
            continue;
        };
        let (lo, hi) = sampled_interval(&a, i.center(), &mut rng, 100_000);
        if lo < i.lo() - 1e-9 || hi > i.hi() + 1e-9 {
            violations += 1;
        }
        worst_gap = worst_gap.max((lo - i.lo()).abs()).max((hi - i.hi()).abs());
    }
    check(
        violations == 0 && deg(worst_gap) <= 0.5,
        format!("{violations} containment violations; max Hausdorff gap {:.4} deg", deg(worst_gap)),
    )
}

fn prop7_closed_loop() -> Outcome {
    let p = PhaseInterval::from_degrees(-159.925, 19.1142).unwrap();
    let c = vsp_phase(&PassivityIndices { delta: 2.0 / 3.0, epsilon: 1.0 / 3.0 }).unwrap();
    let (g1, _) = closed_loop_phase_bound(&p, &c).unwrap();
    let bound = g1.inflate(1f64.to_radians());

    let plant = System::Lti(realize(&bundled::mimo_plant()).unwrap());
    let ctrl = bundled::cubic_controller();
    let corpus = gen_corpus(&CorpusSpec::with_window(77, 2, 40_000, 1e-3, 50)).unwrap();
    let zero = RealSignal::zeros(40_000, 2, 1e-3).unwrap();
    let g1_map = |e1: &RealSignal| {
        simulate_feedback(&FeedbackSpec { p: &plant, c: &ctrl, e1, e2: &zero, solve: LoopSolve::Auto }).map(|t| t.y1)
    };
    let samples = empirical_nrange(&g1_map, &corpus).unwrap();
    let e = empirical_phase(&samples).unwrap();
    let inside = samples.iter().filter(|s| !s.excluded).all(|s| bound.contains_angle(s.angle(), 0.0));
    check(
        inside,
        format!(
            "bound [{:.4}, {:.4}] deg (+1 deg); sampled [{:.4}, {:.4}] deg over {} signals",
            g1.lo_deg(),
            g1.hi_deg(),
            deg(e.lo),
            deg(e.hi),
            e.n_used
        ),
    )
}

fn geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut contained = 0;
    for _ in 0..100 {
        let a = rng.random_range(0.001..9.9);
        let b = rng.random_range(a + 1e-3..10.0);
        if ForbiddenRegion::new(&SectorBound::new(a, b).unwrap()).cone_contains_disk() {
            contained += 1;
        }
    }
    let grid = FrequencyGrid::default();
    let bound = SectorBound::new(0.5, 1.5).unwrap();
    let r = |n: &[f64], d: &[f64]| Rational::new(n.to_vec(), d.to_vec()).unwrap();
    let examples = [
        ("1/(s+1)", r(&[1.0], &[1.0, 1.0])),
        ("1/(s+1)^2", r(&[1.0], &[1.0, 2.0, 1.0])),
        ("(s+3)/(s^2+4s+1)", r(&[1.0, 3.0], &[1.0, 4.0, 1.0])),
        ("-2", Rational::constant(-2.0)),
    ];
    let mut agree = true;
    let mut notes = Vec::new();
    for (name, g) in &examples {
        let cone = phase_cone_check(g, &bound, &grid, DEFAULT_TOL).unwrap();
        let circle = circle_criterion_check(g, &bound, &grid, DEFAULT_TOL_MARGIN).unwrap();
        agree &= !cone.pass || circle.pass;
        notes.push(format!("{name}: cone {:?} circle {:?}", cone.outcome, circle.outcome));
    }
    check(contained == 100 && agree, format!("cone contains disk {contained}/100; {}", notes.join(", ")))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("hilbert-properties", Duration::from_secs(5), hilbert_properties),
        ("tone-shift", Duration::MAX, tone_shift),
        ("lti-reproduction", Duration::from_secs(30), lti_reproduction),
        ("closed-form-bounds", Duration::MAX, closed_form_bounds),
        ("containment", Duration::from_secs(60), containment),
        ("verdict-triple", Duration::MAX, verdict_triple),
        ("simulation", Duration::from_secs(120), simulation),
        ("nrange-oracle", Duration::MAX, nrange_oracle),
        ("closed-loop-phase", Duration::MAX, prop7_closed_loop),
        ("geometry", Duration::MAX, geometry),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, budget, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = f();
        let took = start.elapsed();
        let ok = out.ok && took <= budget;
        if !ok {
            failures += 1;
        }
        let budget_note = if budget == Duration::MAX { String::new() } else { format!(" / budget {:.0} s", budget.as_secs_f64()) };
        println!(
            "{} {name}: {} [{:.2} s{budget_note}]",
            if ok { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64()
        );
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
