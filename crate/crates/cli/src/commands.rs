use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use phasekit::estimate::{empirical_phase, evaluate, samples_from_pairs, write_samples_csv, EmpiricalPhase, Simulated};
use phasekit::io::{ExperimentConfig, NlSpec, SystemFile};
use phasekit::phase::{analyze_lti, deg, PassivityIndices, DEFAULT_TOL};
use phasekit::signal::{analytic, gen_corpus, hilbert_real, inner_real, write_csv};
use phasekit::sim::{convergence_metric, simulate_feedback, FeedbackSpec, System};
use phasekit::stability::{
    circle_criterion_check, freqwise_small_phase_check, passivity_index_check, phase_cone_check, small_gain_check,
    small_phase_check, PhaseClass, PhaseInput, StabilityVerdict, DEFAULT_TOL_MARGIN,
};
use phasekit::{CorpusSpec, FrequencyGrid, PhaseInterval, RealSignal, SectorBound, SystemPhaseReport, TransferMatrix};

use crate::config::{Cli, Command, CorpusArgs, GridArgs};
use crate::exit;
use crate::output::Sink;

/// Slack when checking sampled angles against a closed-form bound.
const CONTAINMENT_SLACK: f64 = 1e-6;

pub fn run(cli: &Cli) -> Result<u8> {
    let config = serde_json::to_value(&cli.command)?;
    match &cli.command {
        Command::AnalyzeLti { system, grid, out } => analyze_lti_cmd(system, grid, &Sink::new(out.out.as_deref())?, config),
        Command::AnalyzeNl { system, corpus, out } => analyze_nl_cmd(system, corpus, &Sink::new(out.out.as_deref())?, config),
        Command::CheckFeedback { p, c, grid, corpus, out } => {
            check_feedback_cmd(p, c, grid, corpus, &Sink::new(out.out.as_deref())?, config)
        }
        Command::Simulate { experiment, dt, duration, out } => {
            simulate_cmd(experiment, *dt, *duration, &Sink::new(out.out.as_deref())?, config)
        }
        Command::HilbertDemo { dt, duration, periods, out } => {
            hilbert_demo_cmd(*dt, *duration, *periods, &Sink::new(out.out.as_deref())?, config)
        }
    }
}

fn load(path: &Path) -> Result<SystemFile> {
    SystemFile::load(path).with_context(|| format!("reading {}", path.display()))
}

fn build_grid(g: &GridArgs) -> Result<FrequencyGrid> {
    if g.wmax <= g.wmin {
        bail!("--wmax ({}) must exceed --wmin ({})", g.wmax, g.wmin);
    }
    Ok(FrequencyGrid::log(g.wmin, g.wmax, g.points as usize)?)
}

fn build_corpus(c: &CorpusArgs, channels: usize) -> Result<Vec<RealSignal>> {
    let mut len = (c.duration / c.dt).round() as usize;
    len += len % 2;
    if len < 4 {
        bail!("--duration / --dt gives {len} samples, need at least 4");
    }
    Ok(gen_corpus(&CorpusSpec::with_window(c.seed, channels, len, c.dt, c.corpus_size as usize))?)
}

fn interval_json(i: &PhaseInterval) -> Value {
    json!({"lo_rad": i.lo(), "hi_rad": i.hi(), "lo_deg": i.lo_deg(), "hi_deg": i.hi_deg()})
}

fn per_frequency_csv(r: &SystemPhaseReport, out: &mut Vec<u8>) -> Result<()> {
    writeln!(out, "w,lo_rad,hi_rad,lo_deg,hi_deg")?;
    let cell = |x: Option<f64>| x.map(|v| format!("{v:.17e}")).unwrap_or_default();
    for fp in r.per_frequency.iter().chain(r.limit.iter()) {
        let w = if fp.w.is_finite() { format!("{:.17e}", fp.w) } else { "inf".into() };
        writeln!(out, "{w},{},{},{},{}", cell(fp.lo), cell(fp.hi), cell(fp.lo.map(deg)), cell(fp.hi.map(deg)))?;
    }
    Ok(())
}

fn analyze_lti_cmd(path: &Path, grid: &GridArgs, sink: &Sink, config: Value) -> Result<u8> {
    let file = load(path)?;
    if !file.is_lti() {
        bail!("{} is not an LTI system; use analyze-nl", path.display());
    }
    let tf = file.transfer()?;
    let report = analyze_lti(&tf, &build_grid(grid)?, DEFAULT_TOL)?;
    sink.main_json("report.json", &json!({"config": config, "report": report}))?;
    sink.companion("phase_vs_frequency.csv", |buf| per_frequency_csv(&report, buf))?;
    if report.is_semi_sectorial() {
        Ok(exit::OK)
    } else {
        eprintln!("system is not semi-sectorial on the grid");
        Ok(exit::INCONCLUSIVE)
    }
}

fn nl_spec(path: &Path, file: SystemFile) -> Result<NlSpec> {
    match file {
        SystemFile::Nl(nl) => Ok(nl),
        _ => bail!("{} is an LTI system; use analyze-lti", path.display()),
    }
}

/// Sampled phase of a nonlinear model, when it has a simulation model.
struct Sampled {
    estimate: EmpiricalPhase,
    samples: Vec<phasekit::estimate::PhaseSample>,
    gain_lower_bound: f64,
}

fn sample_nl(nl: &NlSpec, corpus: &CorpusArgs) -> Result<Option<Sampled>> {
    if matches!(nl, NlSpec::Vsp { .. }) {
        return Ok(None);
    }
    let sys = nl.to_system()?;
    let inputs = build_corpus(corpus, nl.channels())?;
    let outputs = evaluate(&Simulated(&sys), &inputs)?;
    let samples = samples_from_pairs(&inputs, &outputs)?;
    let estimate = empirical_phase(&samples)?;
    let gain_lower_bound = inputs.iter().zip(&outputs).map(|(u, y)| y.norm() / u.norm()).fold(0.0, f64::max);
    Ok(Some(Sampled { estimate, samples, gain_lower_bound }))
}

fn empirical_json(e: &EmpiricalPhase) -> Value {
    let mut v = serde_json::to_value(e).expect("plain data");
    v["lo_deg"] = json!(deg(e.lo));
    v["hi_deg"] = json!(deg(e.hi));
    v["provenance"] = json!("empirical-inner-estimate");
    v
}

fn analyze_nl_cmd(path: &Path, corpus: &CorpusArgs, sink: &Sink, config: Value) -> Result<u8> {
    let nl = nl_spec(path, load(path)?)?;
    let closed = nl.closed_form()?;
    let sampled = sample_nl(&nl, corpus)?;
    let max_excess = match (&closed, &sampled) {
        (Some(cf), Some(s)) => Some(
            s.samples
                .iter()
                .filter(|x| !x.excluded)
                .map(|x| {
                    let a = x.angle();
                    let i = &cf.interval;
                    if i.contains_angle(a, 0.0) {
                        0.0
                    } else {
                        (a - i.hi()).rem_euclid(2.0 * PI).min((i.lo() - a).rem_euclid(2.0 * PI))
                    }
                })
                .fold(0.0, f64::max),
        ),
        _ => None,
    };
    let report = json!({
        "config": config,
        "model": nl,
        "closed_form": closed.map(|cf| {
            let mut v = interval_json(&cf.interval);
            v["provenance"] = json!(cf.provenance);
            v
        }),
        "empirical": sampled.as_ref().map(|s| empirical_json(&s.estimate)),
        "empirical_gain_lower_bound": sampled.as_ref().map(|s| s.gain_lower_bound),
        "max_excess_rad": max_excess,
        "contained": max_excess.map(|m| m <= CONTAINMENT_SLACK),
        "passivity_indices": nl.passivity_indices(),
        "sector": nl.sector(),
    });
    sink.main_json("report.json", &report)?;
    if let Some(s) = &sampled {
        sink.companion("samples.csv", |buf| Ok(write_samples_csv(&s.samples, buf)?))?;
    }
    let indefinite = closed.is_none() && sampled.as_ref().map_or(true, |s| s.estimate.indefinite);
    Ok(if indefinite { exit::INCONCLUSIVE } else { exit::OK })
}

/// One side of the loop, analyzed for every criterion that might use it.
struct Side {
    summary: Value,
    phase: PhaseInput,
    gain: Option<(f64, String)>,
    indices: Option<PassivityIndices>,
    transfer: Option<TransferMatrix>,
    sector: Option<SectorBound>,
}

fn analyze_side(path: &Path, grid: &FrequencyGrid, corpus: &CorpusArgs) -> Result<Side> {
    let file = load(path)?;
    if file.is_lti() {
        let tf = file.transfer()?;
        let report = analyze_lti(&tf, grid, DEFAULT_TOL).with_context(|| format!("analyzing {}", path.display()))?;
        let phase = PhaseInput::from_report(&report);
        let hinf = report.hinf.map(|h| h.value);
        let nu = report.nu_index;
        let summary = json!({
            "kind": "lti",
            "file": path,
            "channels": tf.dim(),
            "phase": report.interval.as_ref().map(interval_json),
            "verdict": report.verdict_name(),
            "hinf": hinf,
            "nu_index": nu,
        });
        return Ok(Side {
            summary,
            phase,
            gain: hinf.map(|g| (g, "lti-certified".into())),
            indices: nu.map(|nu| PassivityIndices { delta: nu, epsilon: nu }),
            transfer: Some(tf),
            sector: None,
        });
    }
    let SystemFile::Nl(nl) = file else { unreachable!("checked is_lti") };
    let closed = nl.closed_form()?;
    let indices = nl.passivity_indices();
    let sector = nl.sector();
    let closed_gain = match (&sector, &indices) {
        (Some(s), _) => Some((s.a().abs().max(s.b().abs()), "sector-closed-form".to_string())),
        (None, Some(i)) if i.epsilon > 0.0 => Some((1.0 / i.epsilon, "vsp-closed-form".to_string())),
        _ => None,
    };
    let (phase, gain, estimate) = match closed {
        Some(cf) => (PhaseInput::closed_form(cf.interval, cf.provenance), closed_gain, None),
        None => {
            let s = sample_nl(&nl, corpus)?.expect("models without closed form are simulated");
            let class = if s.estimate.hi - s.estimate.lo < PI { PhaseClass::Sectorial } else { PhaseClass::SemiSectorial };
            let gain = closed_gain.or(Some((s.gain_lower_bound, "empirical-lower-bound".into())));
            (PhaseInput::empirical(&s.estimate, class), gain, Some(empirical_json(&s.estimate)))
        }
    };
    let summary = json!({
        "kind": "nl",
        "file": path,
        "model": nl,
        "channels": nl.channels(),
        "phase": phase.interval.as_ref().map(interval_json),
        "class": phase.class,
        "provenance": phase.provenance,
        "empirical": estimate,
        "gain": gain.as_ref().map(|g| g.0),
        "gain_provenance": gain.as_ref().map(|g| g.1.clone()),
        "passivity_indices": indices,
    });
    Ok(Side { summary, phase, gain, indices, transfer: None, sector })
}

/// Circle and phase-cone checks of a SISO LTI side against a sector side.
fn sector_checks(lti: &Side, nl: &Side, grid: &FrequencyGrid, out: &mut Vec<StabilityVerdict>) -> Result<()> {
    let (Some(tf), Some(bound)) = (&lti.transfer, &nl.sector) else { return Ok(()) };
    if tf.dim() != 1 {
        return Ok(());
    }
    let g = tf.entry(0, 0);
    out.push(circle_criterion_check(g, bound, grid, DEFAULT_TOL_MARGIN)?);
    out.push(phase_cone_check(g, bound, grid, DEFAULT_TOL)?);
    Ok(())
}

fn check_feedback_cmd(p: &Path, c: &Path, grid: &GridArgs, corpus: &CorpusArgs, sink: &Sink, config: Value) -> Result<u8> {
    let grid = build_grid(grid)?;
    let sp = analyze_side(p, &grid, corpus)?;
    let sc = analyze_side(c, &grid, corpus)?;
    let (np, nc) = (sp.summary["channels"].as_u64(), sc.summary["channels"].as_u64());
    if np != nc {
        return Err(phasekit::Error::ShapeMismatch(format!("P has {} channels, C has {}", np.unwrap_or(0), nc.unwrap_or(0))).into());
    }

    let mut verdicts = vec![small_phase_check(&sp.phase, &sc.phase)];
    if let (Some((gp, srcp)), Some((gc, srcc))) = (&sp.gain, &sc.gain) {
        let mut v = small_gain_check(*gp, *gc)?;
        v.provenance = vec![srcp.clone(), srcc.clone()];
        v.indicative = v.provenance.iter().any(|s| s.starts_with("empirical"));
        verdicts.push(v);
    }
    if let (Some(ip), Some(ic)) = (&sp.indices, &sc.indices) {
        verdicts.push(passivity_index_check(ip, ic));
    }
    if let (Some(tp), Some(tc)) = (&sp.transfer, &sc.transfer) {
        verdicts.push(freqwise_small_phase_check(tp, tc, &grid, DEFAULT_TOL)?);
    }
    sector_checks(&sp, &sc, &grid, &mut verdicts)?;
    sector_checks(&sc, &sp, &grid, &mut verdicts)?;

    let certified_by: Vec<&str> = verdicts.iter().filter(|v| v.pass).map(|v| v.criterion.as_str()).collect();
    let stable = !certified_by.is_empty();
    let doc = json!({
        "config": config,
        "P": sp.summary,
        "C": sc.summary,
        "verdicts": verdicts,
        "stable": stable,
        "certified_by": certified_by,
    });
    sink.main_json("verdict.json", &doc)?;
    Ok(if stable { exit::OK } else { exit::INCONCLUSIVE })
}

#[derive(Serialize)]
struct SignalStats {
    peak: f64,
    convergence_metric: f64,
}

fn simulate_cmd(path: &Path, dt: Option<f64>, duration: Option<f64>, sink: &Sink, config: Value) -> Result<u8> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(phasekit::Error::from)?;
    if let Some(dt) = dt {
        cfg.dt = dt;
    }
    if let Some(d) = duration {
        cfg.duration = d;
    }
    let t_after = cfg.t_after;
    let exp = cfg.materialize(path.parent().unwrap_or(Path::new(".")))?;
    if !(t_after < exp.e1.duration()) {
        bail!("t_after = {t_after} must be below the duration {}", exp.e1.duration());
    }
    let (p, c): (System, System) = (exp.p.to_system()?, exp.c.to_system()?);
    let trace = simulate_feedback(&FeedbackSpec { p: &p, c: &c, e1: &exp.e1, e2: &exp.e2, solve: exp.config.solve })?;

    let stats = |x: &RealSignal| -> Result<SignalStats> { Ok(SignalStats { peak: x.max_abs(), convergence_metric: convergence_metric(x, t_after)? }) };
    let (s1, s2) = (stats(&trace.u1)?, stats(&trace.u2)?);
    let summary = json!({
        "config": config,
        "experiment": exp.config,
        "convergence_metric": s1.convergence_metric.max(s2.convergence_metric),
        "t_after": t_after,
        "signals": {
            "u1": s1,
            "u2": s2,
            "y1": stats(&trace.y1)?,
            "y2": stats(&trace.y2)?,
        },
        "max_loop_residual": trace.max_residual,
        "samples": exp.e1.len(),
    });
    sink.main_json("summary.json", &summary)?;
    for (name, sig) in [("e1", &exp.e1), ("e2", &exp.e2), ("u1", &trace.u1), ("u2", &trace.u2), ("y1", &trace.y1), ("y2", &trace.y2)] {
        sink.companion(&format!("trace_{name}.csv"), |buf| Ok(write_csv(sig, buf)?))?;
    }
    Ok(exit::OK)
}

fn hilbert_demo_cmd(dt: f64, duration: f64, periods: u32, sink: &Sink, config: Value) -> Result<u8> {
    let mut len = (duration / dt).round() as usize;
    len += len % 2;
    if len < 4 {
        bail!("--duration / --dt gives {len} samples, need at least 4");
    }
    let window = len as f64 * dt;
    let w = 2.0 * PI * f64::from(periods) / window;
    if 2.0 * f64::from(periods) >= len as f64 {
        bail!("{periods} periods do not fit below the Nyquist frequency with {len} samples");
    }
    let u = RealSignal::from_fn(len, 1, dt, |t, _| (w * t).cos())?;
    let hu = hilbert_real(&u)?;
    let ua = analytic(&u)?;
    let rms = ((0..len).map(|k| (hu.get(k, 0) - (w * u.time(k)).sin()).powi(2)).sum::<f64>() / len as f64).sqrt();
    let n2 = u.norm_sq();
    let data: Vec<f64> = (0..len).flat_map(|k| [u.get(k, 0), hu.get(k, 0), ua.get(k, 0).re, ua.get(k, 0).im]).collect();
    let table = RealSignal::new(data, 4, dt)?;
    let summary = json!({
        "config": config,
        "samples": len,
        "frequency_rad_s": w,
        "rms_error_vs_sin": rms,
        "isometry_rel_error": (hu.norm_sq() - n2).abs() / n2,
        "orthogonality_rel": inner_real(&u, &hu)?.abs() / n2,
        "analytic_energy_ratio": ua.norm_sq() / n2,
        "columns": {"ch0": "u = cos(w t)", "ch1": "H u", "ch2": "Re u_a", "ch3": "Im u_a"},
    });
    sink.main_json("summary.json", &summary)?;
    sink.companion("hilbert.csv", |buf| Ok(write_csv(&table, buf)?))?;
    Ok(exit::OK)
}
