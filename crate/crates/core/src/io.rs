//! JSON file formats.
//!
//! A system file is tagged by `kind`:
//!
//! ```json
//! {"kind": "tf", "entries": [[{"num": [1, 6], "den": [1, 0.1, 1]}]]}
//! {"kind": "ss", "A": [[-1]], "B": [[1]], "C": [[1]], "D": [[0]]}
//! {"kind": "nl", "model": "quantizer", "rho": 0.3333333333333333}
//! ```
//!
//! Nonlinear models are `sector` (with an optional `map` realizing it),
//! `quantizer`, `vsp` (closed-form only), `cubic-vsp` and `static`.
//!
//! An experiment file names two systems (inline or by relative path) and the
//! external signals:
//!
//! ```json
//! {"P": "mimo_plant.json", "C": {"kind": "nl", "model": "cubic-vsp"},
//!  "e1": {"source": "pulses", "pulses": [{"channel": 0, "start": 0, "end": 1}]},
//!  "e2": {"source": "zero"}, "dt": 0.001, "duration": 60}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bundled::{pulse_signal, Pulse, EXPERIMENT_DT, EXPERIMENT_DURATION};
use crate::error::{invalid, Error, Result};
use crate::lti::{realize, StateSpace, TransferMatrix};
use crate::nrange::PhaseInterval;
use crate::phase::{quantizer_sector, sector_phase, vsp_phase, PassivityIndices, QuantizerParams, SectorBound};
use crate::signal::{read_csv, RealSignal};
use crate::sim::{LoopSolve, SectorFunction, System};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SystemFile {
    Tf { entries: TransferMatrix },
    Ss(StateSpace),
    Nl(NlSpec),
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum NlSpec {
    /// Any static map in the sector `[a, b]`; `map` picks the one simulated
    /// (default: slope `b` up to `|x| = 1`, slope `a` beyond).
    Sector {
        a: f64,
        b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map: Option<SectorFunction>,
        #[serde(default = "one")]
        channels: usize,
    },
    Quantizer {
        rho: f64,
        #[serde(default = "one")]
        channels: usize,
    },
    /// Very strictly passive with the given indices; no simulation model.
    Vsp { delta: f64, epsilon: f64 },
    /// The bundled two-channel cubic controller.
    CubicVsp,
    Static {
        map: SectorFunction,
        #[serde(default = "one")]
        channels: usize,
    },
}

/// A closed-form phase bound and its provenance label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub interval: PhaseInterval,
    pub provenance: &'static str,
}

impl NlSpec {
    pub fn closed_form(&self) -> Result<Option<ClosedForm>> {
        let cf = |interval, provenance| Ok(Some(ClosedForm { interval, provenance }));
        match self {
            NlSpec::Sector { a, b, .. } => cf(sector_phase(&SectorBound::new(*a, *b)?).0, "sector-closed-form"),
            NlSpec::Quantizer { rho, .. } => {
                cf(sector_phase(&quantizer_sector(&QuantizerParams::new(*rho)?)).0, "quantizer-closed-form")
            }
            NlSpec::Vsp { .. } | NlSpec::CubicVsp => cf(vsp_phase(&self.passivity_indices().expect("vsp model"))?, "vsp-closed-form"),
            NlSpec::Static { .. } => Ok(None),
        }
    }

    /// Input and output passivity indices implied by the model, if known.
    pub fn passivity_indices(&self) -> Option<PassivityIndices> {
        match self {
            NlSpec::Vsp { delta, epsilon } => Some(PassivityIndices { delta: *delta, epsilon: *epsilon }),
            NlSpec::CubicVsp => Some(PassivityIndices { delta: 2.0 / 3.0, epsilon: 1.0 / 3.0 }),
            NlSpec::Sector { a, b, .. } => SectorBound::new(*a, *b).ok().map(|s| s.passivity_indices()),
            NlSpec::Quantizer { rho, .. } => QuantizerParams::new(*rho).ok().map(|q| quantizer_sector(&q).passivity_indices()),
            NlSpec::Static { .. } => None,
        }
    }

    pub fn sector(&self) -> Option<SectorBound> {
        match self {
            NlSpec::Sector { a, b, .. } => SectorBound::new(*a, *b).ok(),
            NlSpec::Quantizer { rho, .. } => QuantizerParams::new(*rho).ok().map(|q| quantizer_sector(&q)),
            _ => None,
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            NlSpec::Sector { channels, .. } | NlSpec::Quantizer { channels, .. } | NlSpec::Static { channels, .. } => *channels,
            NlSpec::Vsp { .. } => 1,
            NlSpec::CubicVsp => 2,
        }
    }

    pub fn to_system(&self) -> Result<System> {
        match self {
            NlSpec::Sector { a, b, map, channels } => {
                SectorBound::new(*a, *b)?;
                let map = map.clone().unwrap_or(SectorFunction::Saturated { a: *a, b: *b, knee: 1.0 });
                System::static_map(map, *channels)
            }
            NlSpec::Quantizer { rho, channels } => {
                QuantizerParams::new(*rho)?;
                System::static_map(SectorFunction::LogQuantizer { rho: *rho }, *channels)
            }
            NlSpec::Static { map, channels } => System::static_map(map.clone(), *channels),
            NlSpec::CubicVsp => Ok(System::CubicVsp),
            NlSpec::Vsp { .. } => Err(invalid("the vsp model has no simulation model; use cubic-vsp or a static map")),
        }
    }
}

impl SystemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn is_lti(&self) -> bool {
        !matches!(self, SystemFile::Nl(_))
    }

    /// The transfer matrix of an LTI file.
    pub fn transfer(&self) -> Result<TransferMatrix> {
        match self {
            SystemFile::Tf { entries } => Ok(entries.clone()),
            SystemFile::Ss(ss) => ss.to_transfer(),
            SystemFile::Nl(_) => Err(invalid("expected an LTI system (kind tf or ss)")),
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            SystemFile::Tf { entries } => entries.dim(),
            SystemFile::Ss(ss) => ss.channels(),
            SystemFile::Nl(nl) => nl.channels(),
        }
    }

    pub fn to_system(&self) -> Result<System> {
        match self {
            SystemFile::Tf { entries } => Ok(System::Lti(realize(entries)?)),
            SystemFile::Ss(ss) => Ok(System::Lti(ss.clone())),
            SystemFile::Nl(nl) => nl.to_system(),
        }
    }
}

/// A system given inline or as a path relative to the referencing file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemRef {
    Path(PathBuf),
    Inline(SystemFile),
}

impl SystemRef {
    pub fn resolve(&self, base: &Path) -> Result<SystemFile> {
        match self {
            SystemRef::Path(p) => SystemFile::load(&base.join(p)),
            SystemRef::Inline(s) => Ok(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum SignalSource {
    Pulses { pulses: Vec<Pulse> },
    /// A CSV with a `t` column followed by one column per channel.
    Csv { path: PathBuf },
    Zero,
}

impl SignalSource {
    pub fn build(&self, base: &Path, channels: usize, dt: f64, duration: f64) -> Result<RealSignal> {
        match self {
            SignalSource::Pulses { pulses } => pulse_signal(pulses, channels, dt, duration),
            SignalSource::Zero => RealSignal::zeros((duration / dt).round() as usize, channels, dt),
            SignalSource::Csv { path } => {
                let s = read_csv(fs::File::open(base.join(path))?)?;
                if s.channels() != channels {
                    return Err(Error::ShapeMismatch(format!("{} has {} channels, expected {channels}", path.display(), s.channels())));
                }
                if (s.dt() - dt).abs() > 1e-9 * dt {
                    return Err(invalid(format!("{} has step {}, expected {dt}", path.display(), s.dt())));
                }
                Ok(s)
            }
        }
    }
}

fn default_dt() -> f64 {
    EXPERIMENT_DT
}

fn default_duration() -> f64 {
    EXPERIMENT_DURATION
}

fn default_t_after() -> f64 {
    40.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(rename = "P")]
    pub p: SystemRef,
    #[serde(rename = "C")]
    pub c: SystemRef,
    pub e1: SignalSource,
    pub e2: SignalSource,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default)]
    pub solve: LoopSolve,
    /// Start of the window used for the decay ratio.
    #[serde(default = "default_t_after")]
    pub t_after: f64,
}

/// An experiment with systems and signals materialized.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub p: SystemFile,
    pub c: SystemFile,
    pub e1: RealSignal,
    pub e2: RealSignal,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Experiment> {
        let cfg: ExperimentConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.materialize(path.parent().unwrap_or(Path::new(".")))
    }

    pub fn materialize(self, base: &Path) -> Result<Experiment> {
        if !(self.dt > 0.0 && self.duration > self.dt) {
            return Err(invalid(format!("need 0 < dt < duration, got dt = {}, duration = {}", self.dt, self.duration)));
        }
        let p = self.p.resolve(base)?;
        let c = self.c.resolve(base)?;
        let n = p.channels();
        if c.channels() != n {
            return Err(Error::ShapeMismatch(format!("P has {n} channels, C has {}", c.channels())));
        }
        let e1 = self.e1.build(base, n, self.dt, self.duration)?;
        let e2 = self.e2.build(base, n, self.dt, self.duration)?;
        Ok(Experiment { config: self, p, c, e1, e2 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data");

    fn data(name: &str) -> PathBuf {
        Path::new(DATA).join(name)
    }

    #[test]
    fn bundled_plant_file_matches_library() {
        let f = SystemFile::load(&data("mimo_plant.json")).unwrap();
        assert_eq!(f.transfer().unwrap(), bundled::mimo_plant());
    }

    #[test]
    fn tf_round_trip() {
        let f = SystemFile::Tf { entries: bundled::mimo_plant() };
        let text = serde_json::to_string(&f).unwrap();
        assert!(text.starts_with("{\"kind\":\"tf\""));
        assert_eq!(SystemFile::from_json(&text).unwrap(), f);
    }

    #[test]
    fn ss_file_parses() {
        let f = SystemFile::from_json(r#"{"kind":"ss","A":[[-1]],"B":[[1]],"C":[[1]],"D":[[0]]}"#).unwrap();
        let g = f.transfer().unwrap();
        assert!((g.freq_response(1.0).unwrap()[(0, 0)] - num_complex::Complex64::new(0.5, -0.5)).norm() < 1e-12);
    }

    #[test]
    fn nl_models() {
        let q = SystemFile::from_json(r#"{"kind":"nl","model":"quantizer","rho":0.3333333333333333}"#).unwrap();
        let SystemFile::Nl(q) = q else { panic!() };
        let cf = q.closed_form().unwrap().unwrap();
        assert!((cf.interval.hi() - std::f64::consts::PI / 6.0).abs() < 1e-12);
        assert!(q.to_system().is_ok());

        let v: NlSpec = serde_json::from_str(r#"{"model":"vsp","delta":1.0,"epsilon":1.0}"#).unwrap();
        assert!(matches!(v.closed_form(), Err(Error::Domain(_))));
        assert!(v.to_system().is_err());

        let c: NlSpec = serde_json::from_str(r#"{"model":"cubic-vsp"}"#).unwrap();
        assert!((c.closed_form().unwrap().unwrap().interval.hi_deg() - 19.4712).abs() < 5e-5);
        assert_eq!(c.channels(), 2);

        let s: NlSpec = serde_json::from_str(r#"{"model":"sector","a":0.5,"b":1.5,"map":{"shape":"tanh","a":0.5,"b":1.5}}"#).unwrap();
        assert!(matches!(s.to_system().unwrap(), System::Static(_)));
    }

    #[test]
    fn bundled_experiment_loads() {
        let ex = ExperimentConfig::load(&data("experiment.json")).unwrap();
        let (e1, e2) = bundled::experiment_pulses(EXPERIMENT_DT, EXPERIMENT_DURATION).unwrap();
        assert_eq!(ex.e1, e1);
        assert_eq!(ex.e2, e2);
        assert_eq!(ex.p.transfer().unwrap(), bundled::mimo_plant());
        assert!(matches!(ex.c, SystemFile::Nl(NlSpec::CubicVsp)));
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"P":{"kind":"nl","model":"quantizer","rho":0.5},"C":{"kind":"nl","model":"cubic-vsp"},"e1":{"source":"zero"},"e2":{"source":"zero"},"duration":1}"#,
        )
        .unwrap();
        assert!(matches!(cfg.materialize(Path::new(".")), Err(Error::ShapeMismatch(_))));
    }
}
