//! Phase analysis for input-output systems.
//!
//! The crate computes the phase sector of LTI transfer matrices and of
//! sampled nonlinear systems (through analytic signals and angular numerical
//! ranges), certifies (semi-)sectoriality, runs small phase / small gain /
//! circle style stability checks, and simulates feedback interconnections.
//!
//! Module map:
//! - [`signal`]: sampled signals, Hilbert transform, analytic signals, test corpora
//! - [`lti`]: rational transfer matrices, frequency sweeps, H-infinity norm, realizations
//! - [`nrange`]: numerical ranges of complex matrices and their supporting rays
//! - [`phase`]: system phase of LTI systems and closed-form bounds for nonlinear classes
//! - [`estimate`]: sampling-based phase and passivity estimates for black-box systems
//! - [`stability`]: feedback stability criteria
//! - [`sim`]: fixed-step simulation of systems and feedback loops
//! - [`io`]: JSON file formats for systems and experiments

pub mod bundled;
pub mod error;
pub mod estimate;
pub mod io;
pub mod linalg;
pub mod lti;
pub mod nrange;
pub mod phase;
pub mod sim;
pub mod signal;
pub mod stability;

pub use error::{Error, Result};
pub use lti::{FrequencyGrid, Rational, StateSpace, TransferMatrix};
pub use nrange::{MatrixPhase, MatrixSectorCertificate, PhaseInterval};
pub use phase::{SectorBound, SectorVerdict, SystemPhaseReport};
pub use signal::{ComplexSignal, CorpusSpec, RealSignal};
pub use stability::{Outcome, StabilityVerdict};

pub use num_complex::Complex64;
