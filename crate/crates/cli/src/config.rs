use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "phasekit", version, about = "Phase analysis and feedback stability checks for LTI and nonlinear systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// The parsed command line; serialized into every report as the effective config.
#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Phase interval, sectoriality, H-infinity norm and passivity index of an LTI system.
    AnalyzeLti {
        system: PathBuf,
        #[command(flatten)]
        #[serde(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        #[serde(flatten)]
        out: OutArgs,
    },
    /// Closed-form phase bound and sampled phase estimate of a nonlinear system.
    AnalyzeNl {
        system: PathBuf,
        #[command(flatten)]
        #[serde(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        #[serde(flatten)]
        out: OutArgs,
    },
    /// Runs every applicable stability criterion on the loop of two systems.
    CheckFeedback {
        p: PathBuf,
        c: PathBuf,
        #[command(flatten)]
        #[serde(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        #[serde(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        #[serde(flatten)]
        out: OutArgs,
    },
    /// Simulates a feedback experiment and reports the decay of the internal signals.
    Simulate {
        experiment: PathBuf,
        /// Overrides the experiment's step size.
        #[arg(long, value_parser = positive)]
        dt: Option<f64>,
        /// Overrides the experiment's duration.
        #[arg(long, value_parser = positive)]
        duration: Option<f64>,
        #[command(flatten)]
        #[serde(flatten)]
        out: OutArgs,
    },
    /// Hilbert transform and analytic signal of a periodic cosine.
    HilbertDemo {
        #[arg(long, default_value_t = 1e-3, value_parser = positive)]
        dt: f64,
        #[arg(long, default_value_t = 10.0, value_parser = positive)]
        duration: f64,
        /// Whole periods in the window.
        #[arg(long, default_value_t = 5)]
        periods: u32,
        #[command(flatten)]
        #[serde(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    /// Smallest positive grid frequency (rad/s).
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    pub wmin: f64,
    /// Largest grid frequency (rad/s).
    #[arg(long, default_value_t = 1e4, value_parser = positive)]
    pub wmax: f64,
    /// Log-spaced grid points (w = 0 and the limit are added).
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(2..))]
    pub points: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorpusArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub corpus_size: u64,
    /// Sample period of the test signals.
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    pub dt: f64,
    /// Length of the test signals in seconds.
    #[arg(long, default_value_t = 40.0, value_parser = positive)]
    pub duration: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutArgs {
    /// Output directory; without it the main JSON goes to stdout and
    /// companion CSV files are skipped.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("expected a positive finite number, got {s}"))
    }
}
