//! `phasekit` command-line front end.
//!
//! Exit codes: 0 success, 1 input error, 2 indefinite phase or unmet
//! hypothesis, 3 unstable input system, 4 simulation divergence.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;

use config::Cli;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const INPUT: u8 = 1;
    pub const INCONCLUSIVE: u8 = 2;
    pub const UNSTABLE: u8 = 3;
    pub const DIVERGENCE: u8 = 4;
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    use phasekit::Error;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Unstable { .. } => exit::UNSTABLE,
                Error::Divergence { .. } | Error::IllPosed { .. } => exit::DIVERGENCE,
                Error::Hypothesis(_) => exit::INCONCLUSIVE,
                _ => exit::INPUT,
            };
        }
    }
    exit::INPUT
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("PHASEKIT_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| anyhow::anyhow!("PHASEKIT_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        anyhow::bail!("PHASEKIT_THREADS must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| commands::run(&cli));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
