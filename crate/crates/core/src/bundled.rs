//! Reference systems and excitation signals used throughout the test suite
//! and by the command-line examples.

use crate::error::Result;
use crate::lti::{Rational, TransferMatrix};
use crate::signal::RealSignal;
use crate::sim::System;

fn r(num: &[f64], den: &[f64]) -> Rational {
    Rational::new(num.to_vec(), den.to_vec()).expect("bundled entries are proper")
}

/// The 2x2 plant
///
/// ```text
/// [ (s+6)/(s^2+0.1s+1)   0.2/(s^2+s+0.1) ]
/// [ (s+3)/(s^2+4s+1)     (s+4)/(s^2+s+1) ]
/// ```
pub fn mimo_plant() -> TransferMatrix {
    TransferMatrix::new(vec![
        vec![r(&[1.0, 6.0], &[1.0, 0.1, 1.0]), r(&[0.2], &[1.0, 1.0, 0.1])],
        vec![r(&[1.0, 3.0], &[1.0, 4.0, 1.0]), r(&[1.0, 4.0], &[1.0, 1.0, 1.0])],
    ])
    .expect("bundled plant is square")
}

/// The cubic very strictly passive controller (indices 2/3 and 1/3).
pub fn cubic_controller() -> System {
    System::CubicVsp
}

/// Unit rectangular pulses on `[start, end)` per channel.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Pulse {
    pub channel: usize,
    pub start: f64,
    pub end: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

pub fn pulse_signal(pulses: &[Pulse], channels: usize, dt: f64, duration: f64) -> Result<RealSignal> {
    let len = (duration / dt).round() as usize;
    if let Some(p) = pulses.iter().find(|p| p.channel >= channels || !(p.end >= p.start)) {
        return Err(crate::error::invalid(format!("bad pulse {p:?} for {channels} channels")));
    }
    RealSignal::from_fn(len, channels, dt, |t, ch| {
        pulses
            .iter()
            .filter(|p| p.channel == ch && t >= p.start - 1e-9 * dt && t < p.end - 1e-9 * dt)
            .map(|p| p.amplitude)
            .sum()
    })
}

pub const E1_PULSES: [Pulse; 2] = [
    Pulse { channel: 0, start: 0.0, end: 1.0, amplitude: 1.0 },
    Pulse { channel: 1, start: 2.0, end: 3.0, amplitude: 1.0 },
];

pub const E2_PULSES: [Pulse; 2] = [
    Pulse { channel: 0, start: 4.0, end: 5.0, amplitude: 1.0 },
    Pulse { channel: 1, start: 6.0, end: 7.0, amplitude: 1.0 },
];

/// Default step and horizon of the feedback experiment.
pub const EXPERIMENT_DT: f64 = 1e-3;
pub const EXPERIMENT_DURATION: f64 = 60.0;

/// External signals of the feedback experiment: one unit pulse per channel.
pub fn experiment_pulses(dt: f64, duration: f64) -> Result<(RealSignal, RealSignal)> {
    Ok((pulse_signal(&E1_PULSES, 2, dt, duration)?, pulse_signal(&E2_PULSES, 2, dt, duration)?))
}
