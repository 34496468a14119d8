//! Seeded test-input corpora.
//!
//! Every generated signal has its DC and Nyquist bins removed, so the
//! discrete Hilbert transform identities hold to machine precision. Each
//! signal index draws from its own ChaCha stream, so generation order and
//! thread count do not affect the output.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::RealSignal;
use crate::error::{invalid, Result};

/// Signal family with parameter ranges. Frequencies are in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Family {
    /// Cosine under a Gaussian envelope, frequency drawn log-uniformly.
    Tone { freq_min: f64, freq_max: f64 },
    /// Random Fourier coefficients on the bins at or below the cutoff.
    BandNoise { cutoff_min: f64, cutoff_max: f64 },
    /// Rectangular pulses of alternating sign.
    PulseTrain { width_min: f64, width_max: f64, period_min: f64, period_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyBatch {
    pub family: Family,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub len: usize,
    pub dt: f64,
    pub channels: usize,
    /// Peak amplitude range per channel, drawn log-uniformly.
    pub amplitude: (f64, f64),
    pub batches: Vec<FamilyBatch>,
}

impl CorpusSpec {
    /// 200 signals over a 40 s window at `dt = 1e-3`: 72 tones, 100 band-limited
    /// noises and 28 pulse trains.
    pub fn standard(seed: u64, channels: usize) -> Self {
        Self::with_window(seed, channels, 40_000, 1e-3, 200)
    }

    /// Same family mix as [`CorpusSpec::standard`], scaled to `count` signals.
    pub fn with_window(seed: u64, channels: usize, len: usize, dt: f64, count: usize) -> Self {
        let tones = (count * 36).div_ceil(100);
        let pulses = (count * 14) / 100;
        let noise = count.saturating_sub(tones + pulses);
        let mut batches = vec![FamilyBatch { family: Family::Tone { freq_min: 0.05, freq_max: 50.0 }, count: tones }];
        if noise > 0 {
            batches.push(FamilyBatch { family: Family::BandNoise { cutoff_min: 0.5, cutoff_max: 50.0 }, count: noise });
        }
        if pulses > 0 {
            batches.push(FamilyBatch {
                family: Family::PulseTrain { width_min: 0.1, width_max: 2.0, period_min: 1.0, period_max: 10.0 },
                count: pulses,
            });
        }
        Self { seed, len, dt, channels, amplitude: (0.1, 3.0), batches }
    }

    pub fn count(&self) -> usize {
        self.batches.iter().map(|b| b.count).sum()
    }

    pub fn duration(&self) -> f64 {
        self.len as f64 * self.dt
    }

    fn validate(&self) -> Result<()> {
        if self.count() == 0 {
            return Err(invalid("corpus must contain at least one signal"));
        }
        if self.len < 4 || self.len % 2 != 0 {
            return Err(invalid("corpus signal length must be even and at least 4"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || self.channels == 0 {
            return Err(invalid("corpus needs dt > 0 and at least one channel"));
        }
        let (a0, a1) = self.amplitude;
        if !(a0 > 0.0 && a1 >= a0) {
            return Err(invalid("amplitude range must satisfy 0 < min <= max"));
        }
        for b in &self.batches {
            let ok = match b.family {
                Family::Tone { freq_min, freq_max } => freq_min > 0.0 && freq_max >= freq_min,
                Family::BandNoise { cutoff_min, cutoff_max } => cutoff_min > 0.0 && cutoff_max >= cutoff_min,
                Family::PulseTrain { width_min, width_max, period_min, period_max } => {
                    width_min > 0.0 && width_max >= width_min && period_min > 0.0 && period_max >= period_min
                }
            };
            if !ok {
                return Err(invalid(format!("bad parameter ranges in {:?}", b.family)));
            }
        }
        Ok(())
    }

    fn family_of(&self, index: usize) -> &Family {
        let mut acc = 0;
        for b in &self.batches {
            acc += b.count;
            if index < acc {
                return &b.family;
            }
        }
        unreachable!("index checked against count")
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + rng.random::<f64>() * (hi - lo)
}

/// One channel of one family member, before spectral projection.
fn draw_channel(spec: &CorpusSpec, family: &Family, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = spec.len;
    let dt = spec.dt;
    let window = spec.duration();
    match *family {
        Family::Tone { freq_min, freq_max } => {
            let w = log_uniform(rng, freq_min, freq_max);
            let phase = uniform(rng, 0.0, 2.0 * PI);
            let center = uniform(rng, 0.25, 0.5) * window;
            let sigma = window / 10.0;
            (0..n)
                .map(|k| {
                    let t = k as f64 * dt;
                    let env = (-(t - center).powi(2) / (2.0 * sigma * sigma)).exp();
                    env * (w * t + phase).cos()
                })
                .collect()
        }
        Family::BandNoise { cutoff_min, cutoff_max } => {
            let cutoff = log_uniform(rng, cutoff_min, cutoff_max);
            let top = ((cutoff * window / (2.0 * PI)).floor() as usize).clamp(1, n / 2 - 1);
            let mut spec_buf = vec![Complex64::new(0.0, 0.0); n];
            for k in 1..=top {
                let c = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                spec_buf[k] = c;
                spec_buf[n - k] = c.conj();
            }
            let mut planner = FftPlanner::new();
            planner.plan_fft_inverse(n).process(&mut spec_buf);
            spec_buf.iter().map(|v| v.re).collect()
        }
        Family::PulseTrain { width_min, width_max, period_min, period_max } => {
            let width = uniform(rng, width_min, width_max);
            let period = uniform(rng, period_min.max(width * 1.5), period_max.max(width * 1.5));
            let start = uniform(rng, 0.0, 0.1) * window;
            let stop = 0.5 * window;
            (0..n)
                .map(|k| {
                    let t = k as f64 * dt;
                    if t < start || t >= stop {
                        return 0.0;
                    }
                    let cycles = ((t - start) / period).floor();
                    let phase = t - start - cycles * period;
                    if phase < width {
                        if cycles as i64 % 2 == 0 {
                            1.0
                        } else {
                            -1.0
                        }
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    }
}

/// Removes the DC and Nyquist bins of a real sequence of even length.
pub(crate) fn project_dc_nyquist(x: &mut [f64]) {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    buf[n / 2] = Complex64::new(0.0, 0.0);
    planner.plan_fft_inverse(n).process(&mut buf);
    for (dst, v) in x.iter_mut().zip(&buf) {
        *dst = v.re / n as f64;
    }
}

fn generate_one(spec: &CorpusSpec, index: usize) -> RealSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let family = spec.family_of(index);
    let (amp_lo, amp_hi) = spec.amplitude;

    let mut active: Vec<bool> = (0..spec.channels).map(|_| rng.random::<f64>() >= 0.2).collect();
    if !active.iter().any(|&a| a) {
        let pick = rng.random_range(0..spec.channels);
        active[pick] = true;
    }

    let mut data = vec![0.0; spec.len * spec.channels];
    for (ch, &on) in active.iter().enumerate() {
        // Draw parameters even for inactive channels so the stream layout is fixed.
        let mut x = draw_channel(spec, family, &mut rng);
        let amp = log_uniform(&mut rng, amp_lo, amp_hi) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        if !on {
            continue;
        }
        project_dc_nyquist(&mut x);
        let peak = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let gain = if peak > 0.0 { amp / peak } else { 0.0 };
        for (k, v) in x.iter().enumerate() {
            data[k * spec.channels + ch] = v * gain;
        }
    }
    RealSignal::from_parts_unchecked(data, spec.len, spec.channels, spec.dt)
}

/// Generates the corpus described by `spec`; deterministic in the seed.
pub fn gen_corpus(spec: &CorpusSpec) -> Result<Vec<RealSignal>> {
    spec.validate()?;
    Ok((0..spec.count()).into_par_iter().map(|i| generate_one(spec, i)).collect())
}
