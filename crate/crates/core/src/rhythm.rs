//! RR-interval tachograms with a bimodal (LF + respiratory HF) spectrum.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const RR_MIN: f64 = 0.2;
pub const RR_MAX: f64 = 3.0;

const LF_CENTER_HZ: f64 = 0.1;
const LOBE_SIGMA_HZ: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhythmConfig {
    /// Mean heart rate, bpm.
    pub mean_hr: f64,
    /// Breathing rate, respirations per minute.
    pub br: f64,
    /// Heart-rate standard deviation, bpm.
    pub hr_std: f64,
    pub lf_hf_ratio: f64,
    pub n_beats: usize,
    pub seed: u64,
}

impl Default for RhythmConfig {
    fn default() -> Self {
        Self {
            mean_hr: 70.0,
            br: 15.0,
            hr_std: 1.0,
            lf_hf_ratio: 0.5,
            n_beats: 0,
            seed: 0,
        }
    }
}

impl RhythmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(20.0..=250.0).contains(&self.mean_hr) {
            return Err(invalid(format!(
                "mean_hr {} outside [20, 250] bpm",
                self.mean_hr
            )));
        }
        if !(self.br > 0.0) || !self.br.is_finite() {
            return Err(invalid(format!("breathing rate must be positive, got {}", self.br)));
        }
        if !(self.hr_std >= 0.0) || !self.hr_std.is_finite() {
            return Err(invalid(format!("hr_std must be >= 0, got {}", self.hr_std)));
        }
        if !(self.lf_hf_ratio > 0.0) {
            return Err(invalid(format!(
                "lf_hf_ratio must be positive, got {}",
                self.lf_hf_ratio
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tachogram {
    pub rr: Vec<f64>,
    /// Intervals that fell outside `[RR_MIN, RR_MAX]` and were clamped.
    pub clamped: usize,
}

impl Tachogram {
    pub fn len(&self) -> usize {
        self.rr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rr.is_empty()
    }

    /// Mean instantaneous heart rate, bpm.
    pub fn mean_hr(&self) -> f64 {
        self.rr.iter().map(|r| 60.0 / r).sum::<f64>() / self.rr.len() as f64
    }
}

/// Generates `config.n_beats` RR intervals.
///
/// The heart-rate series is synthesized in the frequency domain on a beat
/// index axis (sampled at `mean_hr / 60` Hz): two Gaussian lobes at 0.1 Hz
/// and `br / 60` Hz with random phases, inverse-transformed, normalized to
/// zero mean and unit variance, then scaled to `hr_std`.
pub fn generate_tachogram(config: &RhythmConfig) -> Result<Tachogram> {
    config.validate()?;
    let n = config.n_beats;
    if n == 0 {
        return Ok(Tachogram {
            rr: Vec::new(),
            clamped: 0,
        });
    }
    let z = if config.hr_std == 0.0 || n < 3 {
        vec![0.0; n]
    } else {
        unit_variability(config)
    };
    let mut clamped = 0;
    let rr = z
        .iter()
        .map(|zi| {
            let hr = config.mean_hr + config.hr_std * zi;
            let rr = if hr > 0.0 { 60.0 / hr } else { RR_MAX };
            if !(RR_MIN..=RR_MAX).contains(&rr) {
                clamped += 1;
            }
            rr.clamp(RR_MIN, RR_MAX)
        })
        .collect();
    if clamped > 0 {
        log::warn!("{clamped} RR intervals clamped to [{RR_MIN}, {RR_MAX}] s");
    }
    Ok(Tachogram { rr, clamped })
}

fn unit_variability(config: &RhythmConfig) -> Vec<f64> {
    let n = config.n_beats;
    let fs = config.mean_hr / 60.0;
    let hf = config.br / 60.0;
    let lobe = |f: f64, c: f64| (-(f - c).powi(2) / (2.0 * LOBE_SIGMA_HZ * LOBE_SIGMA_HZ)).exp();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=n / 2 {
        let f = k as f64 * fs / n as f64;
        let power = config.lf_hf_ratio * lobe(f, LF_CENTER_HZ) + lobe(f, hf);
        let phase = rng.random::<f64>() * TAU;
        let c = Complex64::from_polar(power.sqrt(), phase);
        if 2 * k == n {
            spectrum[k] = Complex64::new(c.re, 0.0);
        } else {
            spectrum[k] = c;
            spectrum[n - k] = c.conj();
        }
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spectrum);

    let mut z: Vec<f64> = spectrum.iter().map(|c| c.re).collect();
    let mean = z.iter().sum::<f64>() / n as f64;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    for v in &mut z {
        *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
    }
    z
}
