//! Muscle-artifact and electrode-motion noise at a calibrated SNR.
//!
//! Powers are mean squares of baseline-removed signals. MA and EM segments
//! are first normalized to equal power, then a single gain sets the SNR of
//! their sum. The median baseline filter is positively homogeneous, so the
//! SNR measured on the emitted record matches the request up to rounding.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::preprocess::remove_baseline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseKind {
    MA,
    EM,
    BW,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRecord {
    pub kind: NoiseKind,
    pub fs: f64,
    samples: Vec<f64>,
}

impl NoiseRecord {
    pub fn new(kind: NoiseKind, fs: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("noise record is empty"));
        }
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(invalid(format!("noise sampling rate must be positive, got {fs}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(invalid("noise record has non-finite samples"));
        }
        Ok(Self { kind, fs, samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }
}

/// Linear interpolation onto `target_fs`, keeping the duration.
pub fn resample_noise(noise: &NoiseRecord, target_fs: f64) -> Result<NoiseRecord> {
    if !(target_fs > 0.0) || !target_fs.is_finite() {
        return Err(invalid(format!("target rate must be positive, got {target_fs}")));
    }
    if noise.is_empty() {
        return Err(invalid("noise record is empty"));
    }
    if target_fs == noise.fs {
        return Ok(noise.clone());
    }
    let src = &noise.samples;
    let n_out = ((src.len() as f64 - 1.0) * target_fs / noise.fs).floor() as usize + 1;
    let ratio = noise.fs / target_fs;
    let out = (0..n_out)
        .map(|i| {
            let t = i as f64 * ratio;
            let j = (t.floor() as usize).min(src.len() - 1);
            let frac = t - j as f64;
            if j + 1 < src.len() {
                src[j] + (src[j + 1] - src[j]) * frac
            } else {
                src[j]
            }
        })
        .collect();
    NoiseRecord::new(noise.kind, target_fs, out)
}

/// Mean square of the baseline-removed signal.
pub fn signal_power(x: &[f64], fs: f64) -> Result<f64> {
    let r = remove_baseline(x, fs)?;
    Ok(r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64)
}

/// Amplitude gain bringing noise of power `p_noise` to `snr_db` below
/// a signal of power `p_signal`.
pub fn noise_gain(p_signal: f64, p_noise: f64, snr_db: f64) -> f64 {
    (p_signal / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt()
}

/// SNR of `noisy` against `clean`, treating the difference as noise.
pub fn measured_snr(clean: &[f64], noisy: &[f64], fs: f64) -> Result<f64> {
    if clean.len() != noisy.len() {
        return Err(invalid("clean and noisy lengths differ"));
    }
    let diff: Vec<f64> = noisy.iter().zip(clean).map(|(a, b)| a - b).collect();
    Ok(10.0 * (signal_power(clean, fs)? / signal_power(&diff, fs)?).log10())
}

fn segment<'a, R: Rng + ?Sized>(noise: &'a NoiseRecord, n: usize, rng: &mut R) -> Result<&'a [f64]> {
    if noise.len() < n {
        return Err(Error::InsufficientNoise {
            needed: n,
            available: noise.len(),
        });
    }
    let start = rng.random_range(0..=noise.len() - n);
    Ok(&noise.samples[start..start + n])
}

/// Noise components actually added by [`mix_detailed`].
#[derive(Debug, Clone)]
pub struct MixOutput {
    pub noisy: Vec<f64>,
    /// Scaled MA contribution.
    pub ma: Vec<f64>,
    /// Scaled EM contribution.
    pub em: Vec<f64>,
}

/// Adds equal-power MA and EM segments to `clean` (sampled at the noise
/// rate) so the output has the requested SNR.
pub fn mix<R: Rng + ?Sized>(
    clean: &[f64],
    ma: &NoiseRecord,
    em: &NoiseRecord,
    snr_db: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    mix_detailed(clean, ma, em, snr_db, rng).map(|m| m.noisy)
}

pub fn mix_detailed<R: Rng + ?Sized>(
    clean: &[f64],
    ma: &NoiseRecord,
    em: &NoiseRecord,
    snr_db: f64,
    rng: &mut R,
) -> Result<MixOutput> {
    if !snr_db.is_finite() {
        return Err(invalid(format!("snr must be finite, got {snr_db}")));
    }
    if ma.fs != em.fs {
        return Err(invalid(format!(
            "MA at {} Hz and EM at {} Hz; resample first",
            ma.fs, em.fs
        )));
    }
    let fs = ma.fs;
    let n = clean.len();
    let seg_ma = segment(ma, n, rng)?;
    let seg_em = segment(em, n, rng)?;
    let p_ma = signal_power(seg_ma, fs)?;
    let p_em = signal_power(seg_em, fs)?;
    if !(p_ma > 0.0) || !(p_em > 0.0) {
        return Err(invalid("noise segment has zero power after baseline removal"));
    }
    let (a, b) = (1.0 / p_ma.sqrt(), 1.0 / p_em.sqrt());
    let combined: Vec<f64> = seg_ma.iter().zip(seg_em).map(|(m, e)| a * m + b * e).collect();
    let p_signal = signal_power(clean, fs)?;
    let p_noise = signal_power(&combined, fs)?;
    let g = if p_noise > 0.0 {
        noise_gain(p_signal, p_noise, snr_db)
    } else {
        0.0
    };
    Ok(MixOutput {
        noisy: clean.iter().zip(&combined).map(|(c, v)| c + g * v).collect(),
        ma: seg_ma.iter().map(|m| g * a * m).collect(),
        em: seg_em.iter().map(|e| g * b * e).collect(),
    })
}

/// Loads a noise record from a plain-text sample file.
pub fn read_noise_file(path: &Path, kind: NoiseKind) -> Result<NoiseRecord> {
    let (fs, samples) = crate::textio::read_sample_file(path)?;
    NoiseRecord::new(kind, fs, samples).map_err(|e| Error::parse(path, e.to_string()))
}

/// Reads one channel of a waveform-database record stored in format 16
/// (16-bit little-endian two's complement), converted to physical units.
/// `header` is the `.hea` file; the signal file is resolved next to it.
pub fn read_wfdb_format16(header: &Path, channel: usize, kind: NoiseKind) -> Result<NoiseRecord> {
    let text = fs::read_to_string(header).map_err(|e| Error::io(header, e))?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let record_line = lines.next().ok_or_else(|| Error::parse(header, "empty header"))?;
    let fields: Vec<&str> = record_line.split_whitespace().collect();
    let n_sig: usize = fields
        .get(1)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(header, "missing signal count"))?;
    let fs: f64 = fields
        .get(2)
        .and_then(|v| v.split('/').next())
        .and_then(|v| v.parse().ok())
        .unwrap_or(250.0);
    if channel >= n_sig {
        return Err(invalid(format!("channel {channel} not in a {n_sig}-signal record")));
    }

    let mut specs = Vec::with_capacity(n_sig);
    for _ in 0..n_sig {
        let l = lines
            .next()
            .ok_or_else(|| Error::parse(header, "fewer signal lines than declared"))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() < 2 {
            return Err(Error::parse(header, format!("bad signal line {l:?}")));
        }
        let fmt = f[1].split(['x', ':', '+']).next().unwrap_or("");
        if fmt != "16" {
            return Err(Error::parse(header, format!("unsupported format {}", f[1])));
        }
        // gain may carry "(baseline)" and "/units"
        let gain_field = f.get(2).copied().unwrap_or("200");
        let gain_str = gain_field.split(['(', '/']).next().unwrap_or("200");
        let mut gain: f64 = gain_str
            .parse()
            .map_err(|_| Error::parse(header, format!("bad gain {gain_field:?}")))?;
        if gain == 0.0 {
            gain = 200.0;
        }
        let adc_zero: f64 = f.get(4).and_then(|v| v.parse().ok()).unwrap_or(0.0);
        let baseline: f64 = gain_field
            .split_once('(')
            .and_then(|(_, rest)| rest.split(')').next())
            .and_then(|v| v.parse().ok())
            .unwrap_or(adc_zero);
        specs.push((f[0].to_string(), gain, baseline));
    }

    let (file, gain, baseline) = &specs[channel];
    let dat = header.with_file_name(file);
    let bytes = fs::read(&dat).map_err(|e| Error::io(&dat, e))?;
    // channels sharing the file are interleaved
    let group: Vec<usize> = (0..n_sig).filter(|&i| specs[i].0 == *file).collect();
    let stride = group.len();
    let pos = group.iter().position(|&i| i == channel).expect("channel in its own group");
    let frames = bytes.len() / (2 * stride);
    let samples = (0..frames)
        .map(|k| {
            let o = 2 * (k * stride + pos);
            let raw = i16::from_le_bytes([bytes[o], bytes[o + 1]]);
            (f64::from(raw) - baseline) / gain
        })
        .collect();
    NoiseRecord::new(kind, fs, samples).map_err(|e| Error::parse(&dat, e.to_string()))
}

/// Rate of the built-in noise stand-ins, Hz.
pub const SYNTHETIC_NOISE_FS: f64 = 360.0;

fn one_pole_lowpass(x: &mut [f64], fs: f64, cutoff: f64) {
    let a = (-std::f64::consts::TAU * cutoff / fs).exp();
    let mut y = 0.0;
    for v in x.iter_mut() {
        y = (1.0 - a) * *v + a * y;
        *v = y;
    }
}

/// Seeded stand-in for a noise stress-test recording when none is
/// supplied: MA is broadband Gaussian noise, EM is band-limited low
/// frequency noise with sporadic electrode-pop transients.
pub fn synthetic_noise<R: Rng + ?Sized>(
    kind: NoiseKind,
    duration: f64,
    rng: &mut R,
) -> Result<NoiseRecord> {
    let fs = SYNTHETIC_NOISE_FS;
    let n = (duration * fs).round() as usize;
    if n == 0 {
        return Err(invalid("noise duration must be positive"));
    }
    let mut white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    match kind {
        NoiseKind::MA => {
            one_pole_lowpass(&mut white, fs, 60.0);
        }
        NoiseKind::EM => {
            one_pole_lowpass(&mut white, fs, 8.0);
            one_pole_lowpass(&mut white, fs, 8.0);
            let scale = white.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
            // pops: sharp step then slow exponential recovery
            let mut t = 0usize;
            loop {
                t += rng.random_range((2.0 * fs) as usize..(8.0 * fs) as usize);
                if t >= n {
                    break;
                }
                let amp = scale * rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let tau = rng.random_range(0.05..0.3) * fs;
                for (k, v) in white[t..].iter_mut().enumerate().take((6.0 * tau) as usize) {
                    *v += amp * (-(k as f64) / tau).exp();
                }
            }
        }
        NoiseKind::BW => {
            let f = rng.random_range(0.15..0.4);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            for (i, v) in white.iter_mut().enumerate() {
                *v = (std::f64::consts::TAU * f * i as f64 / fs + phase).sin() + 0.01 * *v;
            }
        }
    }
    NoiseRecord::new(kind, fs, white)
}
