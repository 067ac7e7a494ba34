//! Artificial VCG/ECG records from morphology templates.
//!
//! A record is produced by perturbing the template (rejecting draws whose
//! QTc leaves the normal range), splitting it into even/odd variants that
//! carry the requested alternans, and rendering beat by beat along a
//! generated tachogram. Breathing rate enters only through the RR series.

mod dower;
mod qt;
pub mod templates;
mod twa;

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beat_model::{Lead, MorphologyTemplate};
use crate::error::{Error, Result};
use crate::rhythm::{generate_tachogram, RhythmConfig};

pub use dower::{dower_lead_i, dower_transform, EcgLead, EcgRecord, DEFAULT_QUANTIZATION_STEP, DOWER};
pub use qt::{
    cycle_length, dataset_hr_grid, measure_qt, qt_fraction, qtc_at_hr, qtc_bazett, validate_qtc,
    QTC_MAX, QTC_MIN, REFERENCE_RR, T_PHASE_RANGE,
};
pub use templates::builtin_library;
pub use twa::{apply_twa, perturb_template};

/// Bounded number of perturbation redraws before giving up on a record.
pub const QTC_MAX_RETRIES: usize = 100;

pub const TWA_MIN_UV: f64 = 20.0;
pub const TWA_MAX_UV: f64 = 100.0;

/// Kernels are rendered out to this many standard deviations.
const RENDER_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub template: MorphologyTemplate,
    pub rhythm: RhythmConfig,
    /// Alternans amplitude, µV: 0 or within [20, 100].
    pub twa_amplitude: f64,
    /// Record length, s.
    pub duration: f64,
    pub fs: f64,
    pub perturbation_frac: f64,
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl SynthesisConfig {
    pub fn new(template: MorphologyTemplate, rhythm: RhythmConfig) -> Self {
        Self {
            template,
            rhythm,
            twa_amplitude: 0.0,
            duration: 70.0,
            fs: 1000.0,
            perturbation_frac: 0.045,
            snr_db: None,
            seed: 0,
        }
    }

    pub fn label(&self) -> bool {
        self.twa_amplitude > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let twa = self.twa_amplitude;
        if !(twa == 0.0 || (TWA_MIN_UV..=TWA_MAX_UV).contains(&twa)) {
            return bad(format!("twa_amplitude {twa} µV must be 0 or within [20, 100]"));
        }
        if !(0.0..=0.10).contains(&self.perturbation_frac) {
            return bad(format!(
                "perturbation_frac {} outside [0, 0.10]",
                self.perturbation_frac
            ));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.fs > 0.0) || !self.fs.is_finite() {
            return bad(format!("fs must be positive, got {}", self.fs));
        }
        if let Some(snr) = self.snr_db {
            if !(15.0..=30.0).contains(&snr) {
                return bad(format!("snr_db {snr} outside [15, 30]"));
            }
        }
        self.rhythm
            .validate()
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Stable 64-bit FNV-1a digest of the serialized config.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcgRecord {
    pub fs: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// R-peak sample index of every beat whose R peak lies inside the record.
    pub beat_onsets: Vec<usize>,
    pub label: bool,
    pub config_digest: String,
    pub metadata: BTreeMap<String, String>,
}

impl VcgRecord {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn channel(&self, lead: Lead) -> &[f64] {
        match lead {
            Lead::X => &self.x,
            Lead::Y => &self.y,
            Lead::Z => &self.z,
        }
    }
}

/// Draws perturbed templates until one passes the QTc check.
pub fn draw_valid_template<R: rand::Rng + ?Sized>(
    template: &MorphologyTemplate,
    max_frac: f64,
    hr_grid: &[f64],
    rng: &mut R,
) -> Result<MorphologyTemplate> {
    for _ in 0..QTC_MAX_RETRIES {
        let t = perturb_template(template, max_frac, rng)?;
        if validate_qtc(&t, hr_grid) {
            return Ok(t);
        }
    }
    Err(Error::GenerationFailed {
        retries: QTC_MAX_RETRIES,
    })
}

struct Beat {
    r_time: f64,
    rr: f64,
    odd: bool,
}

/// Renders one clean VCG record.
pub fn synthesize_vcg(config: &SynthesisConfig) -> Result<VcgRecord> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let template = draw_valid_template(
        &config.template,
        config.perturbation_frac,
        &dataset_hr_grid(),
        &mut rng,
    )?;
    let (even, odd) = apply_twa(&template, config.twa_amplitude)?;

    let mut rhythm = config.rhythm.clone();
    rhythm.n_beats = (config.duration * rhythm.mean_hr / 60.0 * 1.5).ceil() as usize + 8;
    rhythm.seed ^= rng.next_u64();
    let tach = generate_tachogram(&rhythm)?;
    let rr_at = |k: usize| tach.rr[k % tach.rr.len()];

    // beat −1 covers the record start; beats run past the end so trailing
    // P waves of the next beat are present
    let mut beats = vec![Beat {
        r_time: 0.4 * rr_at(0) - rr_at(0),
        rr: rr_at(0),
        odd: true,
    }];
    let mut t = 0.4 * rr_at(0);
    let mut k = 0;
    while t < config.duration + 1.0 {
        beats.push(Beat {
            r_time: t,
            rr: rr_at(k),
            odd: k % 2 == 1,
        });
        k += 1;
        t += rr_at(k);
    }

    let n = (config.duration * config.fs).round() as usize;
    let mut channels = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for beat in &beats {
        let tpl = if beat.odd { &odd } else { &even };
        let scale = cycle_length(beat.rr);
        for lead in Lead::ALL {
            let out = &mut channels[lead.index()];
            for kern in tpl.lead(lead).kernels() {
                let center = (beat.r_time + kern.center / TAU * scale) * config.fs;
                let sigma = kern.width / TAU * scale * config.fs;
                let reach = RENDER_SIGMAS * sigma;
                let lo = (center - reach).ceil().max(0.0) as usize;
                let hi = ((center + reach).floor() + 1.0).clamp(0.0, n as f64) as usize;
                let inv = 1.0 / (2.0 * sigma * sigma);
                for (i, v) in out.iter_mut().enumerate().take(hi).skip(lo) {
                    let d = i as f64 - center;
                    *v += kern.amplitude * (-d * d * inv).exp();
                }
            }
        }
    }

    let beat_onsets = beats[1..]
        .iter()
        .filter(|b| b.r_time < config.duration)
        .map(|b| (b.r_time * config.fs).round() as usize)
        .filter(|&i| i < n)
        .collect();

    let mut metadata = BTreeMap::new();
    metadata.insert("hr".into(), format!("{}", config.rhythm.mean_hr));
    metadata.insert("br".into(), format!("{}", config.rhythm.br));
    metadata.insert("twa".into(), format!("{}", config.twa_amplitude));
    metadata.insert("seed".into(), config.seed.to_string());
    metadata.insert("source_id".into(), config.template.source_id.clone());
    if let Ok(q) = qtc_at_hr(&template, config.rhythm.mean_hr) {
        metadata.insert("qtc".into(), format!("{q:.4}"));
    }

    let [x, y, z] = channels;
    Ok(VcgRecord {
        fs: config.fs,
        x,
        y,
        z,
        beat_onsets,
        label: config.label(),
        config_digest: config.digest(),
        metadata,
    })
}
