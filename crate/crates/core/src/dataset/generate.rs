//! Grid-driven dataset generation and record analysis.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analyze::{analyze_signal, FeatureRow};
use super::config::DatasetConfig;
use super::record::{read_record, write_record};
use crate::beat_model::MorphologyTemplate;
use crate::error::{Error, Result};
use crate::noise::{mix, read_noise_file, read_wfdb_format16, resample_noise, synthetic_noise, NoiseKind, NoiseRecord};
use crate::rhythm::RhythmConfig;
use crate::seed;
use crate::synthesizer::{builtin_library, dower_lead_i, dower_transform, synthesize_vcg, EcgLead, EcgRecord, SynthesisConfig};
use crate::textio::load_template_dir;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const N_FOLDS: usize = 10;
/// Length of the built-in noise stand-ins, s.
const SYNTHETIC_NOISE_S: f64 = 1800.0;
const NOISE_STREAM: u64 = u64::MAX;
const ANALYSIS_STREAM: u64 = 0x414e_414c;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub record_id: String,
    /// Header path relative to the dataset directory.
    pub file: String,
    pub label: bool,
    pub fold: usize,
    pub hr: f64,
    pub br: f64,
    pub twa: f64,
    pub snr: f64,
    pub seed: u64,
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub master_seed: u64,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let p = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::parse(&p, e.to_string()))?;
        if m.format_version != FORMAT_VERSION {
            return Err(Error::parse(
                &p,
                format!("format_version {} not supported", m.format_version),
            ));
        }
        Ok(m)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let p = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }
}

/// Everything needed to render one record.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordPlan {
    pub index: usize,
    pub record_id: String,
    pub label: bool,
    pub fold: usize,
    pub template: usize,
    pub hr: f64,
    pub br: f64,
    pub twa: f64,
    pub snr: f64,
    pub seed: u64,
    noise_seed: u64,
}

/// Draws the per-record parameters. Even indices carry TWA, so the
/// classes split exactly; folds cycle within each class.
pub fn plan_records(cfg: &DatasetConfig, n_templates: usize) -> Vec<RecordPlan> {
    let (hr, br, twa) = (cfg.hr_grid.values(), cfg.br_grid.values(), cfg.twa_grid.values());
    (0..cfg.count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, i as u64));
            let label = i % 2 == 0;
            let template = rng.random_range(0..n_templates);
            let hr = hr[rng.random_range(0..hr.len())];
            let br = br[rng.random_range(0..br.len())];
            let twa_pick = twa[rng.random_range(0..twa.len())];
            let [lo, hi] = cfg.snr_range;
            let snr = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            RecordPlan {
                index: i,
                record_id: format!("rec{i:05}"),
                label,
                fold: (i / 2) % N_FOLDS,
                template,
                hr,
                br,
                twa: if label { twa_pick } else { 0.0 },
                snr,
                seed: rng.next_u64(),
                noise_seed: rng.next_u64(),
            }
        })
        .collect()
}

/// Templates and noise shared by every record of a dataset.
pub struct Sources {
    pub templates: Vec<MorphologyTemplate>,
    pub ma: NoiseRecord,
    pub em: NoiseRecord,
}

fn load_noise(dir: &Path, name: &str, kind: NoiseKind) -> Result<NoiseRecord> {
    let hea = dir.join(format!("{name}.hea"));
    if hea.exists() {
        return read_wfdb_format16(&hea, 0, kind);
    }
    read_noise_file(&dir.join(format!("{name}.txt")), kind)
}

impl Sources {
    pub fn load(cfg: &DatasetConfig) -> Result<Self> {
        let templates = match &cfg.templates_dir {
            Some(d) => load_template_dir(d)?,
            None => builtin_library().to_vec(),
        };
        let (ma, em) = match &cfg.noise_dir {
            Some(d) => (load_noise(d, "ma", NoiseKind::MA)?, load_noise(d, "em", NoiseKind::EM)?),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, NOISE_STREAM));
                (
                    synthetic_noise(NoiseKind::MA, SYNTHETIC_NOISE_S, &mut rng)?,
                    synthetic_noise(NoiseKind::EM, SYNTHETIC_NOISE_S, &mut rng)?,
                )
            }
        };
        Ok(Self {
            templates,
            ma: resample_noise(&ma, cfg.fs)?,
            em: resample_noise(&em, cfg.fs)?,
        })
    }
}

/// Renders one planned record with noise on every stored lead.
pub fn render_record(cfg: &DatasetConfig, src: &Sources, plan: &RecordPlan, all_leads: bool) -> Result<EcgRecord> {
    let rhythm = RhythmConfig {
        mean_hr: plan.hr,
        br: plan.br,
        hr_std: cfg.hr_std,
        ..RhythmConfig::default()
    };
    let mut sc = SynthesisConfig::new(src.templates[plan.template].clone(), rhythm);
    sc.twa_amplitude = plan.twa;
    sc.duration = cfg.duration_s;
    sc.fs = cfg.fs;
    sc.perturbation_frac = cfg.perturbation_frac;
    sc.snr_db = Some(plan.snr);
    sc.seed = plan.seed;
    let vcg = synthesize_vcg(&sc)?;
    let mut meta = vcg.metadata.clone();
    meta.insert("snr".into(), format!("{}", plan.snr));
    meta.insert("digest".into(), vcg.config_digest.clone());

    let mut rng = ChaCha8Rng::seed_from_u64(plan.noise_seed);
    let mut leads = if all_leads {
        dower_transform(&vcg)?.leads().to_vec()
    } else {
        vec![(EcgLead::I, dower_lead_i(&vcg.x, &vcg.y, &vcg.z))]
    };
    for (_, s) in leads.iter_mut() {
        *s = mix(s, &src.ma, &src.em, plan.snr, &mut rng)?;
    }
    EcgRecord::new(cfg.fs, leads, plan.label, meta)
}

fn manifest_entry(plan: &RecordPlan, src: &Sources, file: String) -> ManifestRecord {
    ManifestRecord {
        record_id: plan.record_id.clone(),
        file,
        label: plan.label,
        fold: plan.fold,
        hr: plan.hr,
        br: plan.br,
        twa: plan.twa,
        snr: plan.snr,
        seed: plan.seed,
        source_id: src.templates[plan.template].source_id.clone(),
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Writes every record and the manifest under `out`.
pub fn generate_dataset(cfg: &DatasetConfig, out: &Path, workers: usize, all_leads: bool) -> Result<DatasetManifest> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let src = Sources::load(cfg)?;
    let plans = plan_records(cfg, src.templates.len());
    let records = pool(workers)?.install(|| {
        plans
            .par_iter()
            .map(|p| {
                let rec = render_record(cfg, &src, p, all_leads)?;
                write_record(out, &p.record_id, &rec)?;
                Ok(manifest_entry(p, &src, format!("{}.toml", p.record_id)))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        master_seed: cfg.seed,
        records,
    };
    manifest.write(out)?;
    Ok(manifest)
}

fn analysis_rng(master: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed::derive(master ^ ANALYSIS_STREAM, index as u64))
}

fn lead_i(rec: &EcgRecord, id: &str) -> Result<Vec<f64>> {
    rec.lead(EcgLead::I)
        .map(<[f64]>::to_vec)
        .ok_or_else(|| Error::InvalidArgument(format!("record {id} has no lead I")))
}

/// Generates records in memory and analyzes them without writing payloads.
pub fn stream_features(cfg: &DatasetConfig, workers: usize, n_surrogates: usize) -> Result<Vec<FeatureRow>> {
    cfg.validate()?;
    let src = Sources::load(cfg)?;
    let plans = plan_records(cfg, src.templates.len());
    pool(workers)?.install(|| {
        plans
            .par_iter()
            .map(|p| {
                let rec = render_record(cfg, &src, p, false)?;
                let a = analyze_signal(&lead_i(&rec, &p.record_id)?, rec.fs, n_surrogates, &mut analysis_rng(cfg.seed, p.index))?;
                Ok(FeatureRow {
                    record_id: p.record_id.clone(),
                    features: a.features,
                    label: p.label,
                })
            })
            .collect()
    })
}

/// Analyzes the listed record headers in order.
pub fn analyze_records(headers: &[PathBuf], master_seed: u64, workers: usize, n_surrogates: usize) -> Result<Vec<FeatureRow>> {
    pool(workers)?.install(|| {
        headers
            .par_iter()
            .enumerate()
            .map(|(i, h)| {
                let rec = read_record(h)?;
                let id = h
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("rec{i}"));
                let a = analyze_signal(&lead_i(&rec, &id)?, rec.fs, n_surrogates, &mut analysis_rng(master_seed, i))?;
                Ok(FeatureRow {
                    record_id: id,
                    features: a.features,
                    label: rec.label,
                })
            })
            .collect()
    })
}

/// Analyzes every record of a generated dataset.
pub fn analyze_dataset(dir: &Path, workers: usize, n_surrogates: usize) -> Result<Vec<FeatureRow>> {
    let m = DatasetManifest::read(dir)?;
    let headers: Vec<PathBuf> = m.records.iter().map(|r| dir.join(&r.file)).collect();
    analyze_records(&headers, m.master_seed, workers, n_surrogates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(count: usize, seed: u64) -> DatasetConfig {
        DatasetConfig {
            count,
            seed,
            duration_s: 6.0,
            fs: 250.0,
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn plan_is_balanced_and_stratified() {
        let plans = plan_records(&small(200, 5), 47);
        assert_eq!(plans.iter().filter(|p| p.label).count(), 100);
        for fold in 0..N_FOLDS {
            let members: Vec<_> = plans.iter().filter(|p| p.fold == fold).collect();
            assert_eq!(members.len(), 20);
            assert_eq!(members.iter().filter(|p| p.label).count(), 10);
        }
        for p in &plans {
            assert_eq!(p.twa > 0.0, p.label);
            assert!((60.0..=110.0).contains(&p.hr) && (p.hr as i64) % 2 == 0);
            assert!((12.0..=20.0).contains(&p.br));
            assert!((15.0..=30.0).contains(&p.snr));
            if p.label {
                assert_eq!(p.twa.fract(), 0.0);
                assert!((20.0..=100.0).contains(&p.twa));
            }
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let cfg = small(10, 9);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = generate_dataset(&cfg, a.path(), 1, false).unwrap();
        let mb = generate_dataset(&cfg, b.path(), 3, false).unwrap();
        assert_eq!(ma, mb);
        for r in &ma.records {
            for ext in ["toml", "dat"] {
                let f = format!("{}.{ext}", r.record_id);
                assert_eq!(fs::read(a.path().join(&f)).unwrap(), fs::read(b.path().join(&f)).unwrap());
            }
        }
        assert_eq!(DatasetManifest::read(a.path()).unwrap(), ma);
    }

    #[test]
    fn all_leads_stores_twelve() {
        let cfg = small(10, 2);
        let dir = tempfile::tempdir().unwrap();
        let m = generate_dataset(&cfg, dir.path(), 1, true).unwrap();
        let rec = read_record(&dir.path().join(&m.records[0].file)).unwrap();
        assert_eq!(rec.leads().len(), 12);
        assert_eq!(rec.n_samples(), 1500);
    }
}
