//! Lead-I TWA features for one record: baseline removal, QRS detection,
//! R refinement, MMA over sliding beat windows, HR binning.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::preprocess::{detect_qrs_robust, remove_baseline};
use crate::twa_mma::{
    bin_features, refine_r_peaks, sliding_twa, BeatMatrix, TwaFeatureVector, TwaMeasurement, ALPHA,
    WINDOW_BEATS, WINDOW_OVERLAP,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RecordAnalysis {
    pub features: TwaFeatureVector,
    pub measurements: Vec<TwaMeasurement>,
    pub n_beats: usize,
    /// Too few beats for a single TWA window.
    pub shortage: bool,
    pub dropped: usize,
}

pub fn analyze_signal<R: Rng + ?Sized>(
    signal: &[f64],
    fs: f64,
    n_surrogates: usize,
    rng: &mut R,
) -> Result<RecordAnalysis> {
    let clean = remove_baseline(signal, fs)?;
    let peaks = refine_r_peaks(&clean, &detect_qrs_robust(&clean, fs), fs);
    let beats = match BeatMatrix::from_signal(&clean, &peaks, fs) {
        Ok(b) => b,
        Err(Error::InsufficientData(_)) => {
            return Ok(RecordAnalysis {
                features: TwaFeatureVector::default(),
                measurements: Vec::new(),
                n_beats: 0,
                shortage: true,
                dropped: 0,
            })
        }
        Err(e) => return Err(e),
    };
    let sliding = sliding_twa(&beats, WINDOW_BEATS, WINDOW_OVERLAP, n_surrogates, rng)?;
    let binned = bin_features(&sliding.measurements, ALPHA);
    Ok(RecordAnalysis {
        features: binned.features,
        measurements: sliding.measurements,
        n_beats: beats.len(),
        shortage: sliding.shortage,
        dropped: binned.dropped,
    })
}

/// One feature table row; several rows may share a record id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub record_id: String,
    pub features: TwaFeatureVector,
    pub label: bool,
}

pub const FEATURE_HEADER: &str =
    "record_id,twa_30_60,twa_60_70,twa_70_80,twa_80_90,twa_90_100,twa_100_110,label";

pub fn format_feature_row(row: &FeatureRow) -> String {
    let mut s = row.record_id.clone();
    for v in row.features.bins {
        let _ = write!(s, ",{v:.6}");
    }
    let _ = write!(s, ",{}", u8::from(row.label));
    s
}

pub fn write_feature_table(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let mut out = String::from(FEATURE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format_feature_row(r));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_feature_table(path: &Path) -> Result<Vec<FeatureRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_feature_table(&text).map_err(|m| Error::parse(path, m))
}

fn parse_feature_table(text: &str) -> std::result::Result<Vec<FeatureRow>, String> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("record_id") || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 8 {
            return Err(format!("line {}: expected 8 fields, found {}", i + 1, f.len()));
        }
        let mut bins = [0.0; 6];
        for (b, v) in bins.iter_mut().zip(&f[1..7]) {
            *b = v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && *x >= 0.0)
                .ok_or_else(|| format!("line {}: bad feature {v:?}", i + 1))?;
        }
        let label = match f[7] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(format!("line {}: bad label {other:?}", i + 1)),
        };
        rows.push(FeatureRow {
            record_id: f[0].to_string(),
            features: TwaFeatureVector { bins },
            label,
        });
    }
    Ok(rows)
}
