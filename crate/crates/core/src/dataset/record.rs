//! Record files: a TOML header next to a little-endian `f32` payload,
//! stored lead-major.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthesizer::{EcgLead, EcgRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub record_id: String,
    pub fs: f64,
    pub n_samples: usize,
    pub leads: Vec<EcgLead>,
    pub label: bool,
    pub quantization_step: f64,
    /// Payload file name, relative to the header.
    pub data_file: String,
    /// Generation parameters (hr, br, twa, snr, seed, source_id, ...).
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

pub fn header_path(dir: &Path, record_id: &str) -> PathBuf {
    dir.join(format!("{record_id}.toml"))
}

/// Writes `<id>.toml` and `<id>.dat` under `dir`; returns the header path.
pub fn write_record(dir: &Path, record_id: &str, record: &EcgRecord) -> Result<PathBuf> {
    let data_file = format!("{record_id}.dat");
    let header = RecordHeader {
        record_id: record_id.to_string(),
        fs: record.fs,
        n_samples: record.n_samples(),
        leads: record.leads().iter().map(|(l, _)| *l).collect(),
        label: record.label,
        quantization_step: record.quantization_step,
        data_file: data_file.clone(),
        config: record.metadata.clone(),
    };
    let mut payload = Vec::with_capacity(4 * header.n_samples * header.leads.len());
    for (_, samples) in record.leads() {
        for &v in samples {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let dat = dir.join(&data_file);
    fs::write(&dat, payload).map_err(|e| Error::io(&dat, e))?;
    let hp = header_path(dir, record_id);
    let text = toml::to_string(&header).map_err(|e| Error::parse(&hp, e.to_string()))?;
    fs::write(&hp, text).map_err(|e| Error::io(&hp, e))?;
    Ok(hp)
}

pub fn read_header(path: &Path) -> Result<RecordHeader> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let h: RecordHeader = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    if h.leads.is_empty() || !(h.fs > 0.0) {
        return Err(Error::parse(path, "header needs leads and a positive fs"));
    }
    Ok(h)
}

/// Loads a record from its header path.
pub fn read_record(path: &Path) -> Result<EcgRecord> {
    let h = read_header(path)?;
    let dat = path.with_file_name(&h.data_file);
    let bytes = fs::read(&dat).map_err(|e| Error::io(&dat, e))?;
    let expected = 4 * h.n_samples * h.leads.len();
    if bytes.len() != expected {
        return Err(Error::parse(
            &dat,
            format!("payload is {} bytes, header implies {expected}", bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    let leads = h
        .leads
        .iter()
        .zip(values.chunks_exact(h.n_samples.max(1)))
        .map(|(l, s)| (*l, s.to_vec()))
        .collect();
    let mut rec = EcgRecord::new(h.fs, leads, h.label, h.config)
        .map_err(|e| Error::parse(path, e.to_string()))?;
    rec.quantization_step = h.quantization_step;
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact_for_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let a: Vec<f64> = (0..50).map(|i| f64::from(i as f32 * 0.125 - 2.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| -v).collect();
        let mut meta = BTreeMap::new();
        meta.insert("hr".to_string(), "72".to_string());
        let rec = EcgRecord::new(500.0, vec![(EcgLead::I, a), (EcgLead::V2, b)], true, meta).unwrap();
        let hp = write_record(dir.path(), "r7", &rec).unwrap();
        assert_eq!(hp, dir.path().join("r7.toml"));
        assert_eq!(std::fs::metadata(dir.path().join("r7.dat")).unwrap().len(), 400);
        assert_eq!(read_record(&hp).unwrap(), rec);
    }

    #[test]
    fn truncated_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let rec = EcgRecord::new(100.0, vec![(EcgLead::I, vec![0.5; 10])], false, BTreeMap::new()).unwrap();
        let hp = write_record(dir.path(), "r", &rec).unwrap();
        std::fs::write(dir.path().join("r.dat"), [0u8; 12]).unwrap();
        assert!(matches!(read_record(&hp), Err(Error::Parse { .. })));
    }
}
