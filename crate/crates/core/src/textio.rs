//! Plain-text sample files and template files.
//!
//! Sample files (average beats, noise) carry a `fs=<Hz>` header line
//! followed by one sample in mV per line. Blank lines and lines starting
//! with `#` are ignored.
//!
//! Template files are TOML, one per lead per subject:
//!
//! ```toml
//! source_id = "s001"
//! lead = "X"
//!
//! [[kernel]]
//! lead = "X"
//! amplitude = 1.1
//! width = 0.056
//! center = 0.0
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beat_model::{GaussianKernel, Lead, LeadTemplate, MorphologyTemplate};
use crate::error::{Error, Result};

pub fn read_sample_file(path: &Path) -> Result<(f64, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_samples(&text).map_err(|m| Error::parse(path, m))
}

fn parse_samples(text: &str) -> std::result::Result<(f64, Vec<f64>), String> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or("empty file")?;
    let fs = header
        .strip_prefix("fs=")
        .ok_or_else(|| format!("expected `fs=<Hz>` header, found {header:?}"))?
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("bad sampling rate: {e}"))?;
    if !(fs > 0.0) {
        return Err(format!("sampling rate must be positive, got {fs}"));
    }
    let samples = lines
        .map(|(i, l)| {
            l.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("line {}: bad sample {l:?}", i + 1))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((fs, samples))
}

pub fn write_sample_file(path: &Path, fs: f64, samples: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(samples.len() * 12 + 16);
    out.push_str(&format!("fs={fs}\n"));
    for s in samples {
        out.push_str(&format!("{s}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct KernelRow {
    lead: Lead,
    amplitude: f64,
    width: f64,
    center: f64,
}

#[derive(Serialize, Deserialize)]
struct TemplateFile {
    source_id: String,
    lead: Lead,
    #[serde(default, rename = "kernel")]
    kernels: Vec<KernelRow>,
}

pub fn write_template_file(path: &Path, source_id: &str, template: &LeadTemplate) -> Result<()> {
    let file = TemplateFile {
        source_id: source_id.to_string(),
        lead: template.lead,
        kernels: template
            .kernels()
            .iter()
            .map(|k| KernelRow {
                lead: template.lead,
                amplitude: k.amplitude,
                width: k.width,
                center: k.center,
            })
            .collect(),
    };
    let text = toml::to_string(&file).map_err(|e| Error::parse(path, e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_template_file(path: &Path) -> Result<(String, LeadTemplate)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: TemplateFile = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    let kernels = file
        .kernels
        .iter()
        .map(|row| {
            if row.lead != file.lead {
                return Err(Error::parse(
                    path,
                    format!("kernel lead {} in a {} template", row.lead, file.lead),
                ));
            }
            GaussianKernel::new(row.amplitude, row.width, row.center)
                .map_err(|e| Error::parse(path, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((file.source_id, LeadTemplate::new(file.lead, kernels)))
}

/// Loads every `*.toml` lead template under `dir` and assembles subjects
/// that have all three leads, ordered by source id.
pub fn load_template_dir(dir: &Path) -> Result<Vec<MorphologyTemplate>> {
    let mut groups: BTreeMap<String, [Option<LeadTemplate>; 3]> = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    for p in paths {
        let (id, lt) = read_template_file(&p)?;
        let slot = lt.lead.index();
        groups.entry(id).or_default()[slot] = Some(lt);
    }
    let mut out = Vec::new();
    for (id, leads) in groups {
        match leads {
            [Some(x), Some(y), Some(z)] => out.push(MorphologyTemplate::new(id, [x, y, z])?),
            _ => log::warn!("template {id} is missing a lead; skipped"),
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no complete X/Y/Z templates in {}",
            dir.display()
        )));
    }
    Ok(out)
}

/// Writes a subject as three lead files `<id>_<lead>.toml` under `dir`.
pub fn write_morphology(dir: &Path, template: &MorphologyTemplate) -> Result<()> {
    for lt in template.leads() {
        let path = dir.join(format!(
            "{}_{}.toml",
            template.source_id,
            lt.lead.to_string().to_lowercase()
        ));
        write_template_file(&path, &template.source_id, lt)?;
    }
    Ok(())
}
