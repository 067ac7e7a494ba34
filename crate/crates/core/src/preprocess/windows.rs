use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WindowSource {
    pub record_id: String,
    /// First sample of the window within the record.
    pub offset: usize,
}

/// Fixed-length analysis window.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgWindow {
    pub fs: f64,
    pub samples: Vec<f64>,
    pub sqi: Option<f64>,
    pub source: WindowSource,
}

impl EcgWindow {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }
}

/// Cuts complete windows of `window_s` seconds, advancing by
/// `window_s · (1 − overlap)`. Partial trailing windows are dropped.
pub fn segment_windows(
    signal: &[f64],
    fs: f64,
    window_s: f64,
    overlap: f64,
    record_id: &str,
) -> Result<Vec<EcgWindow>> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(invalid(format!("overlap must be in [0, 1), got {overlap}")));
    }
    if !(fs > 0.0) || !(window_s > 0.0) {
        return Err(invalid("fs and window length must be positive"));
    }
    let len = (window_s * fs).round() as usize;
    let step = ((window_s * (1.0 - overlap) * fs).round() as usize).max(1);
    if len == 0 {
        return Err(invalid("window shorter than one sample"));
    }
    Ok((0..)
        .map(|k| k * step)
        .take_while(|&start| start + len <= signal.len())
        .map(|start| EcgWindow {
            fs,
            samples: signal[start..start + len].to_vec(),
            sqi: None,
            source: WindowSource {
                record_id: record_id.to_string(),
                offset: start,
            },
        })
        .collect())
}
