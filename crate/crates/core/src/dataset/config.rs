use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthesizer::{TWA_MAX_UV, TWA_MIN_UV};

/// Parameter grid: an inclusive `start..=stop` range by `step`, or an
/// explicit value list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Range { start: f64, stop: f64, step: f64 },
    Values(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Vec::new();
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|k| start + k as f64 * step).collect()
            }
        }
    }
}

fn range(start: f64, stop: f64, step: f64) -> Grid {
    Grid::Range { start, stop, step }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub count: usize,
    pub seed: u64,
    pub hr_grid: Grid,
    pub br_grid: Grid,
    pub twa_grid: Grid,
    /// Uniform SNR range, dB.
    pub snr_range: [f64; 2],
    pub duration_s: f64,
    pub fs: f64,
    pub perturbation_frac: f64,
    /// Heart-rate standard deviation of the tachogram, bpm.
    pub hr_std: f64,
    /// Directory of fitted template files; the built-in library when unset.
    pub templates_dir: Option<PathBuf>,
    /// Directory holding `ma` and `em` noise records (`.hea`/`.dat` or
    /// `.txt`); seeded stand-ins when unset.
    pub noise_dir: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            count: 200,
            seed: 0,
            hr_grid: range(60.0, 110.0, 2.0),
            br_grid: range(12.0, 20.0, 1.0),
            twa_grid: range(20.0, 100.0, 1.0),
            snr_range: [15.0, 30.0],
            duration_s: 70.0,
            fs: 1000.0,
            perturbation_frac: 0.045,
            hr_std: 1.0,
            templates_dir: None,
            noise_dir: None,
        }
    }
}

impl DatasetConfig {
    /// Reads a TOML config; relative directories resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for dir in [&mut cfg.templates_dir, &mut cfg.noise_dir].into_iter().flatten() {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.count % 2 == 1 {
            return bad(format!("count {} is odd; classes must split evenly", self.count));
        }
        if self.count < 10 {
            return bad(format!("count {} is below 10; cannot stratify 10 folds", self.count));
        }
        for (name, grid) in [("hr_grid", &self.hr_grid), ("br_grid", &self.br_grid), ("twa_grid", &self.twa_grid)] {
            let v = grid.values();
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return bad(format!("{name} is empty or not finite"));
            }
        }
        if self.hr_grid.values().iter().any(|h| !(20.0..=250.0).contains(h)) {
            return bad("hr_grid values must lie in [20, 250] bpm".into());
        }
        if self.br_grid.values().iter().any(|b| *b <= 0.0) {
            return bad("br_grid values must be positive".into());
        }
        if self
            .twa_grid
            .values()
            .iter()
            .any(|t| !(TWA_MIN_UV..=TWA_MAX_UV).contains(t))
        {
            return bad(format!("twa_grid values must lie in [{TWA_MIN_UV}, {TWA_MAX_UV}] µV"));
        }
        let [lo, hi] = self.snr_range;
        if !(15.0..=30.0).contains(&lo) || !(15.0..=30.0).contains(&hi) || lo > hi {
            return bad(format!("snr_range [{lo}, {hi}] must be an interval within [15, 30] dB"));
        }
        if !(self.duration_s > 0.0) || !(self.fs > 0.0) {
            return bad("duration_s and fs must be positive".into());
        }
        if !(0.0..=0.10).contains(&self.perturbation_frac) {
            return bad(format!("perturbation_frac {} outside [0, 0.10]", self.perturbation_frac));
        }
        if !(self.hr_std >= 0.0) {
            return bad("hr_std must be non-negative".into());
        }
        Ok(())
    }
}
