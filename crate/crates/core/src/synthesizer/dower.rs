//! VCG → 12-lead reconstruction.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::VcgRecord;
use crate::error::{invalid, Result};

/// Amplitude resolution recorded with every ECG record, mV.
pub const DEFAULT_QUANTIZATION_STEP: f64 = 1.32e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EcgLead {
    I,
    II,
    III,
    #[serde(rename = "aVR")]
    AVR,
    #[serde(rename = "aVL")]
    AVL,
    #[serde(rename = "aVF")]
    AVF,
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
}

impl EcgLead {
    pub const ALL: [EcgLead; 12] = [
        EcgLead::I,
        EcgLead::II,
        EcgLead::III,
        EcgLead::AVR,
        EcgLead::AVL,
        EcgLead::AVF,
        EcgLead::V1,
        EcgLead::V2,
        EcgLead::V3,
        EcgLead::V4,
        EcgLead::V5,
        EcgLead::V6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EcgLead::I => "I",
            EcgLead::II => "II",
            EcgLead::III => "III",
            EcgLead::AVR => "aVR",
            EcgLead::AVL => "aVL",
            EcgLead::AVF => "aVF",
            EcgLead::V1 => "V1",
            EcgLead::V2 => "V2",
            EcgLead::V3 => "V3",
            EcgLead::V4 => "V4",
            EcgLead::V5 => "V5",
            EcgLead::V6 => "V6",
        }
    }
}

impl fmt::Display for EcgLead {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EcgLead {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        EcgLead::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| invalid(format!("unknown ECG lead {s:?}")))
    }
}

/// Dower coefficients (X, Y, Z) for the eight independent leads.
pub const DOWER: [(EcgLead, [f64; 3]); 8] = [
    (EcgLead::I, [0.632, -0.235, 0.059]),
    (EcgLead::II, [0.235, 1.066, -0.132]),
    (EcgLead::V1, [-0.515, 0.157, -0.917]),
    (EcgLead::V2, [0.044, 0.164, -1.387]),
    (EcgLead::V3, [0.882, 0.098, -1.277]),
    (EcgLead::V4, [1.213, 0.127, -0.601]),
    (EcgLead::V5, [1.125, 0.127, -0.086]),
    (EcgLead::V6, [0.831, 0.076, 0.230]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    pub fs: f64,
    leads: Vec<(EcgLead, Vec<f64>)>,
    pub quantization_step: f64,
    pub label: bool,
    pub metadata: BTreeMap<String, String>,
}

impl EcgRecord {
    pub fn new(
        fs: f64,
        leads: Vec<(EcgLead, Vec<f64>)>,
        label: bool,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        if !(fs > 0.0) {
            return Err(invalid("sampling rate must be positive"));
        }
        if leads.is_empty() {
            return Err(invalid("record needs at least one lead"));
        }
        let n = leads[0].1.len();
        if leads.iter().any(|(_, s)| s.len() != n) {
            return Err(invalid("all leads must have equal length"));
        }
        Ok(Self {
            fs,
            leads,
            quantization_step: DEFAULT_QUANTIZATION_STEP,
            label,
            metadata,
        })
    }

    pub fn leads(&self) -> &[(EcgLead, Vec<f64>)] {
        &self.leads
    }

    pub fn lead(&self, lead: EcgLead) -> Option<&[f64]> {
        self.leads
            .iter()
            .find(|(l, _)| *l == lead)
            .map(|(_, s)| s.as_slice())
    }

    pub fn lead_mut(&mut self, lead: EcgLead) -> Option<&mut Vec<f64>> {
        self.leads
            .iter_mut()
            .find(|(l, _)| *l == lead)
            .map(|(_, s)| s)
    }

    pub fn n_samples(&self) -> usize {
        self.leads[0].1.len()
    }

    /// Drops every lead except lead I.
    pub fn into_lead_i(mut self) -> Self {
        self.leads.retain(|(l, _)| *l == EcgLead::I);
        self
    }
}

fn combine(c: &[f64; 3], x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(y)
        .zip(z)
        .map(|((a, b), d)| c[0] * a + c[1] * b + c[2] * d)
        .collect()
}

/// Lead I only, without building the other eleven leads.
pub fn dower_lead_i(x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
    combine(&DOWER[0].1, x, y, z)
}

/// Builds the standard 12-lead ECG from a VCG record.
pub fn dower_transform(vcg: &VcgRecord) -> Result<EcgRecord> {
    let (x, y, z) = (&vcg.x, &vcg.y, &vcg.z);
    if x.len() != y.len() || x.len() != z.len() {
        return Err(invalid("VCG channels differ in length"));
    }
    let mut independent: BTreeMap<EcgLead, Vec<f64>> = DOWER
        .iter()
        .map(|(l, c)| (*l, combine(c, x, y, z)))
        .collect();
    let i = independent.remove(&EcgLead::I).unwrap();
    let ii = independent.remove(&EcgLead::II).unwrap();
    let limb = |f: fn(f64, f64) -> f64| -> Vec<f64> {
        i.iter().zip(&ii).map(|(&a, &b)| f(a, b)).collect()
    };
    let iii = limb(|a, b| b - a);
    let avr = limb(|a, b| -(a + b) / 2.0);
    let avl = limb(|a, b| a - b / 2.0);
    let avf = limb(|a, b| b - a / 2.0);

    let mut leads = vec![
        (EcgLead::I, i),
        (EcgLead::II, ii),
        (EcgLead::III, iii),
        (EcgLead::AVR, avr),
        (EcgLead::AVL, avl),
        (EcgLead::AVF, avf),
    ];
    leads.extend(independent);
    EcgRecord::new(vcg.fs, leads, vcg.label, vcg.metadata.clone())
}
