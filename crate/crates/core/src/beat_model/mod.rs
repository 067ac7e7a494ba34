//! Gaussian-sum beat morphology.
//!
//! A beat is described per VCG lead as a sum of Gaussian kernels over the
//! cardiac phase `θ ∈ (−π, π]`, with the R peak sitting at phase 0:
//!
//! ```text
//! z(θ) = Σᵢ aᵢ · exp(−Δθᵢ² / (2 bᵢ²)),   Δθᵢ = wrap(θ − θᵢ)
//! ```
//!
//! Kernel parameters are recovered from an average beat with a damped
//! Gauss-Newton fit (see [`fit_template`]).

mod average;
mod fit;

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use average::{compute_average_beat, compute_average_beat_on_grid, AVERAGE_BEAT_GRID};
pub use fit::{fit_template, initial_kernels, FitOptions, FitOutcome, MIN_WIDTH};

/// Default number of kernels per lead.
pub const DEFAULT_KERNELS: usize = 9;

/// Maps any finite phase into `(−π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let mut w = theta.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    // rem_euclid can land exactly on TAU for tiny negative inputs
    if w <= -PI {
        w += TAU;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Lead {
    X,
    Y,
    Z,
}

impl Lead {
    pub const ALL: [Lead; 3] = [Lead::X, Lead::Y, Lead::Z];

    pub fn index(self) -> usize {
        match self {
            Lead::X => 0,
            Lead::Y => 1,
            Lead::Z => 2,
        }
    }
}

impl fmt::Display for Lead {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Lead::X => "X",
            Lead::Y => "Y",
            Lead::Z => "Z",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Lead {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "X" => Ok(Lead::X),
            "Y" => Ok(Lead::Y),
            "Z" => Ok(Lead::Z),
            other => Err(invalid(format!("unknown lead {other:?}"))),
        }
    }
}

/// One Gaussian component: amplitude in mV, width and center in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
}

impl GaussianKernel {
    /// Builds a kernel, wrapping the center into `(−π, π]`.
    pub fn new(amplitude: f64, width: f64, center: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(invalid(format!("kernel width must be positive, got {width}")));
        }
        if !amplitude.is_finite() || !center.is_finite() {
            return Err(invalid("kernel parameters must be finite"));
        }
        Ok(Self {
            amplitude,
            width,
            center: wrap_phase(center),
        })
    }

    #[inline]
    pub fn value_at(&self, phase: f64) -> f64 {
        let d = wrap_phase(phase - self.center);
        self.amplitude * (-d * d / (2.0 * self.width * self.width)).exp()
    }
}

/// Kernel set for one VCG lead, kept sorted by center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadTemplate {
    pub lead: Lead,
    kernels: Vec<GaussianKernel>,
}

impl LeadTemplate {
    pub fn new(lead: Lead, mut kernels: Vec<GaussianKernel>) -> Self {
        kernels.sort_by(|a, b| a.center.total_cmp(&b.center));
        Self { lead, kernels }
    }

    pub fn empty(lead: Lead) -> Self {
        Self {
            lead,
            kernels: Vec::new(),
        }
    }

    pub fn kernels(&self) -> &[GaussianKernel] {
        &self.kernels
    }

    pub fn into_kernels(self) -> Vec<GaussianKernel> {
        self.kernels
    }

    /// Applies `f` to every kernel, then restores the center ordering.
    pub fn map_kernels(&self, mut f: impl FnMut(usize, &GaussianKernel) -> GaussianKernel) -> Self {
        let kernels = self
            .kernels
            .iter()
            .enumerate()
            .map(|(i, k)| f(i, k))
            .collect();
        Self::new(self.lead, kernels)
    }

    pub fn value_at(&self, phase: f64) -> f64 {
        self.kernels.iter().map(|k| k.value_at(phase)).sum()
    }
}

/// Evaluates the kernel sum of `template` at each phase.
pub fn evaluate_lead(template: &LeadTemplate, phases: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = phases.iter().find(|p| !p.is_finite()) {
        return Err(invalid(format!("non-finite phase {bad}")));
    }
    Ok(phases.iter().map(|&p| template.value_at(p)).collect())
}

/// A subject's three-lead VCG morphology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphologyTemplate {
    pub source_id: String,
    leads: [LeadTemplate; 3],
    nominal_qt: f64,
}

impl MorphologyTemplate {
    /// Assembles a template and measures its QT at the reference RR.
    pub fn new(source_id: impl Into<String>, leads: [LeadTemplate; 3]) -> Result<Self> {
        check_lead_order(&leads)?;
        let mut t = Self {
            source_id: source_id.into(),
            leads,
            nominal_qt: 1.0,
        };
        t.nominal_qt = crate::synthesizer::measure_qt(&t, crate::synthesizer::REFERENCE_RR)?;
        Ok(t)
    }

    /// Assembles a template with an externally known QT, skipping wave
    /// identification.
    pub fn with_nominal_qt(
        source_id: impl Into<String>,
        leads: [LeadTemplate; 3],
        nominal_qt: f64,
    ) -> Result<Self> {
        check_lead_order(&leads)?;
        if !(nominal_qt > 0.0) {
            return Err(invalid(format!("nominal QT must be positive, got {nominal_qt}")));
        }
        Ok(Self {
            source_id: source_id.into(),
            leads,
            nominal_qt,
        })
    }

    pub fn leads(&self) -> &[LeadTemplate; 3] {
        &self.leads
    }

    pub fn lead(&self, lead: Lead) -> &LeadTemplate {
        &self.leads[lead.index()]
    }

    pub fn nominal_qt(&self) -> f64 {
        self.nominal_qt
    }

    /// Replaces the leads, keeping id and nominal QT.
    pub(crate) fn with_leads(&self, leads: [LeadTemplate; 3]) -> Self {
        Self {
            source_id: self.source_id.clone(),
            leads,
            nominal_qt: self.nominal_qt,
        }
    }

    /// Lead I seen as a kernel set: every VCG kernel weighted by its Dower
    /// coefficient for lead I.
    pub fn lead_i_kernels(&self) -> LeadTemplate {
        let coeffs = crate::synthesizer::DOWER[0].1;
        let kernels = Lead::ALL
            .iter()
            .flat_map(|&l| {
                let c = coeffs[l.index()];
                self.lead(l).kernels().iter().map(move |k| GaussianKernel {
                    amplitude: k.amplitude * c,
                    ..*k
                })
            })
            .collect();
        // lead tag is nominal here; the set is a Dower projection
        LeadTemplate::new(Lead::X, kernels)
    }
}

fn check_lead_order(leads: &[LeadTemplate; 3]) -> Result<()> {
    for (l, t) in Lead::ALL.iter().zip(leads) {
        if t.lead != *l {
            return Err(Error::InvalidTemplate(format!(
                "expected lead {l} in slot {}, found {}",
                l.index(),
                t.lead
            )));
        }
    }
    Ok(())
}

/// Average beat sampled on a uniform phase grid over `[−π, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageBeat {
    samples: Vec<f64>,
    pub sampling_rate: f64,
}

impl AverageBeat {
    pub const MIN_GRID: usize = 16;

    pub fn new(samples: Vec<f64>, sampling_rate: f64) -> Result<Self> {
        if samples.len() < Self::MIN_GRID {
            return Err(Error::InsufficientData(format!(
                "average beat needs at least {} grid samples, got {}",
                Self::MIN_GRID,
                samples.len()
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(invalid("average beat contains non-finite samples"));
        }
        Ok(Self {
            samples,
            sampling_rate,
        })
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

    pub fn phases(&self) -> Vec<f64> {
        phase_grid(self.samples.len())
    }
}

/// Uniform grid of `n` phases on `[−π, π)`.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| -PI + TAU * j as f64 / n as f64).collect()
}
