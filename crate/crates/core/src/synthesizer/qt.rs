//! Wave identification and QT / QTc measurement on the kernel representation.

use std::f64::consts::{PI, TAU};

use crate::beat_model::{GaussianKernel, LeadTemplate, MorphologyTemplate};
use crate::error::{invalid, Error, Result};

/// RR (s) at which template phases map linearly to time.
pub const REFERENCE_RR: f64 = 1.0;

pub const QTC_MIN: f64 = 0.360;
pub const QTC_MAX: f64 = 0.440;

/// Kernels centered in this phase interval are T-wave candidates.
pub const T_PHASE_RANGE: (f64, f64) = (0.15 * PI, 0.85 * PI);

/// Kernels below this fraction of the R amplitude are ignored for Q/T.
const MIN_WAVE_FRACTION: f64 = 0.05;
/// T kernels at or above this fraction of the dominant T kernel are grouped with it.
const T_GROUP_FRACTION: f64 = 0.25;

/// Heart-rate grid used by the dataset generator, bpm.
pub fn dataset_hr_grid() -> Vec<f64> {
    (0..=25).map(|i| 60.0 + 2.0 * i as f64).collect()
}

/// Time span (s) of one template cycle when rendered at `rr`.
///
/// Template timing scales with `sqrt(RR)`, so the rendered QT follows
/// Bazett's relation and beats shorter than the template cycle simply
/// overlap their neighbours.
pub fn cycle_length(rr: f64) -> f64 {
    (rr * REFERENCE_RR).sqrt()
}

/// Indices of the T-wave group of one kernel set.
pub(crate) fn t_group(kernels: &[GaussianKernel], floor: f64) -> Vec<usize> {
    let (lo, hi) = T_PHASE_RANGE;
    let in_range: Vec<usize> = kernels
        .iter()
        .enumerate()
        .filter(|(_, k)| k.center > lo && k.center < hi && k.amplitude.abs() >= floor)
        .map(|(i, _)| i)
        .collect();
    let Some(peak) = in_range
        .iter()
        .map(|&i| kernels[i].amplitude.abs())
        .max_by(f64::total_cmp)
    else {
        return Vec::new();
    };
    in_range
        .into_iter()
        .filter(|&i| kernels[i].amplitude.abs() >= T_GROUP_FRACTION * peak)
        .collect()
}

/// Q-onset and T-offset phases of a kernel set.
pub(crate) fn qt_phases(lead: &LeadTemplate) -> Result<(f64, f64)> {
    let ks = lead.kernels();
    let (r_idx, r) = ks
        .iter()
        .enumerate()
        .filter(|(_, k)| k.amplitude > 0.0)
        .max_by(|a, b| a.1.amplitude.total_cmp(&b.1.amplitude))
        .ok_or_else(|| Error::InvalidTemplate("no positive R kernel".into()))?;
    let floor = MIN_WAVE_FRACTION * r.amplitude;

    // kernels are sorted by center: walk back from R
    let q = ks[..r_idx]
        .iter()
        .rev()
        .filter(|k| k.center < r.center)
        .find(|k| k.amplitude < 0.0 && k.amplitude.abs() >= floor)
        .ok_or_else(|| Error::InvalidTemplate("no Q kernel before R".into()))?;

    let t = t_group(ks, floor);
    if t.is_empty() {
        return Err(Error::InvalidTemplate("no T-wave kernel".into()));
    }
    let t_off = t
        .iter()
        .map(|&i| ks[i].center + 3.0 * ks[i].width)
        .fold(f64::NEG_INFINITY, f64::max);
    let q_on = q.center - 3.0 * q.width;
    Ok((q_on, t_off))
}

/// QT as a fraction of one template cycle, measured on the lead-I projection.
pub fn qt_fraction(template: &MorphologyTemplate) -> Result<f64> {
    let (q_on, t_off) = qt_phases(&template.lead_i_kernels())?;
    Ok((t_off - q_on) / TAU)
}

/// QT (s) when one template cycle lasts `cycle` seconds.
pub fn measure_qt(template: &MorphologyTemplate, cycle: f64) -> Result<f64> {
    if !(cycle > 0.0) {
        return Err(invalid(format!("cycle length must be positive, got {cycle}")));
    }
    Ok(qt_fraction(template)? * cycle)
}

pub fn qtc_bazett(qt: f64, rr: f64) -> Result<f64> {
    if !(rr > 0.0) {
        return Err(invalid(format!("RR must be positive, got {rr}")));
    }
    Ok(qt / rr.sqrt())
}

/// QTc (s) of the rendered template at heart rate `hr` (bpm).
pub fn qtc_at_hr(template: &MorphologyTemplate, hr: f64) -> Result<f64> {
    let rr = 60.0 / hr;
    qtc_bazett(measure_qt(template, cycle_length(rr))?, rr)
}

/// True iff QTc lies in `[0.360, 0.440]` s at every heart rate of the grid.
/// Templates without identifiable Q and T waves never validate.
pub fn validate_qtc(template: &MorphologyTemplate, hr_grid: &[f64]) -> bool {
    !hr_grid.is_empty()
        && hr_grid.iter().all(|&hr| {
            qtc_at_hr(template, hr)
                .map(|q| (QTC_MIN..=QTC_MAX).contains(&q))
                .unwrap_or(false)
        })
}
