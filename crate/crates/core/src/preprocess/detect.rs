//! Two QRS detectors with deliberately different noise behaviour.
//!
//! The robust detector is an energy detector in the Pan-Tompkins mould
//! (5-15 Hz band-pass, derivative, squaring, 150 ms integration, adaptive
//! threshold with search-back). The sensitive one is a plain peak picker at
//! 40% of the window's largest absolute excursion. Both are zero-phase and
//! polarity-insensitive.

use std::f64::consts::PI;

/// Minimum spacing between detections, s.
pub const REFRACTORY_S: f64 = 0.25;

const INTEGRATION_S: f64 = 0.15;
const SENSITIVE_FRACTION: f64 = 0.4;
const MIN_WINDOW_S: f64 = 3.0;

#[derive(Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn butterworth(fs: f64, cutoff: f64, highpass: bool) -> Self {
        let w0 = 2.0 * PI * cutoff / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let a0 = 1.0 + alpha;
        let b = if highpass {
            [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0]
        } else {
            [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0]
        };
        Self {
            b: b.map(|v| v / a0),
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for v in x.iter_mut() {
            let y = self.b[0] * *v + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
            x2 = x1;
            x1 = *v;
            y2 = y1;
            y1 = y;
            *v = y;
        }
    }

    /// Forward-backward pass.
    fn filtfilt(&self, x: &mut [f64]) {
        self.run(x);
        x.reverse();
        self.run(x);
        x.reverse();
    }
}

fn bandpass(x: &[f64], fs: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter_mut().for_each(|v| *v -= mean);
    Biquad::butterworth(fs, 5.0, true).filtfilt(&mut y);
    Biquad::butterworth(fs, 15.0_f64.min(0.45 * fs), false).filtfilt(&mut y);
    y
}

/// Centered moving average of width `w`.
fn integrate(x: &[f64], w: usize) -> Vec<f64> {
    let n = x.len();
    let half = w / 2;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + x[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn local_maxima(x: &[f64]) -> Vec<usize> {
    (1..x.len().saturating_sub(1))
        .filter(|&i| x[i] > 0.0 && x[i] >= x[i - 1] && x[i] > x[i + 1])
        .collect()
}

fn argmax_abs(x: &[f64], lo: usize, hi: usize) -> usize {
    (lo..hi)
        .max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()))
        .unwrap_or(lo)
}

/// Band-pass energy detector with adaptive thresholds. Returns R-peak
/// sample indices.
pub fn detect_qrs_robust(x: &[f64], fs: f64) -> Vec<usize> {
    if (x.len() as f64) < MIN_WINDOW_S * fs || x.iter().all(|v| *v == x[0]) {
        return Vec::new();
    }
    let bp = bandpass(x, fs);
    let n = bp.len();
    let mut energy = vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        let d = (2.0 * bp[i + 1] + bp[i + 2] - bp[i - 2] - 2.0 * bp[i - 1]) * fs / 8.0;
        energy[i] = d * d;
    }
    let mwi = integrate(&energy, (INTEGRATION_S * fs).round() as usize);
    let peak_max = mwi.iter().cloned().fold(0.0, f64::max);
    if !(peak_max > 0.0) {
        return Vec::new();
    }

    let refractory = (REFRACTORY_S * fs).round() as usize;
    let learn = ((2.0 * fs) as usize).min(n);
    let mut spk = mwi[..learn].iter().cloned().fold(0.0, f64::max) / 3.0;
    let mut npk = mwi[..learn].iter().sum::<f64>() / learn as f64 / 2.0;

    let candidates = local_maxima(&mwi);
    let mut qrs: Vec<usize> = Vec::new();
    let mut last_checked = 0usize;
    for (ci, &c) in candidates.iter().enumerate() {
        let thr = npk + 0.25 * (spk - npk);
        let v = mwi[c];
        if v > thr {
            match qrs.last().copied() {
                Some(prev) if c - prev < refractory => {
                    if v > mwi[prev] {
                        *qrs.last_mut().unwrap() = c;
                    }
                }
                _ => {
                    // search back for a missed beat after a long gap
                    if qrs.len() >= 2 {
                        let rr_mean = (qrs[qrs.len() - 1] - qrs[0]) as f64 / (qrs.len() - 1) as f64;
                        let prev = *qrs.last().unwrap();
                        if (c - prev) as f64 > 1.66 * rr_mean {
                            let missed = candidates[last_checked..ci]
                                .iter()
                                .copied()
                                .filter(|&m| m > prev + refractory && m + refractory < c)
                                .filter(|&m| mwi[m] > 0.5 * thr)
                                .max_by(|&a, &b| mwi[a].total_cmp(&mwi[b]));
                            if let Some(m) = missed {
                                qrs.push(m);
                                spk = 0.25 * mwi[m] + 0.75 * spk;
                            }
                        }
                    }
                    qrs.push(c);
                }
            }
            spk = 0.125 * v + 0.875 * spk;
            last_checked = ci + 1;
        } else {
            npk = 0.125 * v + 0.875 * npk;
        }
    }

    // R peak: largest band-passed excursion near the energy peak
    let reach = (0.1 * fs).round() as usize;
    let mut peaks: Vec<usize> = qrs
        .into_iter()
        .map(|c| argmax_abs(&bp, c.saturating_sub(reach), (c + reach + 1).min(n)))
        .collect();
    dedup_refractory(&mut peaks, refractory, &bp);
    peaks
}

/// Fixed-threshold peak picker at 40% of the largest absolute excursion
/// about the window median.
pub fn detect_qrs_sensitive(x: &[f64], fs: f64) -> Vec<usize> {
    if (x.len() as f64) < MIN_WINDOW_S * fs {
        return Vec::new();
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = sorted[sorted.len() / 2];
    let a: Vec<f64> = x.iter().map(|v| (v - med).abs()).collect();
    let top = a.iter().cloned().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Vec::new();
    }
    let thr = SENSITIVE_FRACTION * top;
    let refractory = (REFRACTORY_S * fs).round() as usize;
    let mut cands: Vec<usize> = local_maxima(&a).into_iter().filter(|&i| a[i] >= thr).collect();
    // strongest first, suppress neighbours inside the refractory period
    cands.sort_by(|&p, &q| a[q].total_cmp(&a[p]).then(p.cmp(&q)));
    let mut kept: Vec<usize> = Vec::new();
    for c in cands {
        if kept.iter().all(|&k| k.abs_diff(c) >= refractory) {
            kept.push(c);
        }
    }
    kept.sort_unstable();
    kept
}

fn dedup_refractory(peaks: &mut Vec<usize>, refractory: usize, x: &[f64]) {
    peaks.sort_unstable();
    let mut out: Vec<usize> = Vec::with_capacity(peaks.len());
    for &p in peaks.iter() {
        match out.last_mut() {
            Some(last) if p - *last < refractory => {
                if x[p].abs() > x[*last].abs() {
                    *last = p;
                }
            }
            _ => out.push(p),
        }
    }
    *peaks = out;
}
