use std::f64::consts::TAU;

use super::{phase_grid, AverageBeat};
use crate::error::{invalid, Error, Result};

/// Phase grid length used for average beats.
pub const AVERAGE_BEAT_GRID: usize = 512;

/// Averages the beats of `signal` on the default 512-point phase grid.
///
/// Beat `k` covers `r_k ± RR_k / 2`, where `RR_k` is the interval to the
/// next peak (the previous one for the last peak), and is mapped linearly
/// onto `[−π, π)` with the R peak at phase 0. Beats whose span runs past
/// either end of the signal are skipped.
pub fn compute_average_beat(signal: &[f64], r_peaks: &[usize], fs: f64) -> Result<AverageBeat> {
    compute_average_beat_on_grid(signal, r_peaks, fs, AVERAGE_BEAT_GRID)
}

pub fn compute_average_beat_on_grid(
    signal: &[f64],
    r_peaks: &[usize],
    fs: f64,
    grid_len: usize,
) -> Result<AverageBeat> {
    if r_peaks.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 R peaks, got {}",
            r_peaks.len()
        )));
    }
    if !(fs > 0.0) {
        return Err(invalid("sampling rate must be positive"));
    }
    if r_peaks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("R peaks must be strictly increasing"));
    }
    if *r_peaks.last().unwrap() >= signal.len() {
        return Err(invalid("R peak index beyond signal end"));
    }

    let grid = phase_grid(grid_len);
    let last = (signal.len() - 1) as f64;
    let mut acc = vec![0.0; grid_len];
    let mut used = 0usize;
    for (k, &r) in r_peaks.iter().enumerate() {
        let rr = if k + 1 < r_peaks.len() {
            r_peaks[k + 1] - r
        } else {
            r - r_peaks[k - 1]
        } as f64;
        let start = r as f64 - rr / 2.0;
        let end = r as f64 + rr / 2.0;
        if start < 0.0 || end > last {
            continue;
        }
        for (a, &theta) in acc.iter_mut().zip(&grid) {
            *a += cubic_at(signal, r as f64 + theta / TAU * rr);
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::InsufficientData(
            "no complete beat inside the signal".into(),
        ));
    }
    let n = used as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    AverageBeat::new(acc, fs)
}

/// Catmull-Rom interpolation at fractional index `t`, clamping the stencil
/// at the signal edges.
pub(crate) fn cubic_at(x: &[f64], t: f64) -> f64 {
    let n = x.len() as isize;
    let i = t.floor() as isize;
    let f = t - i as f64;
    let at = |j: isize| x[j.clamp(0, n - 1) as usize];
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    p1 + 0.5
        * f
        * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic(n: usize, period: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let p = (i % period) as f64 / period as f64;
                (TAU * p).sin() + 0.3 * (2.0 * TAU * p).cos()
            })
            .collect()
    }

    #[test]
    fn identical_beats_average_to_one_beat() {
        let x = periodic(5000, 800);
        let peaks: Vec<usize> = (1..6).map(|k| k * 800).collect();
        let avg = compute_average_beat(&x, &peaks, 1000.0).unwrap();
        let single = compute_average_beat_on_grid(&x, &peaks[..2], 1000.0, 512).unwrap();
        for (a, b) in avg.samples().iter().zip(single.samples()) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
        }
    }

    #[test]
    fn inverted_pair_cancels() {
        let period = 600;
        let mut x = vec![0.0; 4 * period];
        let beat: Vec<f64> = (0..period)
            .map(|i| (-((i as f64 - 300.0) / 20.0).powi(2)).exp())
            .collect();
        // beat centered at 900 and an inverted copy centered at 1500
        for i in 0..period {
            x[600 + i] = beat[i];
            x[1200 + i] = -beat[i];
        }
        let avg = compute_average_beat(&x, &[900, 1500], 1000.0).unwrap();
        assert!(avg.samples().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn too_few_peaks() {
        let x = vec![0.0; 100];
        assert!(matches!(
            compute_average_beat(&x, &[50], 100.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn unordered_peaks_rejected() {
        let x = vec![0.0; 100];
        assert!(compute_average_beat(&x, &[50, 40], 100.0).is_err());
    }

    #[test]
    fn cubic_is_exact_on_samples_and_lines() {
        let x: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 - 1.0).collect();
        assert_eq!(cubic_at(&x, 4.0), 7.0);
        assert!((cubic_at(&x, 4.25) - 7.5).abs() < 1e-12);
    }
}
