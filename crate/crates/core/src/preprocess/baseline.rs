use crate::error::{invalid, Result};

/// Window lengths (s) of the two median stages.
pub const BASELINE_STAGES_S: (f64, f64) = (0.2, 0.6);

/// Odd window length in samples for a duration in seconds.
fn window_len(seconds: f64, fs: f64) -> usize {
    ((seconds * fs).round() as usize) | 1
}

/// Running median with reflection padding at both edges.
///
/// `width` is forced odd. The window is kept as a sorted buffer, so each
/// step costs one binary search plus a shift of at most `width` values.
pub fn median_filter(x: &[f64], width: usize) -> Vec<f64> {
    let width = width | 1;
    let half = width / 2;
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let at = |i: isize| -> f64 {
        // reflect without repeating the edge sample
        let m = n as isize;
        let mut j = i;
        if m == 1 {
            return x[0];
        }
        loop {
            if j < 0 {
                j = -j;
            } else if j >= m {
                j = 2 * (m - 1) - j;
            } else {
                return x[j as usize];
            }
        }
    };

    let mut sorted: Vec<f64> = (-(half as isize)..=half as isize).map(at).collect();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(n);
    out.push(sorted[half]);
    for i in 1..n as isize {
        let leaving = at(i - 1 - half as isize);
        let entering = at(i + half as isize);
        let pos = sorted
            .binary_search_by(|v| v.total_cmp(&leaving))
            .expect("leaving sample is in the window");
        sorted.remove(pos);
        let ins = sorted.partition_point(|v| v.total_cmp(&entering).is_lt());
        sorted.insert(ins, entering);
        out.push(sorted[half]);
    }
    out
}

/// Subtracts the two-stage median baseline (200 ms then 600 ms).
pub fn remove_baseline(signal: &[f64], fs: f64) -> Result<Vec<f64>> {
    if !(fs > 0.0) {
        return Err(invalid("sampling rate must be positive"));
    }
    if (signal.len() as f64) <= BASELINE_STAGES_S.1 * fs {
        return Err(invalid(format!(
            "signal of {} samples is shorter than the {} s baseline window",
            signal.len(),
            BASELINE_STAGES_S.1
        )));
    }
    let first = median_filter(signal, window_len(BASELINE_STAGES_S.0, fs));
    let baseline = median_filter(&first, window_len(BASELINE_STAGES_S.1, fs));
    Ok(signal.iter().zip(baseline).map(|(s, b)| s - b).collect())
}
