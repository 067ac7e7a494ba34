//! T-wave alternans by modified moving average (MMA), a beat-order
//! permutation surrogate test, and HR-binned subject features.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};

/// Fraction of the even/odd difference applied per beat.
pub const MMA_UPDATE_FACTOR: f64 = 1.0 / 8.0;
/// Per-sample correction cap, mV (32 µV).
pub const MMA_MAX_STEP: f64 = 0.032;
pub const MIN_BEATS: usize = 8;
pub const MIN_SURROGATES: usize = 19;
pub const DEFAULT_SURROGATES: usize = 99;
pub const WINDOW_BEATS: usize = 60;
pub const WINDOW_OVERLAP: f64 = 0.5;
pub const ALPHA: f64 = 0.05;

/// Beat extraction window around R, s.
pub const BEAT_WINDOW_S: (f64, f64) = (0.25, 0.5);
const ST_T_START_S: f64 = 0.1;
const ST_T_MAX_END_S: f64 = 0.5;
const R_SEARCH_S: f64 = 0.05;

/// HR bin edges, bpm. The last bin is closed on the right.
pub const HR_BIN_EDGES: [f64; 7] = [30.0, 60.0, 70.0, 80.0, 90.0, 100.0, 110.0];

/// R-aligned beats of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatMatrix {
    beats: Vec<Vec<f64>>,
    pub fs: f64,
    st_t_range: Range<usize>,
    rr: Vec<f64>,
}

impl BeatMatrix {
    pub fn new(beats: Vec<Vec<f64>>, fs: f64, st_t_range: Range<usize>, rr: Vec<f64>) -> Result<Self> {
        let len = beats.first().map_or(0, Vec::len);
        if beats.iter().any(|b| b.len() != len) {
            return Err(invalid("beats differ in length"));
        }
        if rr.len() != beats.len() {
            return Err(invalid("one RR value per beat is required"));
        }
        if st_t_range.start >= st_t_range.end || st_t_range.end > len {
            return Err(invalid(format!(
                "ST-T range {st_t_range:?} outside beat of {len} samples"
            )));
        }
        Ok(Self {
            beats,
            fs,
            st_t_range,
            rr,
        })
    }

    /// Cuts `[R − 250 ms, R + 500 ms]` around each R peak of a
    /// baseline-removed signal, skipping beats that run past either edge.
    /// The ST-T segment spans R + 100 ms to R + min(500 ms, 0.9 · median RR).
    pub fn from_signal(signal: &[f64], r_peaks: &[usize], fs: f64) -> Result<Self> {
        if r_peaks.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "{} R peaks; need at least 2 for RR",
                r_peaks.len()
            )));
        }
        let pre = (BEAT_WINDOW_S.0 * fs).round() as usize;
        let post = (BEAT_WINDOW_S.1 * fs).round() as usize;
        let rr_all: Vec<f64> = (0..r_peaks.len())
            .map(|k| {
                let (a, b) = if k > 0 {
                    (r_peaks[k - 1], r_peaks[k])
                } else {
                    (r_peaks[0], r_peaks[1])
                };
                b.abs_diff(a) as f64 / fs
            })
            .collect();
        let mut beats = Vec::new();
        let mut rr = Vec::new();
        for (k, &r) in r_peaks.iter().enumerate() {
            if r < pre || r + post >= signal.len() {
                continue;
            }
            beats.push(signal[r - pre..=r + post].to_vec());
            rr.push(rr_all[k]);
        }
        if beats.is_empty() {
            return Err(Error::InsufficientData("no complete beats".into()));
        }
        let mut sorted = rr.clone();
        sorted.sort_by(f64::total_cmp);
        let median_rr = sorted[sorted.len() / 2];
        let end_s = ST_T_MAX_END_S.min(0.9 * median_rr);
        let start = pre + (ST_T_START_S * fs).round() as usize;
        let end = (pre + (end_s * fs).round() as usize + 1).max(start + 1);
        Self::new(beats, fs, start..end, rr)
    }

    pub fn beats(&self) -> &[Vec<f64>] {
        &self.beats
    }

    pub fn rr(&self) -> &[f64] {
        &self.rr
    }

    pub fn st_t_range(&self) -> Range<usize> {
        self.st_t_range.clone()
    }

    pub fn len(&self) -> usize {
        self.beats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beats.is_empty()
    }

    /// Consecutive beats `range`, keeping the ST-T segment.
    pub fn slice(&self, range: Range<usize>) -> Self {
        Self {
            beats: self.beats[range.clone()].to_vec(),
            fs: self.fs,
            st_t_range: self.st_t_range.clone(),
            rr: self.rr[range].to_vec(),
        }
    }

    pub fn mean_hr(&self) -> f64 {
        60.0 * self.rr.len() as f64 / self.rr.iter().sum::<f64>()
    }

    fn st_t_segments(&self) -> Vec<&[f64]> {
        self.beats.iter().map(|b| &b[self.st_t_range.clone()]).collect()
    }
}

/// Moves the R peaks to the largest absolute sample within ±50 ms.
pub fn refine_r_peaks(signal: &[f64], peaks: &[usize], fs: f64) -> Vec<usize> {
    let reach = (R_SEARCH_S * fs).round() as usize;
    let mut out: Vec<usize> = peaks
        .iter()
        .filter(|&&p| p < signal.len())
        .map(|&p| {
            let lo = p.saturating_sub(reach);
            let hi = (p + reach + 1).min(signal.len());
            (lo..hi)
                .max_by(|&a, &b| signal[a].abs().total_cmp(&signal[b].abs()).then(b.cmp(&a)))
                .unwrap_or(p)
        })
        .collect();
    out.dedup();
    out
}

/// MMA over beat segments taken in `order`; returns µV.
fn mma_segments(segs: &[&[f64]], order: &[usize], factor: f64) -> f64 {
    let mut even = segs[order[0]].to_vec();
    let mut odd = segs[order[1]].to_vec();
    for (k, &i) in order.iter().enumerate().skip(2) {
        let avg = if k % 2 == 0 { &mut even } else { &mut odd };
        for (a, &b) in avg.iter_mut().zip(segs[i]) {
            *a += (factor * (b - *a)).clamp(-MMA_MAX_STEP, MMA_MAX_STEP);
        }
    }
    1000.0
        * even
            .iter()
            .zip(&odd)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
}

/// TWA amplitude in µV: maximum even/odd average difference over ST-T.
pub fn mma_twa(beats: &BeatMatrix, update_factor: f64) -> Result<f64> {
    if beats.len() < MIN_BEATS {
        return Err(Error::InsufficientData(format!(
            "{} beats; MMA needs at least {MIN_BEATS}",
            beats.len()
        )));
    }
    if !(update_factor > 0.0 && update_factor <= 1.0) {
        return Err(invalid(format!("update factor {update_factor} outside (0, 1]")));
    }
    let order: Vec<usize> = (0..beats.len()).collect();
    Ok(mma_segments(&beats.st_t_segments(), &order, update_factor))
}

/// Permutation p-value of the observed MMA amplitude against
/// `n_surrogates` random beat orders.
pub fn surrogate_test<R: Rng + ?Sized>(beats: &BeatMatrix, n_surrogates: usize, rng: &mut R) -> Result<f64> {
    if n_surrogates < MIN_SURROGATES {
        return Err(invalid(format!(
            "{n_surrogates} surrogates cannot resolve p ≤ 0.05; need at least {MIN_SURROGATES}"
        )));
    }
    let observed = mma_twa(beats, MMA_UPDATE_FACTOR)?;
    Ok(surrogate_p(beats, observed, n_surrogates, rng))
}

fn surrogate_p<R: Rng + ?Sized>(beats: &BeatMatrix, observed: f64, n: usize, rng: &mut R) -> f64 {
    let segs = beats.st_t_segments();
    let mut order: Vec<usize> = (0..beats.len()).collect();
    let mut exceed = 0usize;
    for _ in 0..n {
        order.shuffle(rng);
        if mma_segments(&segs, &order, MMA_UPDATE_FACTOR) >= observed {
            exceed += 1;
        }
    }
    (1 + exceed) as f64 / (1 + n) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwaMeasurement {
    /// µV.
    pub amplitude: f64,
    pub p_value: f64,
    /// bpm.
    pub mean_hr: f64,
    pub window_index: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlidingTwa {
    pub measurements: Vec<TwaMeasurement>,
    /// Fewer beats than one window.
    pub shortage: bool,
}

/// MMA and surrogate test over windows of `window_beats` beats.
pub fn sliding_twa<R: Rng + ?Sized>(
    beats: &BeatMatrix,
    window_beats: usize,
    overlap: f64,
    n_surrogates: usize,
    rng: &mut R,
) -> Result<SlidingTwa> {
    if window_beats < MIN_BEATS {
        return Err(invalid(format!("window of {window_beats} beats is below {MIN_BEATS}")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(invalid(format!("overlap must be in [0, 1), got {overlap}")));
    }
    if n_surrogates < MIN_SURROGATES {
        return Err(invalid(format!(
            "{n_surrogates} surrogates; need at least {MIN_SURROGATES}"
        )));
    }
    if beats.len() < window_beats {
        return Ok(SlidingTwa {
            measurements: Vec::new(),
            shortage: true,
        });
    }
    let step = ((window_beats as f64 * (1.0 - overlap)).round() as usize).max(1);
    let mut measurements = Vec::new();
    let mut start = 0;
    while start + window_beats <= beats.len() {
        let w = beats.slice(start..start + window_beats);
        let amplitude = mma_twa(&w, MMA_UPDATE_FACTOR)?;
        measurements.push(TwaMeasurement {
            amplitude,
            p_value: surrogate_p(&w, amplitude, n_surrogates, rng),
            mean_hr: w.mean_hr(),
            window_index: measurements.len(),
        });
        start += step;
    }
    Ok(SlidingTwa {
        measurements,
        shortage: false,
    })
}

/// Mean significant TWA (µV) per HR bin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TwaFeatureVector {
    pub bins: [f64; 6],
}

impl TwaFeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.bins
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BinnedFeatures {
    pub features: TwaFeatureVector,
    /// Significant measurements whose HR fell outside every bin.
    pub dropped: usize,
}

/// Index of the HR bin containing `hr`.
pub fn hr_bin(hr: f64) -> Option<usize> {
    let e = &HR_BIN_EDGES;
    if hr == e[6] {
        return Some(5);
    }
    (0..6).find(|&i| hr >= e[i] && hr < e[i + 1])
}

pub fn bin_features(measurements: &[TwaMeasurement], alpha: f64) -> BinnedFeatures {
    let mut sum = [0.0; 6];
    let mut count = [0usize; 6];
    let mut dropped = 0;
    for m in measurements.iter().filter(|m| m.p_value <= alpha) {
        match hr_bin(m.mean_hr) {
            Some(b) => {
                sum[b] += m.amplitude;
                count[b] += 1;
            }
            None => dropped += 1,
        }
    }
    let mut bins = [0.0; 6];
    for b in 0..6 {
        if count[b] > 0 {
            bins[b] = sum[b] / count[b] as f64;
        }
    }
    if dropped > 0 {
        log::debug!("{dropped} significant TWA measurements outside the HR bins");
    }
    BinnedFeatures {
        features: TwaFeatureVector { bins },
        dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const FS: f64 = 500.0;

    fn template() -> Vec<f64> {
        (0..376)
            .map(|i| {
                let t = i as f64 / FS - 0.25;
                (-(t / 0.01).powi(2)).exp() + 0.3 * (-((t - 0.3) / 0.05).powi(2)).exp()
            })
            .collect()
    }

    /// T samples alternate ±half around the template.
    fn alternating(n: usize, half_uv: f64) -> BeatMatrix {
        let base = template();
        let beats = (0..n)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                base.iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let t = i as f64 / FS - 0.25;
                        v + s * half_uv * 1e-3 * (-((t - 0.3) / 0.05).powi(2)).exp()
                    })
                    .collect()
            })
            .collect();
        BeatMatrix::new(beats, FS, 175..300, vec![0.8; n]).unwrap()
    }

    fn noisy(n: usize, sd_uv: f64, rng: &mut ChaCha8Rng) -> BeatMatrix {
        let base = template();
        let d = Normal::new(0.0, sd_uv * 1e-3).unwrap();
        let beats = (0..n)
            .map(|_| base.iter().map(|v| v + d.sample(rng)).collect())
            .collect();
        BeatMatrix::new(beats, FS, 175..300, vec![0.8; n]).unwrap()
    }

    /// Independent step-by-step MMA for the alternating construction.
    fn simulate_mma(n: usize, half_uv: f64) -> f64 {
        let (mut e, mut o) = (half_uv, -half_uv);
        for k in 2..n {
            let target = if k % 2 == 0 { half_uv } else { -half_uv };
            let a = if k % 2 == 0 { &mut e } else { &mut o };
            *a += ((target - *a) / 8.0).clamp(-32.0, 32.0);
        }
        (e - o).abs()
    }

    #[test]
    fn identical_beats_give_zero() {
        assert_eq!(mma_twa(&alternating(20, 0.0), MMA_UPDATE_FACTOR).unwrap(), 0.0);
    }

    #[test]
    fn constructed_alternation() {
        let got = mma_twa(&alternating(60, 30.0), MMA_UPDATE_FACTOR).unwrap();
        assert!((got - simulate_mma(60, 30.0)).abs() < 1e-6);
        assert!((got - 60.0).abs() <= 2.0, "{got}");
    }

    #[test]
    fn seven_beats_rejected() {
        assert!(matches!(
            mma_twa(&alternating(7, 10.0), MMA_UPDATE_FACTOR),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn bounded_update_caps_step() {
        // averages initialized from beats with a 200 µV offset move at most 32 µV per beat
        let base = template();
        let mut beats = vec![base.clone(); 10];
        beats[0].iter_mut().for_each(|v| *v += 0.2);
        beats[1].iter_mut().for_each(|v| *v -= 0.2);
        let m = BeatMatrix::new(beats, FS, 175..300, vec![0.8; 10]).unwrap();
        // even: 200 µV toward 0 in 4 capped steps of 25 (=200/8) each
        let mut e: f64 = 200.0;
        let mut o: f64 = -200.0;
        for k in 2..10 {
            let a = if k % 2 == 0 { &mut e } else { &mut o };
            *a -= (*a / 8.0).clamp(-32.0, 32.0);
        }
        let got = mma_twa(&m, MMA_UPDATE_FACTOR).unwrap();
        assert!((got - (e - o)).abs() < 1e-9, "{got} vs {}", e - o);
    }

    proptest! {
        #[test]
        fn monotone_in_amplitude(a in 0.0f64..150.0, b in 0.0f64..150.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let x = mma_twa(&alternating(30, lo), MMA_UPDATE_FACTOR).unwrap();
            let y = mma_twa(&alternating(30, hi), MMA_UPDATE_FACTOR).unwrap();
            prop_assert!(x <= y + 1e-9);
            prop_assert!(x >= 0.0);
        }
    }

    #[test]
    fn strong_alternans_has_minimal_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = surrogate_test(&alternating(60, 50.0), 99, &mut rng).unwrap();
        assert_eq!(p, 0.01);
    }

    #[test]
    fn too_few_surrogates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            surrogate_test(&alternating(60, 50.0), 10, &mut rng),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn null_rejection_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let runs = 500;
        let hits = (0..runs)
            .filter(|_| {
                let m = noisy(60, 20.0, &mut rng);
                surrogate_test(&m, 99, &mut rng).unwrap() <= ALPHA
            })
            .count();
        let rate = hits as f64 / runs as f64;
        assert!((0.02..=0.08).contains(&rate), "rate {rate}");
    }

    #[test]
    fn window_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let one = sliding_twa(&alternating(60, 10.0), 60, 0.5, 19, &mut rng).unwrap();
        assert_eq!(one.measurements.len(), 1);
        let three = sliding_twa(&alternating(120, 10.0), 60, 0.5, 19, &mut rng).unwrap();
        assert_eq!(three.measurements.len(), 3);
        assert_eq!(
            three.measurements.iter().map(|m| m.window_index).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert!((three.measurements[0].mean_hr - 75.0).abs() < 1e-9);
        let none = sliding_twa(&alternating(59, 10.0), 60, 0.5, 19, &mut rng).unwrap();
        assert!(none.measurements.is_empty() && none.shortage);
    }

    fn meas(amplitude: f64, p_value: f64, mean_hr: f64) -> TwaMeasurement {
        TwaMeasurement {
            amplitude,
            p_value,
            mean_hr,
            window_index: 0,
        }
    }

    #[test]
    fn binning_rules() {
        assert_eq!(bin_features(&[meas(40.0, 0.5, 65.0)], ALPHA).features.bins, [0.0; 6]);
        let b = bin_features(&[meas(40.0, 0.01, 65.0), meas(60.0, 0.05, 65.0)], ALPHA);
        assert_eq!(b.features.bins, [0.0, 50.0, 0.0, 0.0, 0.0, 0.0]);
        let b = bin_features(&[meas(30.0, 0.01, 60.0)], ALPHA);
        assert_eq!(b.features.bins[1], 30.0);
        assert_eq!(b.features.bins[0], 0.0);
        let b = bin_features(&[meas(30.0, 0.01, 110.0), meas(10.0, 0.01, 120.0), meas(5.0, 0.01, 20.0)], ALPHA);
        assert_eq!(b.features.bins[5], 30.0);
        assert_eq!(b.dropped, 2);
    }

    #[test]
    fn beat_matrix_from_signal() {
        let fs = 1000.0;
        let mut x = vec![0.0; 5000];
        let peaks = [100, 1000, 1800, 2600, 3400, 4200, 4900];
        for &p in &peaks {
            x[p] = 1.0;
        }
        let m = BeatMatrix::from_signal(&x, &peaks, fs).unwrap();
        // first and last beats are incomplete
        assert_eq!(m.len(), 5);
        assert_eq!(m.beats()[0].len(), 751);
        assert_eq!(m.beats()[0][250], 1.0);
        assert_eq!(m.rr(), &[0.9, 0.8, 0.8, 0.8, 0.8]);
        assert_eq!(m.st_t_range(), 350..751);
        let fast: Vec<usize> = (0..8).map(|k| 300 + k * 500).collect();
        let m = BeatMatrix::from_signal(&x, &fast, fs).unwrap();
        assert_eq!(m.st_t_range(), 350..701);
    }

    #[test]
    fn refinement_snaps_to_extremum() {
        let mut x = vec![0.0; 1000];
        x[520] = -2.0;
        x[480] = 1.0;
        assert_eq!(refine_r_peaks(&x, &[500], 1000.0), vec![520]);
    }
}
