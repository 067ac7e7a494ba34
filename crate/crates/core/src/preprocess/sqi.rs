use rand::Rng;

use super::detect::{detect_qrs_robust, detect_qrs_sensitive};
use super::windows::EcgWindow;

/// Two detections closer than this are the same beat, s.
pub const MATCH_TOLERANCE_S: f64 = 0.15;

/// Beat agreement between two detection lists: matched pairs over the
/// size of the union. Matching walks both sorted lists and pairs the
/// nearest admissible detections, which yields a maximum matching in 1-D.
pub fn bsqi(a: &[usize], b: &[usize], fs: f64) -> f64 {
    let tol = (MATCH_TOLERANCE_S * fs).round() as usize;
    let (mut i, mut j, mut matched) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        if a[i].abs_diff(b[j]) <= tol {
            matched += 1;
            i += 1;
            j += 1;
        } else if a[i] < b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    let union = a.len() + b.len() - matched;
    if union == 0 {
        0.0
    } else {
        matched as f64 / union as f64
    }
}

/// bSQI of one window from the robust and sensitive detectors.
pub fn sqi(window: &EcgWindow) -> f64 {
    bsqi(
        &detect_qrs_robust(&window.samples, window.fs),
        &detect_qrs_sensitive(&window.samples, window.fs),
        window.fs,
    )
}

pub fn score_windows(windows: &mut [EcgWindow]) {
    for w in windows {
        w.sqi = Some(sqi(w));
    }
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub windows: Vec<EcgWindow>,
    /// Fewer than the requested number of windows qualified.
    pub shortage: bool,
}

/// Uniformly samples `n` windows with SQI exactly 1, without replacement,
/// keeping their original order.
pub fn select_windows<R: Rng + ?Sized>(windows: &[EcgWindow], n: usize, rng: &mut R) -> Selection {
    let clean: Vec<&EcgWindow> = windows.iter().filter(|w| w.sqi == Some(1.0)).collect();
    if clean.len() <= n {
        return Selection {
            shortage: clean.len() < n,
            windows: clean.into_iter().cloned().collect(),
        };
    }
    let mut picked = rand::seq::index::sample(rng, clean.len(), n).into_vec();
    picked.sort_unstable();
    Selection {
        windows: picked.into_iter().map(|i| clean[i].clone()).collect(),
        shortage: false,
    }
}
