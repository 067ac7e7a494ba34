//! Baseline removal, windowing, dual QRS detection and beat-agreement
//! signal quality.

mod baseline;
mod detect;
mod sqi;
mod windows;

pub use baseline::{median_filter, remove_baseline, BASELINE_STAGES_S};
pub use detect::{detect_qrs_robust, detect_qrs_sensitive, REFRACTORY_S};
pub use sqi::{bsqi, score_windows, select_windows, sqi, Selection, MATCH_TOLERANCE_S};
pub use windows::{segment_windows, EcgWindow, WindowSource};
