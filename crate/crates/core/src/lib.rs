//! Synthetic ECG with controllable T-wave alternans, and the baseline TWA
//! analysis pipeline used to score it.
//!
//! The crate is organised bottom-up:
//!
//! - [`beat_model`]: Gaussian-sum beat morphology and its least-squares fit
//! - [`rhythm`]: RR tachograms with respiratory modulation
//! - [`synthesizer`]: perturbation, QTc gating, alternans injection, rendering, Dower transform
//! - [`noise`]: electrode-motion / muscle-artifact mixing at a calibrated SNR
//! - [`preprocess`]: baseline removal, windowing, dual QRS detection, bSQI
//! - [`twa_mma`]: modified-moving-average TWA, surrogate test, HR-binned features
//! - [`eval`]: logistic baseline, leave-one-subject-out driver, ROC and metrics
//! - [`dataset`]: grid-driven generation, record files, analysis and evaluation drivers

pub mod beat_model;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod noise;
pub mod preprocess;
pub mod rhythm;
pub mod seed;
pub mod synthesizer;
pub mod textio;
pub mod twa_mma;

pub use error::{Error, Result};
