//! Dataset generation, record files, and the analysis and evaluation
//! drivers behind the command-line tool.

pub mod analyze;
pub mod config;
pub mod evaluate;
pub mod generate;
pub mod record;

pub use analyze::{
    analyze_signal, read_feature_table, write_feature_table, FeatureRow, RecordAnalysis, FEATURE_HEADER,
};
pub use config::{DatasetConfig, Grid};
pub use evaluate::{
    consolidate, evaluate_rows, format_report, read_report, write_report, EvalMode, EvaluateOptions,
    EvaluationReport, LOOCV_CAVEAT,
};
pub use generate::{
    analyze_dataset, analyze_records, generate_dataset, plan_records, render_record, stream_features,
    DatasetManifest, ManifestRecord, RecordPlan, Sources, FORMAT_VERSION, MANIFEST_FILE, N_FOLDS,
};
pub use record::{read_header, read_record, write_record, RecordHeader};
