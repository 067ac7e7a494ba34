//! Feature table → LOOT scores → ROC, metrics and significance, plus the
//! consolidated multi-model report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::analyze::FeatureRow;
use crate::error::{Error, Result};
use crate::eval::{
    chi2_independence, confusion, loocv, loot, optimal_operating_point, permutation_significance, roc_auc,
    summarize, LogisticTrainer, LootOptions, Metrics, RocCurve, RocPoint, Subject, SubjectScore,
};

pub const REPORT_JSON: &str = "report.json";
pub const LOOCV_CAVEAT: &str = "LOOCV scores validation windows of subjects that were also used for \
training; these metrics are optimistic and not comparable to held-out-subject results.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Loot,
    Loocv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOptions {
    pub model: String,
    pub mode: EvalMode,
    pub seed: u64,
    pub validation_frac: f64,
    pub permutations: usize,
    pub l2: f64,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self {
            model: "BL".into(),
            mode: EvalMode::Loot,
            seed: 0,
            validation_frac: 0.0,
            permutations: 0,
            l2: crate::eval::DEFAULT_L2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Summary {
    pub statistic: f64,
    pub p_value: f64,
    pub sample_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationSummary {
    pub repetitions: usize,
    pub null_mean_auc: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub mode: EvalMode,
    pub n_subjects: usize,
    pub n_windows: usize,
    pub excluded: Vec<String>,
    pub metrics: Metrics,
    pub operating_point: RocPoint,
    pub roc: RocCurve,
    pub scores: Vec<SubjectScore>,
    pub chi2: Option<Chi2Summary>,
    pub permutation: Option<PermutationSummary>,
}

/// Groups rows into subjects by record id, in first-appearance order.
pub fn subjects_from_rows(rows: &[FeatureRow]) -> Result<Vec<Subject>> {
    let mut out: Vec<Subject> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for r in rows {
        let i = *index.entry(r.record_id.clone()).or_insert_with(|| {
            out.push(Subject {
                id: r.record_id.clone(),
                label: r.label,
                windows: Vec::new(),
            });
            out.len() - 1
        });
        if out[i].label != r.label {
            return Err(Error::InvalidArgument(format!(
                "record {} has rows with both labels",
                r.record_id
            )));
        }
        out[i].windows.push(r.features.bins.to_vec());
    }
    Ok(out)
}

pub fn evaluate_rows(rows: &[FeatureRow], opts: &EvaluateOptions) -> Result<EvaluationReport> {
    let subjects = subjects_from_rows(rows)?;
    let trainer = LogisticTrainer {
        l2: opts.l2,
        ..LogisticTrainer::default()
    };
    let lo = LootOptions {
        seed: opts.seed,
        validation_frac: opts.validation_frac,
    };
    let result = match opts.mode {
        EvalMode::Loot => loot(&subjects, &trainer, &lo)?,
        EvalMode::Loocv => loocv(&subjects, &trainer, &lo)?,
    };
    let roc = roc_auc(&result.scores)?;
    let point = optimal_operating_point(&roc);
    let metrics = summarize(&result.scores, &point)?;
    let [tp, fp, tn, fneg] = confusion(&result.scores, &point);
    let chi2 = chi2_independence([[tp, fp], [fneg, tn]])
        .ok()
        .map(|(statistic, p_value)| Chi2Summary {
            statistic,
            p_value,
            sample_size: result.scores.len(),
        });
    let permutation = if opts.permutations > 0 && opts.mode == EvalMode::Loot {
        let p = permutation_significance(&subjects, &trainer, opts.permutations, &lo)?;
        Some(PermutationSummary {
            repetitions: opts.permutations,
            null_mean_auc: p.null_auc.iter().sum::<f64>() / p.null_auc.len() as f64,
            p_value: p.p_value,
        })
    } else {
        None
    };
    Ok(EvaluationReport {
        model: opts.model.clone(),
        mode: opts.mode,
        n_subjects: result.scores.len(),
        n_windows: rows.len(),
        excluded: result.excluded,
        metrics,
        operating_point: point,
        roc,
        scores: result.scores,
        chi2,
        permutation,
    })
}

pub fn format_report(r: &EvaluationReport) -> String {
    let m = &r.metrics;
    let mut s = String::new();
    let _ = writeln!(s, "model: {}", r.model);
    let _ = writeln!(s, "mode: {:?}", r.mode);
    let _ = writeln!(s, "subjects: {} ({} windows)", r.n_subjects, r.n_windows);
    if !r.excluded.is_empty() {
        let _ = writeln!(s, "excluded (no windows): {}", r.excluded.join(", "));
    }
    let _ = writeln!(s, "AUC: {:.4}", m.auc);
    let _ = writeln!(s, "accuracy: {:.4}", m.accuracy);
    let _ = writeln!(s, "F1: {:.4}", m.f1);
    let _ = writeln!(s, "balanced accuracy: {:.4}", m.balanced_accuracy);
    let _ = writeln!(s, "sensitivity: {:.4}", m.sensitivity);
    let _ = writeln!(s, "specificity: {:.4}", m.specificity);
    let _ = writeln!(
        s,
        "operating point: fpr {:.4}, tpr {:.4}, threshold {}",
        r.operating_point.fpr, r.operating_point.tpr, r.operating_point.threshold
    );
    match &r.chi2 {
        Some(c) => {
            let _ = writeln!(
                s,
                "chi2: {:.4} (p = {:.4e}, n = {}; large samples make this test over-powered)",
                c.statistic, c.p_value, c.sample_size
            );
        }
        None => {
            let _ = writeln!(s, "chi2: undefined (a predicted or true class is empty)");
        }
    }
    if let Some(p) = &r.permutation {
        let _ = writeln!(
            s,
            "label permutation: {} repetitions, null mean AUC {:.4}, p = {:.4}",
            p.repetitions, p.null_mean_auc, p.p_value
        );
    }
    if r.mode == EvalMode::Loocv {
        let _ = writeln!(s, "caveat: {LOOCV_CAVEAT}");
    }
    s
}

pub fn roc_csv(roc: &RocCurve) -> String {
    let mut s = String::from("fpr,tpr,threshold\n");
    for p in &roc.points {
        let _ = writeln!(s, "{},{},{}", p.fpr, p.tpr, p.threshold);
    }
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `report.txt`, `report.json`, `metrics.csv` and `roc.csv`.
pub fn write_report(dir: &Path, r: &EvaluationReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("report.txt"), &format_report(r))?;
    let json = serde_json::to_string_pretty(r).expect("report serializes");
    write(&dir.join(REPORT_JSON), &json)?;
    write(
        &dir.join("metrics.csv"),
        &format!("{}\n{}\n", Metrics::CSV_HEADER, r.metrics.csv_row(&r.model)),
    )?;
    write(&dir.join("roc.csv"), &roc_csv(&r.roc))
}

pub fn read_report(path: &Path) -> Result<EvaluationReport> {
    let p = if path.is_dir() { path.join(REPORT_JSON) } else { path.to_path_buf() };
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(&p, e.to_string()))
}

/// Table of several evaluation reports plus one ROC point list per model.
pub struct Consolidated {
    pub table_csv: String,
    pub text: String,
    pub roc: Vec<(String, String)>,
}

pub fn consolidate(reports: &[EvaluationReport]) -> Consolidated {
    let mut table_csv = format!("{}\n", Metrics::CSV_HEADER);
    let mut text = format!(
        "{:<16} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n",
        "model", "AUC", "Acc", "F1", "BAcc", "Sens", "Spec"
    );
    let mut roc = Vec::new();
    for r in reports {
        let m = &r.metrics;
        table_csv.push_str(&m.csv_row(&r.model));
        table_csv.push('\n');
        let _ = writeln!(
            text,
            "{:<16} {:>6.2} {:>6.2} {:>6.2} {:>6.2} {:>6.2} {:>6.2}",
            r.model, m.auc, m.accuracy, m.f1, m.balanced_accuracy, m.sensitivity, m.specificity
        );
        roc.push((r.model.clone(), roc_csv(&r.roc)));
    }
    if reports.iter().any(|r| r.mode == EvalMode::Loocv) {
        let _ = writeln!(text, "caveat: {LOOCV_CAVEAT}");
    }
    Consolidated { table_csv, text, roc }
}
