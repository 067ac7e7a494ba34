use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::roc::{roc_auc, RocPoint};
use super::SubjectScore;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auc: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub balanced_accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

impl Metrics {
    pub const CSV_HEADER: &'static str = "model,auc,accuracy,f1,balanced_accuracy,sensitivity,specificity";

    pub fn csv_row(&self, model: &str) -> String {
        format!(
            "{model},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            self.auc, self.accuracy, self.f1, self.balanced_accuracy, self.sensitivity, self.specificity
        )
    }
}

/// Confusion counts `[tp, fp, tn, fn]` at the point's threshold.
pub fn confusion(scores: &[SubjectScore], point: &RocPoint) -> [u64; 4] {
    let mut c = [0u64; 4];
    for s in scores {
        let pred = s.score >= point.threshold;
        let idx = match (pred, s.label) {
            (true, true) => 0,
            (true, false) => 1,
            (false, false) => 2,
            (false, true) => 3,
        };
        c[idx] += 1;
    }
    c
}

/// Threshold metrics at `point` plus the AUC of `scores`.
pub fn summarize(scores: &[SubjectScore], point: &RocPoint) -> Result<Metrics> {
    let auc = roc_auc(scores)?.auc;
    let [tp, fp, tn, fneg] = confusion(scores, point);
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let sensitivity = ratio(tp, tp + fneg);
    let specificity = ratio(tn, tn + fp);
    Ok(Metrics {
        auc,
        accuracy: ratio(tp + tn, tp + tn + fp + fneg),
        f1: ratio(2 * tp, 2 * tp + fp + fneg),
        balanced_accuracy: (sensitivity + specificity) / 2.0,
        sensitivity,
        specificity,
    })
}

/// Pearson χ² statistic with one degree of freedom and its p-value.
/// `table[i][j]` counts predicted class `i` against true class `j`.
pub fn chi2_independence(table: [[u64; 2]; 2]) -> Result<(f64, f64)> {
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    if rows.contains(&0) || cols.contains(&0) {
        return Err(invalid(format!("zero marginal in {table:?}")));
    }
    let n = (rows[0] + rows[1]) as f64;
    let mut stat = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let e = rows[i] as f64 * cols[j] as f64 / n;
            let d = table[i][j] as f64 - e;
            stat += d * d / e;
        }
    }
    let p = ChiSquared::new(1.0).expect("one degree of freedom").sf(stat);
    Ok((stat, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{optimal_operating_point, roc_auc};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cohort(n_pos: usize, n_neg: usize, f: impl Fn(bool, usize) -> f64) -> Vec<SubjectScore> {
        (0..n_pos)
            .map(|i| (true, i))
            .chain((0..n_neg).map(|i| (false, i)))
            .map(|(label, i)| SubjectScore {
                subject_id: format!("s{i}"),
                score: f(label, i),
                label,
            })
            .collect()
    }

    #[test]
    fn all_negative_classifier() {
        let s = cohort(12, 24, |_, _| 0.0);
        let roc = roc_auc(&s).unwrap();
        let m = summarize(&s, &optimal_operating_point(&roc)).unwrap();
        assert!((m.accuracy - 0.67).abs() <= 0.005);
        assert_eq!(m.f1, 0.0);
        assert_eq!(m.balanced_accuracy, 0.5);
        assert_eq!(m.auc, 0.5);
    }

    #[test]
    fn perfect_predictions() {
        let s = cohort(5, 7, |l, _| if l { 1.0 } else { 0.0 });
        let roc = roc_auc(&s).unwrap();
        let m = summarize(&s, &optimal_operating_point(&roc)).unwrap();
        assert_eq!(
            [m.auc, m.accuracy, m.f1, m.balanced_accuracy, m.sensitivity, m.specificity],
            [1.0; 6]
        );
    }

    #[test]
    fn constant_classifiers_balance_to_half() {
        for (n_pos, n_neg) in [(1, 9), (12, 24), (30, 3)] {
            let s = cohort(n_pos, n_neg, |_, _| 0.4);
            for threshold in [0.4, f64::INFINITY] {
                let pt = RocPoint { fpr: 0.0, tpr: 0.0, threshold };
                assert_eq!(summarize(&s, &pt).unwrap().balanced_accuracy, 0.5);
            }
        }
    }

    #[test]
    fn chi2_fixed_tables() {
        assert_eq!(chi2_independence([[25, 25], [25, 25]]).unwrap().0, 0.0);
        let (s, p) = chi2_independence([[50, 0], [0, 50]]).unwrap();
        assert!((s - 100.0).abs() < 1e-12);
        assert!(p < 1e-20);
        assert!(chi2_independence([[0, 0], [3, 4]]).is_err());
    }

    #[test]
    fn chi2_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let t = [[rng.random_range(1..60u64), rng.random_range(1..60u64)], [
                rng.random_range(1..60u64),
                rng.random_range(1..60u64),
            ]];
            let (a, b, c, d) = (t[0][0] as f64, t[0][1] as f64, t[1][0] as f64, t[1][1] as f64);
            let n = a + b + c + d;
            let expect = n * (a * d - b * c).powi(2) / ((a + b) * (c + d) * (a + c) * (b + d));
            let p_expect = statrs::function::erf::erfc((expect / 2.0).sqrt());
            let (s, p) = chi2_independence(t).unwrap();
            assert!((s - expect).abs() < 1e-9);
            assert!((p - p_expect).abs() < 1e-9);
        }
    }
}
