use serde::{Deserialize, Serialize};

use super::SubjectScore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores at or above this are called positive; `+∞` calls nothing positive.
    #[serde(with = "extended_f64")]
    pub threshold: f64,
}

/// JSON has no infinity; non-finite thresholds travel as strings.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Num(*v)
        } else {
            Repr::Text(v.to_string())
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

fn class_counts(scores: &[SubjectScore]) -> Result<(u64, u64)> {
    let p = scores.iter().filter(|s| s.label).count() as u64;
    let n = scores.len() as u64 - p;
    if p == 0 || n == 0 {
        return Err(Error::UndefinedMetric(format!(
            "ROC needs both classes, got {p} positive and {n} negative"
        )));
    }
    Ok((p, n))
}

/// Threshold sweep over the unique scores, highest first. The area is
/// accumulated in integer counts so tied scores contribute exactly half.
pub fn roc_auc(scores: &[SubjectScore]) -> Result<RocCurve> {
    let (p, n) = class_counts(scores)?;
    let mut sorted: Vec<&SubjectScore> = scores.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let s = sorted[i].score;
        let (tp0, fp0) = (tp, fp);
        while i < sorted.len() && sorted[i].score == s {
            if sorted[i].label {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += u128::from(fp - fp0) * u128::from(tp + tp0);
        points.push(RocPoint {
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
            threshold: s,
        });
    }
    Ok(RocCurve {
        points,
        auc: area2 as f64 / (2 * u128::from(p) * u128::from(n)) as f64,
    })
}

/// Curve point maximizing `tpr − fpr`. Equal values go to the lowest
/// `fpr`, then the highest `tpr`, so a flat diagonal yields `(0, 0)`.
pub fn optimal_operating_point(roc: &RocCurve) -> RocPoint {
    const EPS: f64 = 1e-12;
    let mut best = roc.points[0];
    for &pt in &roc.points[1..] {
        let (j, jb) = (pt.tpr - pt.fpr, best.tpr - best.fpr);
        let better = j > jb + EPS
            || ((j - jb).abs() <= EPS
                && (pt.fpr < best.fpr || (pt.fpr == best.fpr && pt.tpr > best.tpr)));
        if better {
            best = pt;
        }
    }
    best
}
