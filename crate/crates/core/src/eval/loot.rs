use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::logistic::{balanced_weights, logistic_fit, logistic_fit_weighted, LogisticModel, DEFAULT_L2, DEFAULT_MAX_ITER};
use super::SubjectScore;
use crate::error::{invalid, Error, Result};
use crate::seed;

/// Training majority/minority window ratio from which majority-class
/// subjects are subsampled to half their windows.
pub const IMBALANCE_RATIO: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub label: bool,
    /// One feature vector per window.
    pub windows: Vec<Vec<f64>>,
}

pub trait Classifier {
    fn probability(&self, x: &[f64]) -> f64;
}

pub trait Trainer: Sync {
    type Model: Classifier;
    fn train(&self, x: &[Vec<f64>], y: &[bool]) -> Result<Self::Model>;
}

/// Logistic regression on z-scored features.
#[derive(Debug, Clone, Copy)]
pub struct LogisticTrainer {
    pub l2: f64,
    pub max_iter: usize,
    /// Weight classes equally so the intercept does not follow the
    /// fold's class prior.
    pub balanced: bool,
}

impl Default for LogisticTrainer {
    fn default() -> Self {
        Self {
            l2: DEFAULT_L2,
            max_iter: DEFAULT_MAX_ITER,
            balanced: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StandardizedLogistic {
    mean: Vec<f64>,
    scale: Vec<f64>,
    pub model: LogisticModel,
}

impl Classifier for StandardizedLogistic {
    fn probability(&self, x: &[f64]) -> f64 {
        let z: Vec<f64> = x
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        self.model.probability(&z)
    }
}

impl Trainer for LogisticTrainer {
    type Model = StandardizedLogistic;

    fn train(&self, x: &[Vec<f64>], y: &[bool]) -> Result<StandardizedLogistic> {
        if x.is_empty() {
            return Err(Error::InsufficientData("no training windows".into()));
        }
        let d = x[0].len();
        let n = x.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale: Vec<f64> = (0..d)
            .map(|j| {
                let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let z: Vec<Vec<f64>> = x
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| (v - mean[j]) / scale[j]).collect())
            .collect();
        let model = if self.balanced && y.iter().any(|&v| v) && y.iter().any(|&v| !v) {
            logistic_fit_weighted(&z, y, &balanced_weights(y), self.l2, self.max_iter)?
        } else {
            logistic_fit(&z, y, self.l2, self.max_iter)?
        };
        Ok(StandardizedLogistic { mean, scale, model })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LootOptions {
    pub seed: u64,
    /// Fraction of each training subject's windows withheld from fitting.
    pub validation_frac: f64,
}

impl Default for LootOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            validation_frac: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LootResult {
    pub scores: Vec<SubjectScore>,
    /// Subjects without windows.
    pub excluded: Vec<String>,
}

/// Windows `(subject, window)` used to train the fold that holds out
/// `held_out`, after class balancing and validation withholding.
pub fn training_rows(subjects: &[Subject], held_out: usize, opts: &LootOptions) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(opts.seed, held_out as u64));
    let train: Vec<usize> = (0..subjects.len())
        .filter(|&i| i != held_out && !subjects[i].windows.is_empty())
        .collect();
    let count = |label: bool| -> usize {
        train
            .iter()
            .filter(|&&i| subjects[i].label == label)
            .map(|&i| subjects[i].windows.len())
            .sum()
    };
    let (pos, neg) = (count(true), count(false));
    let majority = if pos as f64 >= IMBALANCE_RATIO * neg as f64 && neg > 0 {
        Some(true)
    } else if neg as f64 >= IMBALANCE_RATIO * pos as f64 && pos > 0 {
        Some(false)
    } else {
        None
    };

    let mut rows = Vec::new();
    for &i in &train {
        let n = subjects[i].windows.len();
        let keep_n = if Some(subjects[i].label) == majority {
            n.div_ceil(2)
        } else {
            n
        };
        let mut keep = if keep_n < n {
            sample(&mut rng, n, keep_n).into_vec()
        } else {
            (0..n).collect()
        };
        keep.sort_unstable();
        let withhold = (opts.validation_frac * keep.len() as f64).floor() as usize;
        if withhold > 0 && withhold < keep.len() {
            let drop = sample(&mut rng, keep.len(), withhold).into_vec();
            let mut mask = vec![true; keep.len()];
            drop.into_iter().for_each(|d| mask[d] = false);
            keep = keep.into_iter().zip(mask).filter(|(_, m)| *m).map(|(k, _)| k).collect();
        }
        rows.extend(keep.into_iter().map(|w| (i, w)));
    }
    rows
}

fn fraction_positive<M: Classifier>(model: &M, windows: &[Vec<f64>]) -> f64 {
    let hits = windows.iter().filter(|w| model.probability(w) >= 0.5).count();
    hits as f64 / windows.len() as f64
}

fn check_subjects(subjects: &[Subject]) -> Result<Vec<String>> {
    if subjects.len() < 2 {
        return Err(invalid(format!("{} subjects; LOOT needs at least 2", subjects.len())));
    }
    let excluded: Vec<String> = subjects
        .iter()
        .filter(|s| s.windows.is_empty())
        .map(|s| s.id.clone())
        .collect();
    for id in &excluded {
        log::warn!("subject {id} has no windows; excluded");
    }
    let live = subjects.iter().filter(|s| !s.windows.is_empty());
    let pos = live.clone().filter(|s| s.label).count();
    let total = live.count();
    if pos == 0 || pos == total {
        return Err(Error::DegenerateLabels(format!(
            "{pos} positive of {total} subjects with windows"
        )));
    }
    Ok(excluded)
}

/// Leave-one-subject-out scores: each subject is scored by a model
/// trained on the others. Folds run in parallel with per-fold seeds.
pub fn loot<T: Trainer>(subjects: &[Subject], trainer: &T, opts: &LootOptions) -> Result<LootResult> {
    let excluded = check_subjects(subjects)?;
    let scores = (0..subjects.len())
        .into_par_iter()
        .filter(|&i| !subjects[i].windows.is_empty())
        .map(|i| {
            let rows = training_rows(subjects, i, opts);
            let x: Vec<Vec<f64>> = rows.iter().map(|&(s, w)| subjects[s].windows[w].clone()).collect();
            let y: Vec<bool> = rows.iter().map(|&(s, _)| subjects[s].label).collect();
            let model = trainer.train(&x, &y)?;
            Ok(SubjectScore {
                subject_id: subjects[i].id.clone(),
                score: fraction_positive(&model, &subjects[i].windows),
                label: subjects[i].label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LootResult { scores, excluded })
}

/// Window-level cross-validation that ignores subject identity. Pooled
/// windows are split into `round(1 / validation_frac)` folds (10 when
/// unset) and each fold is scored by a model trained on the rest. Other
/// windows of the same subject sit in training, so the resulting metrics
/// are optimistic.
pub fn loocv<T: Trainer>(subjects: &[Subject], trainer: &T, opts: &LootOptions) -> Result<LootResult> {
    let excluded = check_subjects(subjects)?;
    let mut pooled: Vec<(usize, usize)> = subjects
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.windows.len()).map(move |w| (i, w)))
        .collect();
    let folds = if opts.validation_frac > 0.0 {
        (1.0 / opts.validation_frac).round() as usize
    } else {
        10
    }
    .clamp(2, pooled.len());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let order = sample(&mut rng, pooled.len(), pooled.len()).into_vec();
    pooled = order.into_iter().map(|k| pooled[k]).collect();

    let per_fold = (0..folds)
        .into_par_iter()
        .map(|f| {
            let (val, train): (Vec<_>, Vec<_>) = pooled.iter().enumerate().partition(|(k, _)| k % folds == f);
            let x: Vec<Vec<f64>> = train.iter().map(|(_, &(s, w))| subjects[s].windows[w].clone()).collect();
            let y: Vec<bool> = train.iter().map(|(_, &(s, _))| subjects[s].label).collect();
            let model = trainer.train(&x, &y)?;
            Ok(val
                .into_iter()
                .map(|(_, &(s, w))| (s, model.probability(&subjects[s].windows[w]) >= 0.5))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut hits = vec![(0usize, 0usize); subjects.len()];
    for (s, positive) in per_fold.into_iter().flatten() {
        hits[s].0 += usize::from(positive);
        hits[s].1 += 1;
    }
    let scores = subjects
        .iter()
        .zip(hits)
        .filter(|(_, (_, n))| *n > 0)
        .map(|(s, (h, n))| SubjectScore {
            subject_id: s.id.clone(),
            score: h as f64 / n as f64,
            label: s.label,
        })
        .collect();
    Ok(LootResult { scores, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Fixed rule ignoring the training data: positive iff x[0] > 0.5.
    struct Stump;
    impl Classifier for Stump {
        fn probability(&self, x: &[f64]) -> f64 {
            if x[0] > 0.5 {
                1.0
            } else {
                0.0
            }
        }
    }
    impl Trainer for Stump {
        type Model = Stump;
        fn train(&self, _: &[Vec<f64>], _: &[bool]) -> Result<Stump> {
            Ok(Stump)
        }
    }

    fn subj(id: &str, label: bool, windows: Vec<Vec<f64>>) -> Subject {
        Subject {
            id: id.into(),
            label,
            windows,
        }
    }

    #[test]
    fn two_separable_subjects() {
        let s = [
            subj("p", true, vec![vec![1.0]; 3]),
            subj("n", false, vec![vec![0.0]; 3]),
        ];
        let r = loot(&s, &Stump, &LootOptions::default()).unwrap();
        assert_eq!(r.scores[0].score, 1.0);
        assert_eq!(r.scores[1].score, 0.0);
    }

    #[test]
    fn empty_subject_excluded() {
        let s = [
            subj("p", true, vec![vec![1.0]]),
            subj("e", true, vec![]),
            subj("n", false, vec![vec![0.0]]),
        ];
        let r = loot(&s, &Stump, &LootOptions::default()).unwrap();
        assert_eq!(r.scores.len(), 2);
        assert_eq!(r.excluded, vec!["e".to_string()]);
    }

    #[test]
    fn too_few_subjects() {
        let s = [subj("p", true, vec![vec![1.0]])];
        assert!(matches!(
            loot(&s, &Stump, &LootOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    fn cohort(n_pos: usize, n_neg: usize, windows: usize) -> Vec<Subject> {
        (0..n_pos + n_neg)
            .map(|i| {
                let label = i < n_pos;
                let ws = (0..windows)
                    .map(|w| vec![if label { 1.0 } else { 0.0 } + 0.01 * w as f64, (i * 7 % 5) as f64])
                    .collect();
                subj(&format!("s{i}"), label, ws)
            })
            .collect()
    }

    #[test]
    fn majority_subjects_are_halved() {
        let s = cohort(12, 24, 50);
        for held in [0, 20] {
            let rows = training_rows(&s, held, &LootOptions::default());
            for (i, subject) in s.iter().enumerate() {
                let n = rows.iter().filter(|r| r.0 == i).count();
                let expect = match (i == held, subject.label) {
                    (true, _) => 0,
                    (false, true) => 50,
                    (false, false) => 25,
                };
                assert_eq!(n, expect, "subject {i} held {held}");
            }
        }
        // balanced folds are not subsampled
        let s = cohort(10, 10, 4);
        assert_eq!(training_rows(&s, 0, &LootOptions::default()).len(), 19 * 4);
    }

    #[test]
    fn logistic_loot_scores_every_subject() {
        let s = cohort(6, 6, 5);
        let r = loot(&s, &LogisticTrainer::default(), &LootOptions { seed: 3, validation_frac: 0.0 }).unwrap();
        assert_eq!(r.scores.len(), 12);
        for sc in &r.scores {
            assert_eq!(sc.score, if sc.label { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let s = cohort(5, 9, 6);
        let opts = LootOptions { seed: 11, validation_frac: 0.2 };
        let par = loot(&s, &LogisticTrainer::default(), &opts).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let seq = pool.install(|| loot(&s, &LogisticTrainer::default(), &opts)).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn loocv_scores_validation_windows() {
        let s = cohort(4, 4, 10);
        let r = loocv(&s, &LogisticTrainer::default(), &LootOptions { seed: 1, validation_frac: 0.2 }).unwrap();
        assert_eq!(r.scores.len(), 8);
        assert!(r.scores.iter().all(|sc| sc.score == if sc.label { 1.0 } else { 0.0 }));
        let single = cohort(6, 6, 1);
        let r = loocv(&single, &LogisticTrainer::default(), &LootOptions::default()).unwrap();
        assert_eq!(r.scores.len(), 12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn held_out_subject_never_trains(
            n_pos in 1usize..6, n_neg in 1usize..6, windows in 1usize..8,
            held in 0usize..12, seed in any::<u64>(), frac in 0.0f64..0.5,
        ) {
            let s = cohort(n_pos, n_neg, windows);
            let held = held % s.len();
            let rows = training_rows(&s, held, &LootOptions { seed, validation_frac: frac });
            prop_assert!(rows.iter().all(|r| r.0 != held));
            prop_assert!(rows.iter().all(|r| r.1 < windows));
        }
    }
}
