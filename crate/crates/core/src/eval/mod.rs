//! Logistic baseline, leave-one-subject-out scoring, ROC analysis,
//! threshold metrics and significance tests.

mod logistic;
mod loot;
mod roc;
mod stats;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use logistic::{balanced_weights, logistic_fit, logistic_fit_weighted, LogisticModel, DEFAULT_L2, DEFAULT_MAX_ITER};
pub use loot::{
    loocv, loot, training_rows, Classifier, LogisticTrainer, LootOptions, LootResult,
    StandardizedLogistic, Subject, Trainer, IMBALANCE_RATIO,
};
pub use roc::{optimal_operating_point, roc_auc, RocCurve, RocPoint};
pub use stats::{chi2_independence, confusion, summarize, Metrics};

use crate::error::{invalid, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectScore {
    pub subject_id: String,
    /// Fraction of the subject's windows classified positive.
    pub score: f64,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationResult {
    pub observed_auc: f64,
    pub null_auc: Vec<f64>,
    /// Fraction of null AUCs at or above the observed one.
    pub p_value: f64,
}

/// Label-permutation test of the LOOT AUC: each repetition marks a random
/// half of the subjects positive and reruns the pipeline.
pub fn permutation_significance<T: Trainer>(
    subjects: &[Subject],
    trainer: &T,
    n_reps: usize,
    opts: &LootOptions,
) -> Result<PermutationResult> {
    if n_reps == 0 {
        return Err(invalid("at least one permutation is required"));
    }
    if subjects.len() < 2 {
        return Err(invalid("an even split needs at least 2 subjects"));
    }
    let observed_auc = roc_auc(&loot(subjects, trainer, opts)?.scores)?.auc;
    let mut null_auc = Vec::with_capacity(n_reps);
    for rep in 0..n_reps {
        let rep_seed = seed::derive(opts.seed ^ 0x5045_524d, rep as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
        let pos = sample(&mut rng, subjects.len(), subjects.len() / 2).into_vec();
        let mut shuffled = subjects.to_vec();
        for s in shuffled.iter_mut() {
            s.label = false;
        }
        for i in pos {
            shuffled[i].label = true;
        }
        let rep_opts = LootOptions {
            seed: rep_seed,
            ..*opts
        };
        null_auc.push(roc_auc(&loot(&shuffled, trainer, &rep_opts)?.scores)?.auc);
    }
    let p_value = null_auc.iter().filter(|&&a| a >= observed_auc).count() as f64 / n_reps as f64;
    Ok(PermutationResult {
        observed_auc,
        null_auc,
        p_value,
    })
}
