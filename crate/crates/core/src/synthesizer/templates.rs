//! Built-in library of 47 normal-subject VCG morphologies.
//!
//! Each subject is a seeded variation of one nine-kernel reference beat
//! (P split in two, Q, R, R', S, ST, and a two-kernel asymmetric T). All
//! three leads share kernel timing and differ in amplitude, as for a single
//! moving dipole. Subjects are redrawn until their QTc sits inside
//! `[0.37, 0.43]` s so that moderate perturbation stays physiological.

use std::f64::consts::TAU;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::qt::qtc_at_hr;
use crate::beat_model::{GaussianKernel, Lead, LeadTemplate, MorphologyTemplate};

pub const LIBRARY_SIZE: usize = 47;

const LIBRARY_SEED: u64 = 0x5eed_ec90_0047;

/// (time s, width s, [X, Y, Z] amplitudes mV) at RR = 1 s.
const REFERENCE_BEAT: [(f64, f64, [f64; 3]); 9] = [
    (-0.200, 0.022, [0.08, 0.10, -0.03]),
    (-0.170, 0.018, [0.05, 0.06, 0.02]),
    (-0.028, 0.007, [-0.10, -0.08, 0.15]),
    (0.000, 0.009, [1.10, 0.70, -0.45]),
    (0.014, 0.008, [0.25, 0.15, -0.30]),
    (0.030, 0.008, [-0.22, -0.20, 0.35]),
    (0.120, 0.045, [0.04, 0.03, -0.02]),
    (0.235, 0.042, [0.28, 0.18, -0.15]),
    (0.280, 0.026, [0.10, 0.06, -0.05]),
];

fn subject(index: usize, rng: &mut ChaCha8Rng) -> MorphologyTemplate {
    loop {
        let gain: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.8..1.2));
        let t_shift = rng.random_range(-0.02..0.02);
        let t_gain = rng.random_range(0.8..1.25);
        let kernels: Vec<_> = REFERENCE_BEAT
            .iter()
            .enumerate()
            .map(|(i, &(t, w, amps))| {
                let is_t = i >= 7;
                let center = t + if is_t { t_shift } else { 0.0 };
                let width = w * rng.random_range(0.9..1.1);
                let jitter = rng.random_range(0.85..1.15);
                (center, width, amps.map(|a| a * jitter * if is_t { t_gain } else { 1.0 }))
            })
            .collect();
        let leads = Lead::ALL.map(|lead| {
            LeadTemplate::new(
                lead,
                kernels
                    .iter()
                    .map(|&(c, w, a)| GaussianKernel {
                        amplitude: a[lead.index()] * gain[lead.index()],
                        width: w * TAU,
                        center: c * TAU,
                    })
                    .collect(),
            )
        });
        let Ok(t) = MorphologyTemplate::new(format!("ref{:02}", index + 1), leads) else {
            continue;
        };
        if qtc_at_hr(&t, 60.0).is_ok_and(|q| (0.37..=0.43).contains(&q)) {
            return t;
        }
    }
}

/// The 47 reference subjects, generated once per process.
pub fn builtin_library() -> &'static [MorphologyTemplate] {
    static LIB: OnceLock<Vec<MorphologyTemplate>> = OnceLock::new();
    LIB.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(LIBRARY_SEED);
        (0..LIBRARY_SIZE).map(|i| subject(i, &mut rng)).collect()
    })
}
