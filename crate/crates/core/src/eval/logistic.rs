use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_L2: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-8;

/// Logistic model; `weights[0]` is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn probability(&self, x: &[f64]) -> f64 {
        let z = self.weights[0] + self.weights[1..].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        sigmoid(z)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Negative log-likelihood of label `y` under logit `z`, overflow-safe.
fn nll(z: f64, y: bool) -> f64 {
    let s = if y { -z } else { z };
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

/// L2-regularized logistic regression by iteratively reweighted least
/// squares with step halving. The intercept is not penalized.
pub fn logistic_fit(features: &[Vec<f64>], labels: &[bool], l2: f64, max_iter: usize) -> Result<LogisticModel> {
    logistic_fit_weighted(features, labels, &vec![1.0; labels.len()], l2, max_iter)
}

/// Sample weights that give both classes the same total weight.
pub fn balanced_weights(labels: &[bool]) -> Vec<f64> {
    let n = labels.len() as f64;
    let pos = labels.iter().filter(|&&y| y).count() as f64;
    labels
        .iter()
        .map(|&y| n / (2.0 * if y { pos } else { n - pos }))
        .collect()
}

/// [`logistic_fit`] with per-sample weights on the likelihood terms.
pub fn logistic_fit_weighted(
    features: &[Vec<f64>],
    labels: &[bool],
    weights: &[f64],
    l2: f64,
    max_iter: usize,
) -> Result<LogisticModel> {
    if features.len() != labels.len() || weights.len() != labels.len() {
        return Err(invalid("features, labels and weights differ in length"));
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(invalid("sample weights must be positive"));
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::DegenerateLabels(format!(
            "{n_pos} positives among {} samples",
            labels.len()
        )));
    }
    if !(l2 >= 0.0) {
        return Err(invalid(format!("l2 must be non-negative, got {l2}")));
    }
    let d = features[0].len();
    if features.iter().any(|f| f.len() != d || f.iter().any(|v| !v.is_finite())) {
        return Err(invalid("features must be finite and of equal dimension"));
    }
    let n = features.len();
    let x = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { features[i][j - 1] });
    let y = DVector::from_iterator(n, labels.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    let penalty = DVector::from_fn(d + 1, |j, _| if j == 0 { 0.0 } else { l2 });
    let sw = DVector::from_column_slice(weights);

    let objective = |w: &DVector<f64>| -> f64 {
        let z = &x * w;
        z.iter().zip(labels).zip(weights).map(|((&z, &y), c)| c * nll(z, y)).sum::<f64>()
            + 0.5 * w.iter().zip(penalty.iter()).map(|(w, p)| p * w * w).sum::<f64>()
    };

    let w_pos: f64 = weights.iter().zip(labels).filter(|(_, &y)| y).map(|(c, _)| c).sum();
    let prior = w_pos / weights.iter().sum::<f64>();
    let mut w = DVector::zeros(d + 1);
    w[0] = (prior / (1.0 - prior)).ln();
    let mut f = objective(&w);
    let gradient = |w: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
        let p = (&x * w).map(sigmoid);
        let g = x.transpose() * (&p - &y).component_mul(&sw) + penalty.component_mul(w);
        (g, p)
    };
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let (grad, p) = gradient(&w);
        if grad.amax() < GRAD_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let s = p.map(|v| (v * (1.0 - v)).max(1e-12)).component_mul(&sw);
        let mut h = x.transpose() * DMatrix::from_diagonal(&s) * &x;
        for j in 0..=d {
            // tiny ridge keeps the system solvable for constant columns
            h[(j, j)] += penalty[j] + 1e-10;
        }
        let step = match h.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => h.lu().solve(&grad).unwrap_or_else(|| grad.clone()),
        };
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-10 {
            let trial = &w - &step * t;
            let ft = objective(&trial);
            // near the optimum the objective is flat to rounding; accept
            // steps that still shrink the gradient
            let flat = ft <= f + 1e-12 * f.abs().max(1.0) && gradient(&trial).0.amax() < grad.amax();
            if ft <= f || flat {
                w = trial;
                f = ft;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if !converged {
        let grad = gradient(&w).0;
        converged = grad.amax() < GRAD_TOL;
        if !converged {
            log::debug!("logistic fit stopped after {iterations} iterations, |grad| {}", grad.amax());
        }
    }
    Ok(LogisticModel {
        weights: w.iter().copied().collect(),
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separable_points_are_classified() {
        let x: Vec<Vec<f64>> = [-3.0, -2.0, -1.5, -1.0, 1.0, 1.5, 2.5, 3.0].iter().map(|v| vec![*v]).collect();
        let y = [false, false, false, false, true, true, true, true];
        let m = logistic_fit(&x, &y, 0.1, 100).unwrap();
        assert!(m.converged);
        for (xi, yi) in x.iter().zip(y) {
            assert_eq!(m.probability(xi) >= 0.5, yi);
        }
        // refit oracle: the fitted optimum is a fixed point
        let again = logistic_fit(&x, &y, 0.1, 100).unwrap();
        assert_eq!(again.weights, m.weights);
    }

    #[test]
    fn uninformative_features_give_prior() {
        let x = vec![vec![0.0, 0.0]; 10];
        let y = [true, true, true, false, false, false, false, false, false, false];
        let m = logistic_fit(&x, &y, DEFAULT_L2, 100).unwrap();
        assert!((m.probability(&[0.0, 0.0]) - 0.3).abs() < 1e-12);
        assert_eq!(&m.weights[1..], &[0.0, 0.0]);
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0]; 4];
        assert!(matches!(
            logistic_fit(&x, &[true; 4], DEFAULT_L2, 100),
            Err(Error::DegenerateLabels(_))
        ));
    }

    #[test]
    fn max_iter_zero_is_flagged() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y = [false, true, false, true, true, true];
        let m = logistic_fit(&x, &y, DEFAULT_L2, 0).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn stationary_point_has_zero_gradient(
            pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, any::<bool>()), 6..40),
            l2 in 0.01f64..1.0,
        ) {
            let y: Vec<bool> = pts.iter().map(|p| p.2).collect();
            prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
            let x: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.0, p.1]).collect();
            let m = logistic_fit(&x, &y, l2, 200).unwrap();
            prop_assert!(m.converged);
            // independent gradient check in plain arithmetic
            let mut g = [0.0; 3];
            for (xi, &yi) in x.iter().zip(&y) {
                let r = m.probability(xi) - if yi { 1.0 } else { 0.0 };
                g[0] += r;
                g[1] += r * xi[0];
                g[2] += r * xi[1];
            }
            g[1] += l2 * m.weights[1];
            g[2] += l2 * m.weights[2];
            prop_assert!(g.iter().all(|v| v.abs() < 1e-6), "{g:?}");
        }
    }
}
