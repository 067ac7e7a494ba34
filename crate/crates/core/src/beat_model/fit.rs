//! Damped least-squares fit of Gaussian kernels to an average beat.

use nalgebra::{DMatrix, DVector};

use super::{wrap_phase, AverageBeat, GaussianKernel, Lead, LeadTemplate};
use crate::error::{invalid, Result};

/// Widths are never allowed below this during optimization.
pub const MIN_WIDTH: f64 = 1e-4;

const SEED_WIDTH: f64 = 0.05;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e14;

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub n_kernels: usize,
    /// Relative objective change below which an accepted step ends the fit.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting kernels; extrema peeling is used when absent.
    pub init: Option<Vec<GaussianKernel>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_kernels: super::DEFAULT_KERNELS,
            tol: 1e-10,
            max_iter: 500,
            init: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub template: LeadTemplate,
    pub converged: bool,
    pub iterations: usize,
    pub initial_rss: f64,
    pub rss: f64,
}

impl FitOutcome {
    pub fn residual_rms(&self, n: usize) -> f64 {
        (self.rss / n as f64).sqrt()
    }
}

/// Fits `opts.n_kernels` Gaussians to `beat` by Levenberg-Marquardt.
///
/// The returned residual never exceeds that of the initialization. When the
/// iteration budget runs out the best kernels found so far are returned with
/// `converged == false`.
pub fn fit_template(beat: &AverageBeat, lead: Lead, opts: &FitOptions) -> Result<FitOutcome> {
    let n_k = opts.n_kernels;
    if n_k == 0 {
        return Err(invalid("n_kernels must be at least 1"));
    }
    if beat.len() <= 3 * n_k {
        return Err(invalid(format!(
            "beat grid of {} samples too short for {n_k} kernels",
            beat.len()
        )));
    }
    let init = match &opts.init {
        Some(k) if k.len() != n_k => {
            return Err(invalid(format!(
                "init has {} kernels, expected {n_k}",
                k.len()
            )))
        }
        Some(k) => k.clone(),
        None => initial_kernels(beat, n_k),
    };

    let phases = beat.phases();
    let y = beat.samples();
    let mut params = pack(&init);
    clamp(&mut params);
    let mut rss = objective(&params, &phases, y);
    let initial_rss = rss;
    let mut lambda = LAMBDA_INIT;
    let mut converged = rss == 0.0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let (jac, res) = jacobian(&params, &phases, y);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * &res;

        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * (jtj[(i, i)] + 1e-12);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let mut trial = &params + step;
            clamp(&mut trial);
            let trial_rss = objective(&trial, &phases, y);
            if trial_rss < rss {
                let rel = (rss - trial_rss) / rss;
                params = trial;
                rss = trial_rss;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < opts.tol || rss == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left at any damping: stationary point
            converged = true;
        }
    }

    Ok(FitOutcome {
        template: LeadTemplate::new(lead, unpack(&params)),
        converged,
        iterations,
        initial_rss,
        rss,
    })
}

/// Deterministic starting kernels: repeatedly seed a kernel at the largest
/// remaining extremum of the residual and peel it off.
pub fn initial_kernels(beat: &AverageBeat, n_kernels: usize) -> Vec<GaussianKernel> {
    let phases = beat.phases();
    let mut residual = beat.samples().to_vec();
    let mut out = Vec::with_capacity(n_kernels);
    for _ in 0..n_kernels {
        let (j, &amp) = residual
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("beat is non-empty");
        let amp = if amp == 0.0 { 1e-6 } else { amp };
        let k = GaussianKernel {
            amplitude: amp,
            width: half_max_width(&residual, &phases, j).unwrap_or(SEED_WIDTH),
            center: phases[j],
        };
        for (r, &p) in residual.iter_mut().zip(&phases) {
            *r -= k.value_at(p);
        }
        out.push(k);
    }
    out
}

/// Gaussian width implied by the full width at half maximum of the lobe
/// around sample `j`, walking circularly.
fn half_max_width(r: &[f64], phases: &[f64], j: usize) -> Option<f64> {
    let n = r.len();
    let half = r[j] / 2.0;
    let inside = |i: usize| r[i] * half.signum() > half.abs();
    let mut left = 0;
    while left < n / 2 && inside((j + n - left - 1) % n) {
        left += 1;
    }
    let mut right = 0;
    while right < n / 2 && inside((j + right + 1) % n) {
        right += 1;
    }
    let step = phases[1] - phases[0];
    let fwhm = (left + right + 1) as f64 * step;
    let sigma = fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
    (sigma.is_finite() && sigma > 0.0).then(|| sigma.clamp(SEED_WIDTH / 5.0, 1.5))
}

fn pack(kernels: &[GaussianKernel]) -> DVector<f64> {
    DVector::from_iterator(
        kernels.len() * 3,
        kernels
            .iter()
            .flat_map(|k| [k.amplitude, k.width, k.center]),
    )
}

fn unpack(p: &DVector<f64>) -> Vec<GaussianKernel> {
    p.as_slice()
        .chunks_exact(3)
        .map(|c| GaussianKernel {
            amplitude: c[0],
            width: c[1],
            center: c[2],
        })
        .collect()
}

fn clamp(p: &mut DVector<f64>) {
    for c in p.as_mut_slice().chunks_exact_mut(3) {
        c[1] = c[1].abs().max(MIN_WIDTH);
        c[2] = wrap_phase(c[2]);
    }
}

fn objective(p: &DVector<f64>, phases: &[f64], y: &[f64]) -> f64 {
    let ks = unpack(p);
    phases
        .iter()
        .zip(y)
        .map(|(&t, &v)| {
            let r = ks.iter().map(|k| k.value_at(t)).sum::<f64>() - v;
            r * r
        })
        .sum()
}

fn jacobian(p: &DVector<f64>, phases: &[f64], y: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let ks = unpack(p);
    let mut jac = DMatrix::zeros(phases.len(), p.len());
    let mut res = DVector::zeros(phases.len());
    for (row, (&t, &v)) in phases.iter().zip(y).enumerate() {
        let mut model = 0.0;
        for (i, k) in ks.iter().enumerate() {
            let d = wrap_phase(t - k.center);
            let b2 = k.width * k.width;
            let e = (-d * d / (2.0 * b2)).exp();
            let ae = k.amplitude * e;
            model += ae;
            jac[(row, 3 * i)] = e;
            jac[(row, 3 * i + 1)] = ae * d * d / (b2 * k.width);
            jac[(row, 3 * i + 2)] = ae * d / b2;
        }
        res[row] = model - v;
    }
    (jac, res)
}
