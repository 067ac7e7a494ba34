//! Parameter perturbation and alternate-beat T-wave scaling.

use rand::Rng;

use super::qt::{qt_phases, t_group};
use crate::beat_model::{phase_grid, GaussianKernel, Lead, LeadTemplate, MorphologyTemplate};
use crate::error::{invalid, Error, Result};

/// Phase grid used to calibrate the alternans amplitude.
const CALIBRATION_GRID: usize = 8192;

/// Multiplies every kernel amplitude and width by an independent draw from
/// `U[1 − max_frac, 1 + max_frac]`. Centers are left untouched.
pub fn perturb_template<R: Rng + ?Sized>(
    template: &MorphologyTemplate,
    max_frac: f64,
    rng: &mut R,
) -> Result<MorphologyTemplate> {
    if !(0.0..1.0).contains(&max_frac) {
        return Err(invalid(format!("max_frac must be in [0, 1), got {max_frac}")));
    }
    if max_frac == 0.0 {
        return Ok(template.clone());
    }
    let mut draw = || rng.random_range(1.0 - max_frac..=1.0 + max_frac);
    let leads = template.leads().clone().map(|lt| {
        lt.map_kernels(|_, k| GaussianKernel {
            amplitude: k.amplitude * draw(),
            width: k.width * draw(),
            center: k.center,
        })
    });
    Ok(template.with_leads(leads))
}

/// T-wave kernel indices per VCG lead.
fn vcg_t_kernels(template: &MorphologyTemplate) -> [Vec<usize>; 3] {
    Lead::ALL.map(|l| t_group(template.lead(l).kernels(), 0.0))
}

/// Splits `template` into even- and odd-beat variants whose rendered lead-I
/// T waves differ by at most `twa_uv` microvolts.
///
/// T kernels in all three VCG leads are scaled by `1 + δ` (even) and `1 − δ`
/// (odd); `δ` is solved on a dense phase grid of the lead-I projection.
pub fn apply_twa(
    template: &MorphologyTemplate,
    twa_uv: f64,
) -> Result<(MorphologyTemplate, MorphologyTemplate)> {
    if !(twa_uv >= 0.0) || !twa_uv.is_finite() {
        return Err(invalid(format!("TWA amplitude must be >= 0, got {twa_uv}")));
    }
    if twa_uv == 0.0 {
        return Ok((template.clone(), template.clone()));
    }
    // requires an identifiable T wave on lead I
    qt_phases(&template.lead_i_kernels())?;

    let t_idx = vcg_t_kernels(template);
    let t_only = |lead: Lead| -> LeadTemplate {
        let ks = template.lead(lead).kernels();
        LeadTemplate::new(lead, t_idx[lead.index()].iter().map(|&i| ks[i]).collect())
    };
    let coeffs = super::DOWER[0].1;
    let t_leads = Lead::ALL.map(t_only);
    let peak = phase_grid(CALIBRATION_GRID)
        .into_iter()
        .map(|p| {
            t_leads
                .iter()
                .zip(coeffs)
                .map(|(lt, c)| c * lt.value_at(p))
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::InvalidTemplate(
            "T-wave kernels vanish on lead I".into(),
        ));
    }
    let delta = twa_uv * 1e-3 / (2.0 * peak);

    let scaled = |sign: f64| -> MorphologyTemplate {
        let leads = template.leads().clone().map(|lt| {
            let idx = &t_idx[lt.lead.index()];
            // map_kernels re-sorts, but indices refer to the already-sorted input
            lt.map_kernels(|i, k| {
                if idx.contains(&i) {
                    GaussianKernel {
                        amplitude: k.amplitude * (1.0 + sign * delta),
                        ..*k
                    }
                } else {
                    *k
                }
            })
        });
        template.with_leads(leads)
    };
    Ok((scaled(1.0), scaled(-1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesizer::templates::builtin_library;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lead_i_wave(t: &MorphologyTemplate, phases: &[f64]) -> Vec<f64> {
        let li = t.lead_i_kernels();
        phases.iter().map(|&p| li.value_at(p)).collect()
    }

    /// Max |even − odd| on lead I, on a grid unrelated to the calibration grid.
    fn rendered_difference_uv(t: &MorphologyTemplate, twa: f64) -> f64 {
        let (even, odd) = apply_twa(t, twa).unwrap();
        let phases = phase_grid(20_011);
        lead_i_wave(&even, &phases)
            .iter()
            .zip(lead_i_wave(&odd, &phases))
            .map(|(a, b)| (a - b).abs() * 1e3)
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_alternans_is_identity() {
        let t = &builtin_library()[0];
        let (e, o) = apply_twa(t, 0.0).unwrap();
        assert_eq!(&e, t);
        assert_eq!(&o, t);
    }

    #[test]
    fn calibrated_difference() {
        for t in builtin_library().iter().take(5) {
            let d = rendered_difference_uv(t, 60.0);
            assert!((d - 60.0).abs() <= 1.0, "{}: {d}", t.source_id);
        }
    }

    #[test]
    fn difference_grows_with_amplitude() {
        let t = &builtin_library()[3];
        assert!(rendered_difference_uv(t, 100.0) > rendered_difference_uv(t, 20.0));
    }

    #[test]
    fn non_t_kernels_untouched() {
        let t = &builtin_library()[1];
        let (e, o) = apply_twa(t, 80.0).unwrap();
        for lead in Lead::ALL {
            let idx = t_group(t.lead(lead).kernels(), 0.0);
            for (i, ((a, b), c)) in t
                .lead(lead)
                .kernels()
                .iter()
                .zip(e.lead(lead).kernels())
                .zip(o.lead(lead).kernels())
                .enumerate()
            {
                if !idx.contains(&i) {
                    assert_eq!(a, b);
                    assert_eq!(a, c);
                }
            }
        }
    }

    #[test]
    fn template_without_t_rejected() {
        let x = LeadTemplate::new(
            Lead::X,
            vec![
                GaussianKernel::new(-0.1, 0.05, -0.3).unwrap(),
                GaussianKernel::new(1.0, 0.05, 0.0).unwrap(),
            ],
        );
        let t = MorphologyTemplate::with_nominal_qt(
            "noT",
            [x, LeadTemplate::empty(Lead::Y), LeadTemplate::empty(Lead::Z)],
            0.4,
        )
        .unwrap();
        assert!(matches!(apply_twa(&t, 50.0), Err(Error::InvalidTemplate(_))));
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let t = &builtin_library()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(&perturb_template(t, 0.0, &mut rng).unwrap(), t);
    }

    #[test]
    fn perturbation_bounds() {
        let t = &builtin_library()[2];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let p = perturb_template(t, 0.045, &mut rng).unwrap();
            for lead in Lead::ALL {
                for (a, b) in t.lead(lead).kernels().iter().zip(p.lead(lead).kernels()) {
                    assert_eq!(a.center, b.center);
                    let ra = b.amplitude / a.amplitude;
                    let rw = b.width / a.width;
                    assert!((1.0 - 0.045..=1.0 + 0.045).contains(&ra), "{ra}");
                    assert!((1.0 - 0.045..=1.0 + 0.045).contains(&rw), "{rw}");
                }
            }
        }
    }

    #[test]
    fn perturbation_is_unbiased() {
        let t = &builtin_library()[4];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let ks = t.lead(Lead::X).kernels();
        let mut amp = vec![0.0; ks.len()];
        let mut wid = vec![0.0; ks.len()];
        for _ in 0..n {
            let p = perturb_template(t, 0.045, &mut rng).unwrap();
            for (i, k) in p.lead(Lead::X).kernels().iter().enumerate() {
                amp[i] += k.amplitude / n as f64;
                wid[i] += k.width / n as f64;
            }
        }
        for (i, k) in ks.iter().enumerate() {
            assert!((amp[i] / k.amplitude - 1.0).abs() < 0.005);
            assert!((wid[i] / k.width - 1.0).abs() < 0.005);
        }
    }

    #[test]
    fn bad_fraction_rejected() {
        let t = &builtin_library()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(perturb_template(t, 1.0, &mut rng).is_err());
        assert!(perturb_template(t, -0.1, &mut rng).is_err());
    }
}
