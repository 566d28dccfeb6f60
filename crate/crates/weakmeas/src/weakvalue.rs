//! Weak values and how pointer statistics reveal them.
//!
//! The weak value of an observable O between a preparation |x⟩ and a
//! post-selection |y⟩ is O_w = ⟨y|O|x⟩ / ⟨y|x⟩, complex in general. It is
//! not the reading of any single trial; every pointer reading is ±1. What
//! it does control is the post-selected mean reading: for a ±1-eigenvalue
//! observable measured at strength ε,
//!
//!   mean(standard readout)  = 2ε·Re(O_w) / (1 + ε²|O_w|²)
//!   mean(conjugate readout) = 2ε·Im(O_w) / (1 + ε²|O_w|²)
//!
//! exactly, at every strength. Dividing the empirical mean by 2ε therefore
//! estimates Re/Im(O_w) with a bias of order ε²; the estimator below does
//! that, with a binomial standard error smoothed so it never degenerates
//! to zero on a finite sample.

use crate::error::{Error, Result};
use crate::protocols::{FinalOutcome, RunLog};
use crate::qstate::{inner, Ket, Operator, C64};
use crate::unsharp::{couple, PointerOutcome, Readout, UnsharpCoupling};

/// O_w = ⟨post|O|pre⟩ / ⟨post|pre⟩. Inputs need not be normalized; the
/// ratio is invariant under nonzero rescaling of either state. Orthogonal
/// pre/post leave the value undefined.
pub fn weak_value(pre: &Ket, post: &Ket, observable: &Operator) -> Result<C64> {
    if !observable.is_hermitian() {
        return Err(Error::NotHermitian(0.0));
    }
    let denom = inner(post, pre)?;
    let scale = pre.norm() * post.norm();
    if scale < 1e-300 {
        return Err(Error::ZeroVector);
    }
    if denom.norm() <= 1e-12 * scale {
        return Err(Error::OrthogonalPrePost);
    }
    let numer = inner(post, &observable.apply(pre)?)?;
    Ok(numer / denom)
}

/// Exact mean of the ±1-coded pointer reading, conditioned on the system
/// post-selecting onto `post`, for a single unsharp step of `observable`
/// at the given coupling, read out in `readout`.
pub fn exact_conditional_pointer_mean(
    pre: &Ket,
    post: &Ket,
    observable: &Operator,
    c: &UnsharpCoupling,
    readout: Readout,
) -> Result<f64> {
    let joint = couple(pre, observable, c)?;
    let post = post.normalized()?;
    let (pointer_amps, p_post) = joint.project_factor(1, &post)?;
    if p_post < 1e-30 {
        return Err(Error::ImpossiblePostselection);
    }
    let phi = Ket::new(pointer_amps)?;
    let basis = readout.basis();
    let p_up = inner(&basis[0], &phi)?.norm_sqr();
    let p_down = inner(&basis[1], &phi)?.norm_sqr();
    Ok((p_up - p_down) / p_post)
}

/// A weak-value estimate read off a Monte-Carlo run: real part from the
/// first standard-readout step, imaginary part from the first
/// conjugate-readout step when one exists.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakValueEstimate {
    pub re: f64,
    pub re_stderr: f64,
    pub im: Option<f64>,
    pub im_stderr: Option<f64>,
    /// Post-selected trials the estimate is built from.
    pub postselected: u64,
    /// Strength of the standard-readout step that produced `re`.
    pub epsilon: f64,
}

/// Smoothed success probability (k + 1/2)/(n + 1); keeps the variance
/// estimate positive even when every reading agreed.
fn jeffreys(k: u64, n: u64) -> f64 {
    (k as f64 + 0.5) / (n as f64 + 1.0)
}

fn step_mean(step: usize, selected: &[&crate::protocols::RunRecord]) -> (f64, f64) {
    let n = selected.len() as u64;
    let k = selected
        .iter()
        .filter(|r| r.pointer_outcomes[step] == PointerOutcome::U)
        .count() as u64;
    let mean = (2.0 * k as f64 - n as f64) / n as f64;
    let p = jeffreys(k, n);
    let stderr_mean = 2.0 * (p * (1.0 - p) / n as f64).sqrt();
    (mean, stderr_mean)
}

/// Estimate the weak value from the `Plus`-post-selected records of a run:
/// divide the mean ±1 reading of the first standard-readout step by 2ε,
/// and likewise for the first conjugate-readout step to get the imaginary
/// part. The estimate converges at the Monte-Carlo 1/√N rate to the exact
/// conditional mean over 2ε, which differs from Re(O_w) by O(ε²).
pub fn estimate_weak_value(log: &RunLog) -> Result<WeakValueEstimate> {
    let steps = log.config.steps();
    let re_step = steps
        .iter()
        .position(|s| s.readout == Readout::Standard)
        .ok_or(Error::NoStandardReadout)?;
    let im_step = steps.iter().position(|s| s.readout == Readout::Conjugate);

    let eps = steps[re_step].coupling.epsilon();
    if eps <= 0.0 {
        return Err(Error::ZeroStrengthCoupling);
    }

    let selected: Vec<&crate::protocols::RunRecord> = log
        .records
        .iter()
        .filter(|r| r.final_outcome == FinalOutcome::Plus)
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptySubEnsemble);
    }

    let (mean_re, se_re) = step_mean(re_step, &selected);
    let mut est = WeakValueEstimate {
        re: mean_re / (2.0 * eps),
        re_stderr: se_re / (2.0 * eps),
        im: None,
        im_stderr: None,
        postselected: selected.len() as u64,
        epsilon: eps,
    };
    if let Some(idx) = im_step {
        let eps_im = steps[idx].coupling.epsilon();
        if eps_im <= 0.0 {
            return Err(Error::ZeroStrengthCoupling);
        }
        let (mean_im, se_im) = step_mean(idx, &selected);
        est.im = Some(mean_im / (2.0 * eps_im));
        est.im_stderr = Some(se_im / (2.0 * eps_im));
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{run_pointer_first, ExperimentConfig, MeasurementOrder, WeakStep};
    use crate::qstate::{spin_observable, BlochDirection};
    use crate::unsharp::kraus_ops;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn x_plus() -> Ket {
        BlochDirection::x().plus_eigenket()
    }

    fn sz() -> Operator {
        spin_observable(&BlochDirection::z())
    }

    #[test]
    fn weak_value_of_z_between_x_and_z_is_one() {
        let w = weak_value(&x_plus(), &Ket::basis_state(2, 0).unwrap(), &sz()).unwrap();
        assert_abs_diff_eq!(w.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn weak_value_of_z_between_x_and_y_is_imaginary_unit() {
        let y_plus = BlochDirection::y().plus_eigenket();
        let w = weak_value(&x_plus(), &y_plus, &sz()).unwrap();
        assert_abs_diff_eq!(w.re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.im, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn weak_value_half_angle_form_in_xz_plane() {
        // Post-selecting onto the +1 eigenket of a direction tilted by t
        // from z (in the xz-plane) gives O_w(σ_z) = tan(π/4 − t/2); it
        // blows up as the post-selection approaches |x−⟩ (t → 3π/2 side).
        for &t in &[0.4f64, 1.0, 2.0, 2.8] {
            let post = BlochDirection::new(t.sin(), 0.0, t.cos())
                .unwrap()
                .plus_eigenket();
            let w = weak_value(&x_plus(), &post, &sz()).unwrap();
            let want = (std::f64::consts::FRAC_PI_4 - t / 2.0).tan();
            assert_abs_diff_eq!(w.re, want, epsilon = 1e-10);
            assert_abs_diff_eq!(w.im, 0.0, epsilon = 1e-10);
        }
        // Weak-value amplification: post-selection tilted delta away from
        // |x−⟩ gives O_w = −cot(delta/2), far outside the ±1 eigenvalue
        // range even though pre and post stay non-orthogonal.
        let delta = 0.01f64;
        let post = BlochDirection::new(-delta.cos(), 0.0, -delta.sin())
            .unwrap()
            .plus_eigenket();
        let w = weak_value(&x_plus(), &post, &sz()).unwrap();
        assert_abs_diff_eq!(w.re, -1.0 / (delta / 2.0).tan(), epsilon = 1e-6);
        assert!(w.re.abs() > 100.0, "no amplification: {w}");
    }

    #[test]
    fn weak_value_rejects_orthogonal_selection() {
        let x_minus = BlochDirection::x().minus_eigenket();
        assert_eq!(
            weak_value(&x_plus(), &x_minus, &sz()).unwrap_err(),
            Error::OrthogonalPrePost
        );
    }

    #[test]
    fn exact_mean_known_values() {
        let c = UnsharpCoupling::new(0.8, 0.6).unwrap();
        // Real weak value 1: mean is exactly a² − b².
        let m = exact_conditional_pointer_mean(
            &x_plus(),
            &Ket::basis_state(2, 0).unwrap(),
            &sz(),
            &c,
            Readout::Standard,
        )
        .unwrap();
        assert_abs_diff_eq!(m, 0.28, epsilon = 1e-14);
        // Purely imaginary weak value: the standard mean vanishes and the
        // conjugate mean picks up the same a² − b².
        let y_plus = BlochDirection::y().plus_eigenket();
        let m0 = exact_conditional_pointer_mean(&x_plus(), &y_plus, &sz(), &c, Readout::Standard)
            .unwrap();
        assert_abs_diff_eq!(m0, 0.0, epsilon = 1e-14);
        let m1 = exact_conditional_pointer_mean(&x_plus(), &y_plus, &sz(), &c, Readout::Conjugate)
            .unwrap();
        assert_abs_diff_eq!(m1, 0.28, epsilon = 1e-14);
        // Sharp coupling with matched selection reads +1 every time.
        let sharp = exact_conditional_pointer_mean(
            &x_plus(),
            &Ket::basis_state(2, 0).unwrap(),
            &sz(),
            &UnsharpCoupling::sharp(),
            Readout::Standard,
        )
        .unwrap();
        assert_abs_diff_eq!(sharp, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn balanced_coupling_reads_zero_mean_for_any_selection() {
        let c = UnsharpCoupling::balanced();
        let posts = [
            Ket::basis_state(2, 0).unwrap(),
            BlochDirection::y().plus_eigenket(),
            BlochDirection::new(0.3, -0.7, 0.2).unwrap().plus_eigenket(),
        ];
        for post in &posts {
            for readout in [Readout::Standard, Readout::Conjugate] {
                let m =
                    exact_conditional_pointer_mean(&x_plus(), post, &sz(), &c, readout).unwrap();
                assert_abs_diff_eq!(m, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn balanced_coupling_cannot_postselect_orthogonally() {
        let r = exact_conditional_pointer_mean(
            &x_plus(),
            &BlochDirection::x().minus_eigenket(),
            &sz(),
            &UnsharpCoupling::balanced(),
            Readout::Standard,
        );
        assert_eq!(r.unwrap_err(), Error::ImpossiblePostselection);
    }

    #[test]
    fn exact_mean_agrees_with_independent_kraus_enumeration() {
        // Independent route: joint amplitudes ⟨readout_r ⊗ post| Ψ⟩ built
        // directly from the Kraus pair, never touching the joint-state
        // machinery the implementation uses.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut checked = 0;
        while checked < 200 {
            let dir = match BlochDirection::new(
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            ) {
                Ok(d) => d,
                Err(_) => continue,
            };
            let pre = match BlochDirection::new(
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            ) {
                Ok(d) => d.plus_eigenket(),
                Err(_) => continue,
            };
            let post = match BlochDirection::new(
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            ) {
                Ok(d) => d.plus_eigenket(),
                Err(_) => continue,
            };
            let c = UnsharpCoupling::from_epsilon(0.02 + 0.96 * rng.gen::<f64>()).unwrap();
            let obs = spin_observable(&dir);
            let (mu, md) = kraus_ops(&obs, &c).unwrap();
            // φ_o = ⟨post|M_o|pre⟩ is the pointer amplitude vector.
            let phi_u = inner(&post, &mu.apply(&pre).unwrap()).unwrap();
            let phi_d = inner(&post, &md.apply(&pre).unwrap()).unwrap();
            let p_post = phi_u.norm_sqr() + phi_d.norm_sqr();
            if p_post < 1e-6 {
                continue;
            }
            for readout in [Readout::Standard, Readout::Conjugate] {
                let basis = readout.basis();
                let amp_plus = basis[0].amp(0).conj() * phi_u + basis[0].amp(1).conj() * phi_d;
                let amp_minus = basis[1].amp(0).conj() * phi_u + basis[1].amp(1).conj() * phi_d;
                let want = (amp_plus.norm_sqr() - amp_minus.norm_sqr()) / p_post;
                let got = exact_conditional_pointer_mean(&pre, &post, &obs, &c, readout).unwrap();
                assert!(
                    (got - want).abs() <= 1e-12,
                    "kraus oracle disagrees: {got} vs {want}"
                );
            }
            checked += 1;
        }
    }

    #[test]
    fn exact_mean_obeys_the_closed_form_response_law() {
        // mean = 2ε·Re(O_w)/(1 + ε²|O_w|²) exactly, and the conjugate
        // readout swaps Re for Im.
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut checked = 0;
        while checked < 200 {
            let mk = |rng: &mut ChaCha8Rng| {
                BlochDirection::new(
                    rng.gen::<f64>() - 0.5,
                    rng.gen::<f64>() - 0.5,
                    rng.gen::<f64>() - 0.5,
                )
            };
            let (Ok(dir), Ok(pre_d), Ok(post_d)) = (mk(&mut rng), mk(&mut rng), mk(&mut rng))
            else {
                continue;
            };
            let pre = pre_d.plus_eigenket();
            let post = post_d.plus_eigenket();
            let obs = spin_observable(&dir);
            let w = match weak_value(&pre, &post, &obs) {
                Ok(w) => w,
                Err(_) => continue,
            };
            if w.norm() > 1e3 {
                continue;
            }
            for &eps in &[0.02, 0.1, 0.5, 1.0] {
                let c = UnsharpCoupling::from_epsilon(eps).unwrap();
                let denom = 1.0 + eps * eps * w.norm_sqr();
                let re = exact_conditional_pointer_mean(&pre, &post, &obs, &c, Readout::Standard)
                    .unwrap();
                assert!(
                    (re - 2.0 * eps * w.re / denom).abs() <= 1e-12,
                    "standard response law broken: {re} vs {}",
                    2.0 * eps * w.re / denom
                );
                let im = exact_conditional_pointer_mean(&pre, &post, &obs, &c, Readout::Conjugate)
                    .unwrap();
                assert!(
                    (im - 2.0 * eps * w.im / denom).abs() <= 1e-12,
                    "conjugate response law broken: {im} vs {}",
                    2.0 * eps * w.im / denom
                );
            }
            checked += 1;
        }
    }

    fn estimation_config(
        eps: f64,
        post_dir: BlochDirection,
        trials: u64,
        seed: u64,
    ) -> ExperimentConfig {
        let c = UnsharpCoupling::from_epsilon(eps).unwrap();
        ExperimentConfig::new(
            &x_plus(),
            vec![
                WeakStep::standard(BlochDirection::z(), c),
                WeakStep {
                    direction: BlochDirection::z(),
                    coupling: c,
                    readout: Readout::Conjugate,
                },
            ],
            post_dir,
            MeasurementOrder::PointerFirst,
            trials,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn estimator_recovers_real_weak_value_within_error_bars() {
        let config = estimation_config(0.1, BlochDirection::z(), 60_000, 1234);
        let log = run_pointer_first(&config).unwrap();
        let est = estimate_weak_value(&log).unwrap();
        // O_w = 1: re should land within a few stderr of the exact
        // conditional mean over 2ε, which is 1/(1+ε²) here.
        let truth = 1.0 / (1.0 + 0.1f64 * 0.1);
        assert!(
            (est.re - truth).abs() <= 4.0 * est.re_stderr,
            "re = {} ± {}, want {truth}",
            est.re,
            est.re_stderr
        );
        assert!(est.re_stderr > 0.0 && est.re_stderr < 0.05);
        // Purely real weak value: im consistent with zero.
        let im = est.im.unwrap();
        assert!(im.abs() <= 4.0 * est.im_stderr.unwrap());
        assert!(est.postselected > 20_000);
        assert_abs_diff_eq!(est.epsilon, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn estimator_recovers_imaginary_weak_value() {
        // Post-select on |y+⟩: O_w(σ_z) = i, so re ≈ 0 and im ≈ 1/(1+ε²).
        let config = estimation_config(0.1, BlochDirection::y(), 60_000, 77);
        let log = run_pointer_first(&config).unwrap();
        let est = estimate_weak_value(&log).unwrap();
        let truth = 1.0 / (1.0 + 0.1f64 * 0.1);
        assert!(est.re.abs() <= 4.0 * est.re_stderr, "re = {}", est.re);
        let im = est.im.unwrap();
        assert!(
            (im - truth).abs() <= 4.0 * est.im_stderr.unwrap(),
            "im = {im}, want {truth}"
        );
    }

    #[test]
    fn strong_coupling_biases_the_estimate_as_predicted() {
        // At ε = 1 and O_w = 1 the response saturates: mean = 1, so the
        // estimator reads 1/2 with tiny error bars. The bias is real, not
        // a statistical fluke.
        let config = estimation_config(1.0, BlochDirection::z(), 20_000, 4321);
        let log = run_pointer_first(&config).unwrap();
        let est = estimate_weak_value(&log).unwrap();
        assert!(
            (est.re - 0.5).abs() <= 4.0 * est.re_stderr + 1e-9,
            "re = {}",
            est.re
        );
        assert!(est.re_stderr < 5e-3);
    }

    #[test]
    fn estimator_error_paths() {
        let c = UnsharpCoupling::from_epsilon(0.2).unwrap();
        // No standard-readout step anywhere.
        let conj_only = ExperimentConfig::new(
            &x_plus(),
            vec![WeakStep {
                direction: BlochDirection::z(),
                coupling: c,
                readout: Readout::Conjugate,
            }],
            BlochDirection::z(),
            MeasurementOrder::PointerFirst,
            50,
            1,
        )
        .unwrap();
        let log = run_pointer_first(&conj_only).unwrap();
        assert_eq!(
            estimate_weak_value(&log).unwrap_err(),
            Error::NoStandardReadout
        );

        // Zero strength carries no signal.
        let balanced = ExperimentConfig::new(
            &x_plus(),
            vec![WeakStep::standard(
                BlochDirection::z(),
                UnsharpCoupling::balanced(),
            )],
            BlochDirection::z(),
            MeasurementOrder::PointerFirst,
            50,
            1,
        )
        .unwrap();
        let log = run_pointer_first(&balanced).unwrap();
        assert_eq!(
            estimate_weak_value(&log).unwrap_err(),
            Error::ZeroStrengthCoupling
        );

        // Empty post-selected ensemble: final direction +z but the chain
        // always lands in −z (pre = |z−⟩, sharp z step).
        let never_plus = ExperimentConfig::new(
            &Ket::basis_state(2, 1).unwrap(),
            vec![WeakStep::standard(
                BlochDirection::z(),
                UnsharpCoupling::sharp(),
            )],
            BlochDirection::z(),
            MeasurementOrder::PointerFirst,
            50,
            1,
        )
        .unwrap();
        let log = run_pointer_first(&never_plus).unwrap();
        assert_eq!(
            estimate_weak_value(&log).unwrap_err(),
            Error::EmptySubEnsemble
        );
    }

    #[test]
    fn individual_readings_are_signs_not_weak_values() {
        let config = estimation_config(0.05, BlochDirection::z(), 2_000, 8);
        let log = run_pointer_first(&config).unwrap();
        for r in &log.records {
            for o in &r.pointer_outcomes {
                assert!(o.sign().abs() == 1.0);
            }
        }
        let est = estimate_weak_value(&log).unwrap();
        // The estimate sits near 1, a value no single ±1 reading can take
        // after rescaling by 1/(2ε) = 10.
        assert!(est.re > 0.5, "estimate collapsed: {}", est.re);
    }

    proptest! {
        #[test]
        fn weak_value_is_scale_and_phase_invariant(
            scale_pre in 0.1f64..3.0, phase_pre in 0.0..std::f64::consts::TAU,
            scale_post in 0.1f64..3.0, phase_post in 0.0..std::f64::consts::TAU,
            nx in -1.0f64..1.0, ny in -1.0f64..1.0, nz in -1.0f64..1.0,
        ) {
            let dir = BlochDirection::new(nx, ny, nz);
            prop_assume!(dir.is_ok());
            let obs = spin_observable(&dir.unwrap());
            let pre = x_plus();
            let post = BlochDirection::new(0.2, 0.4, 0.6).unwrap().plus_eigenket();
            let w0 = weak_value(&pre, &post, &obs).unwrap();
            let pre2 = pre.scaled(C64::from_polar(scale_pre, phase_pre));
            let post2 = post.scaled(C64::from_polar(scale_post, phase_post));
            let w1 = weak_value(&pre2, &post2, &obs).unwrap();
            prop_assert!((w0 - w1).norm() <= 1e-12);
        }
    }
}
