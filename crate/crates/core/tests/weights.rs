use approx::assert_relative_eq;
use proptest::prelude::*;
use subdiff_core::corrections::caputo_power_factor;
use subdiff_core::cq_weights::{
    b_coeffs, b_coeffs_by_division, binomial_coeffs, check_assumptions, convolve, omega_weights,
};
use subdiff_core::stepper::caputo_apply;
use subdiff_core::{CorrectionConfig, Family, GeneratingFunction, SchemeConfig};

fn families(alpha: f64) -> Vec<GeneratingFunction> {
    vec![
        GeneratingFunction::fbdf1(alpha).unwrap(),
        GeneratingFunction::fbdf2(alpha).unwrap(),
        GeneratingFunction::gngf2(alpha).unwrap(),
        GeneratingFunction::bn_theta(alpha, 0.3).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn binomial_inverse_pair(alpha in 0.05f64..0.95, n in 1usize..512) {
        let a = binomial_coeffs(alpha, n);
        let b = binomial_coeffs(-alpha, n);
        let c = convolve(&a, &b, n);
        prop_assert!((c.get(0) - 1.0).abs() < 1e-14);
        for k in 1..=n {
            prop_assert!(c.get(k).abs() < 1e-12, "k = {}: {}", k, c.get(k));
        }
    }

    #[test]
    fn b_closed_form_matches_division(alpha in 0.05f64..0.95, theta in 0.0f64..0.5) {
        let g = GeneratingFunction::bn_theta(alpha, theta).unwrap();
        let a = b_coeffs(&g, 200);
        let d = b_coeffs_by_division(&g, 200).unwrap();
        for k in 0..=200 {
            prop_assert!((a.get(k) - d.get(k)).abs() < 1e-12 * a.get(0).abs().max(1.0));
        }
    }

    #[test]
    fn assumptions_hold_for_bn_theta(alpha in 0.05f64..0.95, theta in 0.0f64..=0.5) {
        let g = GeneratingFunction::bn_theta(alpha, theta).unwrap();
        prop_assert!(check_assumptions(&g, 1000, 1e-12).passed());
    }
}

#[test]
fn omega_sums_vanish_at_one() {
    // omega(1) = 0 for every family; partial sums decay like N^-alpha
    for alpha in [0.3, 0.7] {
        for g in families(alpha) {
            let w = omega_weights(&g, 20000).unwrap();
            let half: f64 = w.as_slice()[..10000].iter().sum();
            let full: f64 = w.as_slice().iter().sum();
            let ratio = full / half;
            assert!((ratio - 2f64.powf(-alpha)).abs() < 1e-3, "{}: {ratio}", g.label());
        }
    }
}

#[test]
fn family_names_round_trip() {
    for f in [Family::Fbdf1, Family::Fbdf2, Family::Gngf2, Family::BnTheta, Family::CnLinear, Family::CnBinom]
    {
        assert_eq!(Family::parse(f.name()), Some(f));
    }
}

/// The corrected operator differentiates `t^sigma_k` exactly for `k <= m`.
#[test]
fn corrected_operator_is_exact_on_corrected_powers() {
    let n_max = 1024;
    let tau = 1.0 / n_max as f64;
    for alpha in [0.2, 0.5, 0.8] {
        for g in families(alpha) {
            for m in 0..=4 {
                let cfg = CorrectionConfig::multiples_of(alpha, m).unwrap();
                let scheme = SchemeConfig::new(g.clone(), cfg.clone(), tau, n_max).unwrap();
                let first = if m >= 2 { m + 1 } else { 1 };
                for &sigma in cfg.sigmas() {
                    let samples: Vec<Vec<f64>> =
                        (0..=n_max).map(|j| vec![(j as f64 * tau).powf(sigma)]).collect();
                    let factor = caputo_power_factor(sigma, alpha);
                    let mut worst: f64 = 0.0;
                    for n in first..=n_max {
                        let got = caputo_apply(&scheme, &samples, n).unwrap()[0];
                        let want = factor * (n as f64 * tau).powf(sigma - alpha);
                        worst = worst.max(((got - want) / want).abs());
                    }
                    assert!(
                        worst < 1e-9,
                        "{} alpha={alpha} m={m} sigma={sigma}: {worst:e}",
                        g.label()
                    );
                }
            }
        }
    }
}

#[test]
fn alpha_one_fbdf2_is_bdf2() {
    let g = GeneratingFunction::fbdf2(1.0).unwrap();
    let w = omega_weights(&g, 6).unwrap();
    let want = [1.5, -2.0, 0.5, 0.0, 0.0, 0.0, 0.0];
    for (k, v) in want.iter().enumerate() {
        assert_relative_eq!(w.get(k), *v, epsilon = 1e-14);
    }
}
