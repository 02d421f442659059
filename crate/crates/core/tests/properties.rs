use proptest::prelude::*;

use wgini::gini::{cw_value, lambda_w_sample, pearson_value};
use wgini::specfun::{hyp_pfq, ln_gamma, reg_inc_beta, HypergeometricSpec};
use wgini::wipm::{self, Orientation, Portfolio};
use wgini::WeightFunction;

fn weights() -> Vec<WeightFunction> {
    vec![
        WeightFunction::identity(),
        WeightFunction::power(2.0).unwrap(),
        WeightFunction::power(0.5).unwrap(),
        WeightFunction::beta_cdf(2.0, 3.0).unwrap(),
        WeightFunction::dual_power(1.5).unwrap(),
    ]
}

/// Paired columns with deliberate ties (values on a coarse grid half the time).
fn paired(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3..max_len).prop_flat_map(|n| {
        let col = || {
            prop_oneof![
                prop::collection::vec(-50.0..50.0f64, n),
                prop::collection::vec((-5i32..5).prop_map(|k| k as f64), n),
            ]
        };
        (col(), col())
    })
}

fn varies(v: &[f64]) -> bool {
    v.iter().any(|&x| x != v[0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn inc_beta_reflection(t in 0.001..0.999f64, a in 0.1..8.0f64, b in 0.1..8.0f64) {
        let l = reg_inc_beta(t, a, b).unwrap();
        let r = 1.0 - reg_inc_beta(1.0 - t, b, a).unwrap();
        prop_assert!((l - r).abs() < 1e-10, "{l} vs {r}");
    }

    #[test]
    fn inc_beta_power_reduction(t in 0.0..1.0f64, a in 0.05..10.0f64) {
        let v = reg_inc_beta(t, a, 1.0).unwrap();
        prop_assert!((v - t.powf(a)).abs() < 1e-10);
    }

    #[test]
    fn inc_beta_is_monotone(t in 0.0..0.99f64, dt in 0.0..0.01f64, a in 0.2..5.0f64, b in 0.2..5.0f64) {
        prop_assert!(reg_inc_beta(t, a, b).unwrap() <= reg_inc_beta(t + dt, a, b).unwrap() + 1e-15);
    }

    #[test]
    fn gauss_summation(a in 0.1..3.0f64, b in 0.1..3.0f64, h in 0.75..4.0f64) {
        let c = a + b + h;
        let spec = HypergeometricSpec::new(vec![a, b], vec![c], 1.0).unwrap();
        let got = hyp_pfq(&spec, 1e-12).unwrap();
        let want = (ln_gamma(c).unwrap() + ln_gamma(c - a - b).unwrap()
            - ln_gamma(c - a).unwrap() - ln_gamma(c - b).unwrap()).exp();
        prop_assert!((got - want).abs() < 1e-8 * want, "{got} vs {want}");
    }

    #[test]
    fn parameter_cancellation(a in 0.1..3.0f64, b in 0.1..3.0f64, c in 0.2..5.0f64, d in 0.5..6.0f64, z in -0.9..0.9f64) {
        let three = HypergeometricSpec::new(vec![a, b, c], vec![d, c], z).unwrap();
        let two = HypergeometricSpec::new(vec![a, b], vec![d], z).unwrap();
        let l = hyp_pfq(&three, 1e-13).unwrap();
        let r = hyp_pfq(&two, 1e-13).unwrap();
        prop_assert!((l - r).abs() < 1e-10 * r.abs().max(1.0), "{l} vs {r}");
    }

    #[test]
    fn weights_are_monotone_on_unit_interval(t in 0.0..0.999f64, dt in 0.0..0.001f64) {
        for w in weights() {
            prop_assert!(w.eval(t).unwrap() <= w.eval(t + dt).unwrap() + 1e-15, "{w}");
        }
    }

    #[test]
    fn self_correlation_is_exactly_one((xs, _) in paired(200)) {
        prop_assume!(varies(&xs));
        for w in weights() {
            prop_assert_eq!(cw_value(&xs, &xs, &w).unwrap(), 1.0);
        }
    }

    #[test]
    fn antithetic_correlation_is_minus_lambda((xs, _) in paired(200)) {
        prop_assume!(varies(&xs));
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        for w in weights() {
            prop_assert_eq!(cw_value(&xs, &neg, &w).unwrap(), -lambda_w_sample(&xs, &w).unwrap());
        }
        prop_assert_eq!(cw_value(&xs, &neg, &WeightFunction::identity()).unwrap(), -1.0);
    }

    #[test]
    fn bounds_hold((xs, ys) in paired(200)) {
        prop_assume!(varies(&xs));
        for w in weights() {
            let c = cw_value(&xs, &ys, &w).unwrap();
            let lam = lambda_w_sample(&xs, &w).unwrap();
            prop_assert!(c <= 1.0 + 1e-12, "{w}: {c}");
            prop_assert!(c >= -lam - 1e-12, "{w}: {c} < -{lam}");
        }
    }

    #[test]
    fn rank_invariance_in_y((xs, ys) in paired(200)) {
        prop_assume!(varies(&xs));
        let ty: Vec<f64> = ys.iter().map(|y| (y / 10.0).exp()).collect();
        let cube: Vec<f64> = ys.iter().map(|y| y * y * y + 3.0 * y).collect();
        for w in weights() {
            let c = cw_value(&xs, &ys, &w).unwrap();
            prop_assert_eq!(c, cw_value(&xs, &ty, &w).unwrap());
            prop_assert_eq!(c, cw_value(&xs, &cube, &w).unwrap());
        }
    }

    #[test]
    fn affine_invariance_in_x((xs, ys) in paired(200), a in -10.0..10.0f64, b in 0.1..10.0f64) {
        prop_assume!(varies(&xs));
        let ax: Vec<f64> = xs.iter().map(|x| a + b * x).collect();
        prop_assume!(varies(&ax));
        for w in weights() {
            let c = cw_value(&xs, &ys, &w).unwrap();
            let d = cw_value(&ax, &ys, &w).unwrap();
            prop_assert!((c - d).abs() < 1e-9, "{w}: {c} vs {d}");
        }
    }

    #[test]
    fn pearson_is_bounded((xs, ys) in paired(100)) {
        prop_assume!(varies(&xs) && varies(&ys));
        let r = pearson_value(&xs, &ys).unwrap();
        prop_assert!(r.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn allocation_is_additive(
        cols in (3usize..80).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0.0..100.0f64, n), 2..5)),
        dual in any::<bool>(),
    ) {
        let names = (0..cols.len()).map(|i| format!("r{i}")).collect();
        let p = Portfolio::new(names, cols).unwrap();
        prop_assume!(varies(&p.aggregate()));
        let orient = if dual { Orientation::Dual } else { Orientation::Survival };
        for w in weights() {
            let r = wipm::allocate_with(&p, &w, orient).unwrap();
            let sum: f64 = r.allocations.iter().map(|a| a.result.premium).sum();
            let scale = r.aggregate.premium.abs().max(1.0);
            prop_assert!((sum - r.aggregate.premium).abs() <= 1e-10 * scale);
            prop_assert!(r.additivity_gap.abs() <= 1e-10 * scale);
        }
    }
}
