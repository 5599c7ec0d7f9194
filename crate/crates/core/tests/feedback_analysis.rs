use mlfeedback::feedback_analysis::{
    iterate_feedback, iterate_feedback_from, evaluate_conditions, risk_averse_payoff, solve_equilibria, IterationMode,
    Stability,
};
use mlfeedback::market_model::{gamma_kappa, omega_kappa, payoff_variance};
use mlfeedback::ml_pricer::{alpha_one, alpha_two, estimated_error_variance, true_error_variance, MlConfig};
use proptest::prelude::*;

fn config(n: u64, q: u64, ratio: f64, delta: f64, sigma_e2: f64) -> MlConfig {
    let mut c = MlConfig {
        n_training: n,
        q_clusters: q,
        feature_dim: 2,
        sigma_rw2: 0.0,
        sigma_v2: 0.0,
        h_scale: 0.0,
        delta,
        sigma_e2,
        exact_denominator: false,
    };
    c.sigma_rw2 = ratio * sigma_e2 - c.finite_sample();
    c
}

fn arb_config() -> impl Strategy<Value = MlConfig> {
    (1_000u64..200_000, 1u64..50, 0.05f64..12.0, 0.02f64..0.5, 0.5f64..50.0)
        .prop_map(|(n, q, ratio, delta, e2)| config(n, q, ratio.max(delta * q as f64 / n as f64 + 0.01), delta, e2))
}

fn arb_interior_config() -> impl Strategy<Value = MlConfig> {
    (1_000u64..200_000, 1u64..50, 4.05f64..20.0, 0.02f64..0.5, 0.5f64..50.0)
        .prop_map(|(n, q, ratio, delta, e2)| config(n, q, ratio, delta, e2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn true_error_grows_with_reliance(cfg in arb_config(), a in 0.001f64..=1.0) {
        prop_assert!(true_error_variance(&cfg, a) > true_error_variance(&cfg, 0.0));
    }

    #[test]
    fn estimate_crosses_truth_once(cfg in arb_config()) {
        let a1 = alpha_one(&cfg);
        prop_assert!(a1 > 0.0 && a1 < 1.0);
        for k in 0..=1000 {
            let a = k as f64 / 1000.0;
            let gap = estimated_error_variance(&cfg, a) - true_error_variance(&cfg, a);
            if a < a1 - 1e-9 {
                prop_assert!(gap > 0.0);
            } else if a > a1 + 1e-9 {
                prop_assert!(gap < 0.0);
            }
        }
    }

    #[test]
    fn estimate_falls_above_alpha_two(cfg in arb_config()) {
        let start = alpha_two(&cfg).max(0.0);
        let mut prev = estimated_error_variance(&cfg, start);
        for k in 1..=1000 {
            let a = start + (1.0 - start) * k as f64 / 1000.0;
            let cur = estimated_error_variance(&cfg, a);
            prop_assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn interior_equilibria_respect_bounds(cfg in arb_interior_config()) {
        let eq = solve_equilibria(&cfg).unwrap();
        let interior: Vec<_> = eq.iter().filter(|e| e.alpha < 1.0).collect();
        prop_assert!(!interior.is_empty());
        let (a1, a2) = (alpha_one(&cfg), alpha_two(&cfg));
        for e in interior {
            prop_assert!(e.alpha > a1);
            prop_assert!(e.alpha > a2);
            prop_assert!(e.alpha < 2.0 / (1.0 + cfg.delta));
            prop_assert!(e.sigma_hat2 < e.sigma_z2_conf);
            let h = 1e-6;
            let slope = (estimated_error_variance(&cfg, e.alpha + h) - estimated_error_variance(&cfg, e.alpha - h)) / (2.0 * h);
            prop_assert!(slope < 0.0);
            prop_assert!(e.residual.abs() < 1e-10);
        }
        prop_assert_eq!(eq.last().unwrap().alpha, 1.0);
    }

    #[test]
    fn iteration_limits_are_enumerated(cfg in arb_config(), start in 0.0f64..1.0) {
        let path = iterate_feedback_from(&cfg, 1.0, IterationMode::FullMap, start, 10_000_000, 1e-14).unwrap();
        prop_assume!(path.converged);
        let eq = solve_equilibria(&cfg).unwrap();
        let hit = eq.iter().find(|e| (e.alpha - path.last.alpha).abs() < 1e-8);
        prop_assert!(hit.is_some(), "{} not among {:?}", path.last.alpha, eq);
        prop_assert!(hit.unwrap().stability != Stability::Unstable);
    }
}

#[test]
fn stable_roots_are_reached_by_iteration() {
    for ratio in [2.0, 5.0, 6.0, 9.0] {
        let cfg = config(50_000, 10, ratio, 1.0 / 6.0, 1.0);
        let eq = solve_equilibria(&cfg).unwrap();
        let first = iterate_feedback(&cfg, 1.0, IterationMode::FullMap, 10_000_000, 1e-14).unwrap();
        let stable: Vec<_> = eq.iter().filter(|e| e.stability == Stability::Stable).collect();
        assert!((first.last.alpha - stable[0].alpha).abs() < 1e-8);
        let top = iterate_feedback_from(&cfg, 1.0, IterationMode::FullMap, 0.999, 1000, 1e-14).unwrap();
        assert!((top.last.alpha - 1.0).abs() < 1e-8);
    }
}

#[test]
fn constant_base_limit_solves_its_cubic() {
    for k in [1.5, 3.0, 4.0, 6.0] {
        let cfg = config(10_000, 10, 2.0, 1.0 / 6.0, 1.0);
        let path = iterate_feedback(&cfg, 1.0, IterationMode::ConstantBase { sigma_hat2_at_zero: k }, 100_000_000, 1e-14).unwrap();
        let f = |a: f64| 1.0 / a - 1.0 - (1.0 - a).powi(2) * k;
        let (mut lo, mut hi) = (1e-9, 1.0 - 1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = if k < 4.0 { 1.0 } else { 0.5 * (lo + hi) };
        let tol = if k == 4.0 { 1e-3 } else { 1e-6 };
        assert!((path.last.alpha - root).abs() < tol, "k {k}: {} vs {root}", path.last.alpha);
    }
}

#[test]
fn rational_fixed_point_moderates_but_keeps_inflation() {
    let cfg = config(2_000, 40, 2.0, 1.0 / 6.0, 1.0);
    let path = iterate_feedback(&cfg, 1.0, IterationMode::Rational, 1_000_000, 1e-15).unwrap();
    let a = path.last.alpha;
    assert!((a - cfg.sigma_e2 / (cfg.sigma_e2 + true_error_variance(&cfg, a))).abs() < 1e-10);
    assert!(true_error_variance(&cfg, a) > true_error_variance(&cfg, 0.0));
    assert!(a < 1.0);
}

fn sign_flip(f: impl Fn(f64) -> f64) -> f64 {
    let h = 1e-7;
    let d = |a: f64| (f(a + h) - f(a - h)) / (2.0 * h);
    let grid: Vec<f64> = (1..1000).map(|k| k as f64 / 1000.0).collect();
    let k = grid.windows(2).position(|w| d(w[0]) <= 0.0 && d(w[1]) > 0.0).unwrap();
    grid[k + 1]
}

#[test]
fn variance_thresholds_are_where_derivatives_flip() {
    for (ratio, kappa) in [(1.0, 0.1), (2.0, 0.3), (0.5, 1.0)] {
        let cfg = MlConfig::limit(ratio, 1.0 / 6.0, 1.0);
        let r = evaluate_conditions(&cfg, 100.0, kappa, 1.0).unwrap();
        let sz = |a: f64| true_error_variance(&cfg, a);
        let valuation = |a: f64| (1.0 - a).powi(2) * cfg.sigma_e2 + a * a * sz(a);
        let price = |a: f64| cfg.delta * (1.0 - a).powi(2) * cfg.sigma_e2 + a * a * sz(a);
        let payoff = |a: f64| payoff_variance(cfg.sigma_e2.sqrt(), kappa, a, sz(a));
        for (f, t) in [
            (&valuation as &dyn Fn(f64) -> f64, r.variance_thresholds[0]),
            (&price, r.variance_thresholds[1]),
            (&payoff, r.variance_thresholds[2]),
        ] {
            assert!((sign_flip(f) - t).abs() <= 1e-3 + 1e-9, "flip {} vs {t}", sign_flip(f));
        }
        assert!((r.variance_thresholds[2] - 1.0 / (1.0 + ratio / omega_kappa(kappa))).abs() < 1e-12);
    }
}

fn tight_cfg(ratio: f64) -> MlConfig {
    MlConfig::limit(ratio, 1.0 / 6.0, 4.0)
}

#[test]
fn full_reliance_can_hurt_risk_averse_sellers() {
    let (kappa, a, delta) = (0.1, 4.0, 1.0 / 6.0);
    let lhs = (omega_kappa(kappa).sqrt() + 2.0 * gamma_kappa(kappa) / a).powi(2);
    assert!(lhs + delta < 4.0);
    let cfg = MlConfig::limit(0.5 * (lhs + 4.0 - delta), delta, 4.0);
    let r = evaluate_conditions(&cfg, 100.0, kappa, a).unwrap();
    assert_eq!(r.full_reliance_hurts, Some(true));
    assert!(r.viability_holds);
    let tight = evaluate_conditions(&MlConfig::limit(0.9 * lhs, delta, 4.0), 100.0, kappa, a).unwrap();
    assert_eq!(tight.full_reliance_hurts, Some(false));
    assert!(risk_averse_payoff(100.0, 4.0, kappa, a, 1.0, &tight_cfg(0.9 * lhs)).unwrap()
        > risk_averse_payoff(100.0, 4.0, kappa, a, 0.0, &tight_cfg(0.9 * lhs)).unwrap());
    let p0 = risk_averse_payoff(100.0, 4.0, kappa, a, 0.0, &cfg).unwrap();
    let p1 = risk_averse_payoff(100.0, 4.0, kappa, a, 1.0, &cfg).unwrap();
    assert!(p1 < p0);
    assert!(r.unique_full_reliance);
    assert!(r.band_holds);
    assert!((r.payoff.alpha_star - 1.0).abs() < 1e-6);
    assert!(r.payoff.pi_equilibrium < r.payoff.pi_no_ml);
}

#[test]
fn risk_neutral_payoff_rises_with_reliance() {
    let cfg = config(5_000, 20, 2.0, 1.0 / 6.0, 4.0);
    let r = evaluate_conditions(&cfg, 100.0, 0.3, 0.0).unwrap();
    assert_eq!(r.full_reliance_hurts, None);
    let vals: Vec<f64> = (0..100)
        .map(|k| risk_averse_payoff(100.0, 4.0, 0.3, 0.0, k as f64 / 99.0, &cfg).unwrap())
        .collect();
    assert!(vals.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn payoff_non_increasing_in_risk_aversion() {
    let cfg = config(5_000, 20, 5.0, 1.0 / 6.0, 4.0);
    let pis: Vec<f64> = [0.0, 0.5, 1.0]
        .iter()
        .map(|&a| evaluate_conditions(&cfg, 100.0, 0.3, a).unwrap().payoff.pi_equilibrium)
        .collect();
    assert!(pis.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn worked_example_differs_between_maps() {
    let cfg = MlConfig::limit(3.5, 1.0 / 6.0, 1.0);
    let constant = iterate_feedback(&cfg, 1.0, IterationMode::ConstantBase { sigma_hat2_at_zero: 4.0 }, 100_000_000, 1e-14).unwrap();
    let full = iterate_feedback(&cfg, 1.0, IterationMode::FullMap, 10_000_000, 1e-14).unwrap();
    assert!((constant.last.alpha - 0.5).abs() < 1e-6);
    assert!((full.last.alpha - 1.0).abs() < 1e-8);
    assert!((estimated_error_variance(&cfg, 0.0) - 3.5 - 1.0 / 6.0).abs() < 1e-9);
}

#[test]
fn lambda_lever_scales_reliance() {
    let cfg = config(5_000, 20, 2.0, 1.0 / 6.0, 1.0);
    let zero = iterate_feedback(&cfg, 0.0, IterationMode::FullMap, 10, 1e-12).unwrap();
    assert_eq!(zero.last.alpha, 0.0);
    let lo = iterate_feedback(&cfg, 0.4, IterationMode::FullMap, 1_000_000, 1e-14).unwrap();
    let hi = iterate_feedback(&cfg, 0.9, IterationMode::FullMap, 1_000_000, 1e-14).unwrap();
    assert!(lo.last.alpha < hi.last.alpha);
    assert!(lo.last.sigma_hat2 > hi.last.sigma_hat2);
}
