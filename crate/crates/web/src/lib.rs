//! Browser bindings for the interactive demo page in `www/`.
//!
//! Each export returns a flat `Float64Array`; the page documents the layout.

use mlfeedback::feedback_analysis::{iterate_feedback, solve_fixed_points, IterationMode, Stability};
use mlfeedback::market_model::{
    expected_payoff, gamma_kappa, home_value, informed_list_price, omega_kappa, sale_probability, OfferModel,
};
use mlfeedback::ml_pricer::MlConfig;
use wasm_bindgen::prelude::*;

fn text(e: mlfeedback::Error) -> String {
    e.to_string()
}

/// `[v, l2, P(sale | l2), sigma_e^2, kappa, Gamma, Omega, E[pi] at alpha]` for offers on `[mu - sigma, mu + sigma]`.
#[wasm_bindgen]
pub fn closed_forms(mu: f64, sigma: f64, cost_c: f64, alpha: f64) -> Result<Vec<f64>, String> {
    let offers = OfferModel::new(mu, sigma).map_err(text)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(format!("alpha = {alpha} must lie in [0, 1]"));
    }
    let l2 = informed_list_price(&offers, cost_c).map_err(text)?;
    let kappa = cost_c / offers.sigma_e();
    Ok(vec![
        home_value(&offers, cost_c).map_err(text)?,
        l2,
        sale_probability(l2, &offers),
        offers.sigma_e2(),
        kappa,
        gamma_kappa(kappa),
        omega_kappa(kappa),
        expected_payoff(mu, (1.0 - alpha) * offers.sigma_e(), kappa),
    ])
}

fn stability_code(s: Stability) -> f64 {
    match s {
        Stability::Stable => 1.0,
        Stability::Unstable => -1.0,
        Stability::Neutral => 0.0,
    }
}

/// Equilibria at error ratio `sigma_z^2 / sigma_e^2`, as triples `[alpha, map slope, stability]`
/// with stability 1 (stable), -1 (unstable) or 0 (neutral).
#[wasm_bindgen]
pub fn equilibria(ratio: f64, delta: f64, lambda: f64) -> Result<Vec<f64>, String> {
    if !(ratio >= 0.0) {
        return Err(format!("ratio = {ratio} must be non-negative"));
    }
    let cfg = MlConfig::limit(ratio, delta, 1.0);
    let points = solve_fixed_points(&cfg, lambda, IterationMode::FullMap).map_err(text)?;
    Ok(points
        .iter()
        .flat_map(|e| [e.alpha, e.map_slope, stability_code(e.stability)])
        .collect())
}

/// Reliance after each of `steps` iterations from zero. A positive `base_ratio`
/// selects the constant-base map with `sigma_hat^2(0) = base_ratio sigma_e^2`.
#[wasm_bindgen]
pub fn feedback_path(ratio: f64, delta: f64, base_ratio: f64, steps: u32) -> Result<Vec<f64>, String> {
    if !(ratio >= 0.0) {
        return Err(format!("ratio = {ratio} must be non-negative"));
    }
    let cfg = MlConfig::limit(ratio, delta, 1.0);
    let mode = if base_ratio > 0.0 {
        IterationMode::ConstantBase {
            sigma_hat2_at_zero: base_ratio,
        }
    } else {
        IterationMode::FullMap
    };
    let path = iterate_feedback(&cfg, 1.0, mode, u64::from(steps.max(1)), 1e-15).map_err(text)?;
    Ok(path.states.iter().map(|s| s.alpha).collect())
}
