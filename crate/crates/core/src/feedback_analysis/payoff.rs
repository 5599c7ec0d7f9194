use crate::error::{check_unit, domain, Result};
use crate::market_model::{gamma_kappa, omega_kappa};
use crate::ml_pricer::{true_error_variance, MlConfig};

/// CARA-style payoffs without the ML price and at the equilibrium reached from `alpha = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffComparison {
    pub pi_no_ml: f64,
    pub pi_equilibrium: f64,
    pub alpha_star: f64,
    pub gamma_kappa: f64,
    pub omega_kappa: f64,
}

/// `mu - sigma_e(alpha) Gamma - (a/2) sqrt(Omega sigma_e(alpha)^2 + alpha^2 sigma_z^2(alpha))`
/// with `sigma_e(alpha) = (1 - alpha) sigma_e`. At `alpha = 1` this is `mu - (a/2) sigma_z(1)`.
pub fn risk_averse_payoff(
    mu: f64,
    sigma_e2: f64,
    kappa: f64,
    a: f64,
    alpha: f64,
    cfg: &MlConfig,
) -> Result<f64> {
    check_unit("alpha", alpha)?;
    if !(sigma_e2 >= 0.0) {
        return Err(domain("sigma_e2", sigma_e2, "must be non-negative"));
    }
    if !(a >= 0.0) {
        return Err(domain("risk_aversion_a", a, "must be non-negative"));
    }
    let se = (1.0 - alpha) * sigma_e2.sqrt();
    let var = omega_kappa(kappa) * se * se + alpha * alpha * true_error_variance(cfg, alpha);
    Ok(mu - se * gamma_kappa(kappa) - 0.5 * a * var.sqrt())
}
