//! Exact game moments and the payoff coefficients Gamma and Omega.

use super::{check_cost, sale_probability, OfferModel, SellerGuess};
use crate::error::Result;

/// Exact moments of the simple-model game at `alpha = 0` and `gamma = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameMoments {
    pub mean_price: f64,
    pub var_price: f64,
    pub mean_valuation: f64,
    pub var_valuation: f64,
    pub mean_payoff: f64,
    pub var_payoff: f64,
    pub mean_periods: f64,
}

/// Moments computed from the three-guess mixture, the first-period sale
/// probability of each guess and the geometric informed stage.
pub fn exact_moments(offers: &OfferModel, cost_c: f64, flow_r: f64) -> Result<GameMoments> {
    check_cost(offers.sigma, cost_c)?;
    let (mu, sigma) = (offers.mu, offers.sigma);
    let root = (2.0 * cost_c * sigma).sqrt();
    let informed = mu + sigma - root;
    let s = sale_probability(informed, offers);
    let b = flow_r - cost_c;
    let later_price = informed;
    let later_mean_t = 1.0 + 1.0 / s;
    let later_var_t = (1.0 - s) / (s * s);

    let mut m = [0.0f64; 7];
    for k in SellerGuess::OFFSETS {
        let guess = mu + k * sigma;
        let first = guess + 2.0 * sigma - root;
        let p1 = sale_probability(first, offers);
        let val = guess + 2.0 * sigma / 3.0 - root;
        let w = SellerGuess::WEIGHT;

        let pay1 = b + first;
        let pay2_mean = b * later_mean_t + later_price;
        let pay2_sq = pay2_mean * pay2_mean + b * b * later_var_t;

        m[0] += w * (p1 * first + (1.0 - p1) * later_price);
        m[1] += w * (p1 * first * first + (1.0 - p1) * later_price * later_price);
        m[2] += w * val;
        m[3] += w * val * val;
        m[4] += w * (p1 * pay1 + (1.0 - p1) * pay2_mean);
        m[5] += w * (p1 * pay1 * pay1 + (1.0 - p1) * pay2_sq);
        m[6] += w * (p1 + (1.0 - p1) * later_mean_t);
    }
    Ok(GameMoments {
        mean_price: m[0],
        var_price: m[1] - m[0] * m[0],
        mean_valuation: m[2],
        var_valuation: m[3] - m[2] * m[2],
        mean_payoff: m[4],
        var_payoff: m[5] - m[4] * m[4],
        mean_periods: m[6],
    })
}

/// Exact `Var[p] / Var[v~]` of the game; independent of `mu`.
pub fn realized_delta(sigma: f64, cost_c: f64) -> Result<f64> {
    let m = exact_moments(&OfferModel { mu: 0.0, sigma }, cost_c, 0.0)?;
    Ok(m.var_price / m.var_valuation)
}

/// `Gamma(kappa) = kappa + (5/3)(3/2)^(1/4) sqrt(kappa) - (1/3)(3/2)^(1/2)`.
pub fn gamma_kappa(kappa: f64) -> f64 {
    kappa + (5.0 / 3.0) * 1.5f64.powf(0.25) * kappa.sqrt() - 1.5f64.sqrt() / 3.0
}

/// Expected payoff `mu - Gamma(kappa) sigma_e`.
pub fn expected_payoff(mu: f64, sigma_e: f64, kappa: f64) -> f64 {
    mu - gamma_kappa(kappa) * sigma_e
}

/// `beta_0..beta_3` of `Omega(kappa) = b0 + b1 sqrt(kappa) + b2 kappa + b3 kappa^(3/2)`.
///
/// They come from the payoff variance with the low guess selling in the first
/// period and the other guesses selling at the informed price,
/// `(2/9)(sigma - sqrt(2 c sigma))^2 + (2/3)(2 c sigma - c sqrt(2 c sigma))`,
/// evaluated at `sigma = sqrt(3/8) sigma_e`, `c = kappa sigma_e`.
pub fn omega_coefficients() -> [f64; 4] {
    let a = (3.0f64 / 8.0).sqrt();
    let b = 2.0f64.sqrt() * a.sqrt();
    [
        2.0 / 9.0 * a * a,
        -4.0 / 9.0 * a * b,
        2.0 / 9.0 * b * b + 4.0 / 3.0 * a,
        -2.0 / 3.0 * b,
    ]
}

/// Normalised payoff variance `Omega(kappa)` used by the payoff analytics.
pub fn omega_kappa(kappa: f64) -> f64 {
    let [b0, b1, b2, b3] = omega_coefficients();
    let r = kappa.sqrt();
    b0 + b1 * r + b2 * kappa + b3 * kappa * r
}

/// The payoff-variance expression exactly as printed, normalised by `sigma_e^2`.
///
/// Kept only to report how far it sits from the simulated variance.
pub fn omega_printed(kappa: f64) -> f64 {
    let g1 = 1.5f64.sqrt() / 3.0;
    let g2 = (5.0 / 3.0) * 1.5f64.powf(0.25);
    let sigma = (3.0f64 / 8.0).sqrt();
    let c = kappa;
    let cs = (c * sigma).sqrt();
    let s2 = 2.0f64.sqrt();
    let low = -g1 * sigma + (g2 - s2) * cs;
    let high = (1.0 - g1).powi(2) * sigma * sigma + 8.0 * g2 * g2 * c * sigma
        - 2.0 * s2 * g2 * (1.0 - g1) * sigma * cs
        - c * (2.0 * c * sigma).sqrt()
        + 2.0 * c * sigma;
    low * low / 3.0 + 2.0 / 3.0 * high
}

/// Exact normalised payoff variance of the simulated game; needs `kappa <= 2 sqrt(3/8)`.
pub fn omega_exact(kappa: f64) -> Result<f64> {
    let o = OfferModel::from_sigma_e(0.0, 1.0)?;
    Ok(exact_moments(&o, kappa, 0.0)?.var_payoff)
}

/// `Var[pi] = Omega(kappa)(1 - alpha)^2 sigma_e^2 + alpha^2 sigma_z^2(alpha)`.
pub fn payoff_variance(sigma_e: f64, kappa: f64, alpha: f64, sigma_z2_conf: f64) -> f64 {
    let w = 1.0 - alpha;
    omega_kappa(kappa) * w * w * sigma_e * sigma_e + alpha * alpha * sigma_z2_conf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_points() {
        assert!((gamma_kappa(0.04)).abs() < 1e-3);
        assert!((gamma_kappa(0.04) - 0.000_646).abs() < 1e-5);
        assert!((gamma_kappa(1.0) - 2.436_22).abs() < 1e-4);
        assert!((gamma_kappa(0.0) + 0.408_248_29).abs() < 1e-8);
    }

    #[test]
    fn omega_polynomial_matches_its_definition() {
        for kappa in [0.01, 0.1, 0.3, 0.7, 1.0, 1.2] {
            let sigma = (3.0f64 / 8.0).sqrt();
            let r = (2.0 * kappa * sigma).sqrt();
            let direct = 2.0 / 9.0 * (sigma - r).powi(2) + 2.0 / 3.0 * (2.0 * kappa * sigma - kappa * r);
            assert!((omega_kappa(kappa) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_at_half_sigma_cost() {
        let o = OfferModel::new(100.0, 8.0).unwrap();
        let m = exact_moments(&o, 4.0, 0.0).unwrap();
        assert!((m.mean_price - 97.333_333_333_333).abs() < 1e-9);
        assert!((m.var_price - 2.0 * 64.0 / 9.0).abs() < 1e-9);
        assert!((m.var_valuation - 8.0 * 64.0 / 3.0).abs() < 1e-9);
        assert!((realized_delta(8.0, 4.0).unwrap() - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_are_exact_at_half_sigma_cost() {
        let o = OfferModel::from_sigma_e(100.0, 10.0).unwrap();
        let c = o.sigma / 2.0;
        let kappa = c / 10.0;
        let m = exact_moments(&o, c, 0.0).unwrap();
        assert!((m.mean_payoff - expected_payoff(100.0, 10.0, kappa)).abs() < 1e-9);
        assert!((m.var_payoff / 100.0 - omega_kappa(kappa)).abs() < 1e-12);
        assert!((omega_exact(kappa).unwrap() - omega_kappa(kappa)).abs() < 1e-12);
    }
}
