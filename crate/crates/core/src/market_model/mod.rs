//! Simple-model seller game.
//!
//! Offers from the exemplar buyer are uniform on `[mu - sigma, mu + sigma]`.
//! The seller first guesses the offer mean on a three-point grid, lists at the
//! first-period price, learns the true offer distribution after one period and
//! then lists at the informed price until the home sells.

mod game;
mod moments;

pub use game::{
    blend, run_games, simulate_seller_game, simulate_seller_game_capped, GameSummary,
    MAX_PERIODS,
};
pub use moments::{
    exact_moments, expected_payoff, gamma_kappa, omega_coefficients, omega_exact, omega_kappa,
    omega_printed, payoff_variance, realized_delta, GameMoments,
};

use crate::error::{check_unit, domain, Result};

/// Buyer offer distribution `U[mu - sigma, mu + sigma]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfferModel {
    pub mu: f64,
    pub sigma: f64,
}

impl OfferModel {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(domain("mu", mu, "must be finite"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(domain("sigma", sigma, "must be positive"));
        }
        Ok(Self { mu, sigma })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.mu - self.sigma, self.mu + self.sigma)
    }

    /// Variance of the seller's valuation across guesses, `8 sigma^2 / 3`.
    pub fn sigma_e2(&self) -> f64 {
        8.0 * self.sigma * self.sigma / 3.0
    }

    pub fn sigma_e(&self) -> f64 {
        self.sigma_e2().sqrt()
    }

    /// The offer model whose valuation noise is `sigma_e`.
    pub fn from_sigma_e(mu: f64, sigma_e: f64) -> Result<Self> {
        Self::new(mu, sigma_e * (3.0f64 / 8.0).sqrt())
    }
}

/// Seller economics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SellerParams {
    /// Market participation cost per period.
    pub cost_c: f64,
    /// Cost coefficient in `c = kappa * sigma_e`.
    pub kappa: f64,
    /// CARA risk aversion.
    pub risk_aversion_a: f64,
    /// Rental flow per period.
    pub flow_r: f64,
    /// Discount factor. The simple-model simulator always uses 1.
    pub discount_gamma: f64,
}

impl SellerParams {
    /// Risk-neutral seller with cost `c`, no rental flow.
    pub fn with_cost(cost_c: f64) -> Self {
        Self {
            cost_c,
            kappa: 0.0,
            risk_aversion_a: 0.0,
            flow_r: 0.0,
            discount_gamma: 1.0,
        }
    }

    /// Seller whose cost is `kappa * sigma_e` for the given offers.
    pub fn from_kappa(offers: &OfferModel, kappa: f64) -> Self {
        Self {
            kappa,
            ..Self::with_cost(kappa * offers.sigma_e())
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cost_c >= 0.0) {
            return Err(domain("cost_c", self.cost_c, "must be non-negative"));
        }
        if !(self.kappa >= 0.0) {
            return Err(domain("kappa", self.kappa, "must be non-negative"));
        }
        if !(self.risk_aversion_a >= 0.0) {
            return Err(domain("risk_aversion_a", self.risk_aversion_a, "must be non-negative"));
        }
        if !(self.discount_gamma > 0.0 && self.discount_gamma <= 1.0) {
            return Err(domain("discount_gamma", self.discount_gamma, "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// The seller's guess of the offer mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SellerGuess {
    pub mu_tilde: f64,
}

impl SellerGuess {
    /// Guess offsets in units of `sigma`.
    pub const OFFSETS: [f64; 3] = [-2.0, 0.0, 2.0];
    pub const WEIGHT: f64 = 1.0 / 3.0;

    pub fn new(mu_tilde: f64) -> Self {
        Self { mu_tilde }
    }

    /// The three equally likely guesses for `offers`.
    pub fn support(offers: &OfferModel) -> [SellerGuess; 3] {
        Self::OFFSETS.map(|k| SellerGuess::new(offers.mu + k * offers.sigma))
    }
}

/// Result of one simulated listing spell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameOutcome {
    /// List price in the sale period; NaN when the game was truncated.
    pub sale_price: f64,
    pub periods_on_market: u32,
    /// Flow terms plus sale price.
    pub payoff: f64,
    pub sold: bool,
    /// The game hit the period cap without a sale.
    pub truncated: bool,
    /// The seller's valuation for the drawn guess.
    pub valuation: f64,
    pub first_list_price: f64,
}

pub(crate) fn check_cost(sigma: f64, cost_c: f64) -> Result<()> {
    if !(cost_c > 0.0) {
        return Err(domain("cost_c", cost_c, "must be positive"));
    }
    if cost_c > 2.0 * sigma {
        return Err(domain("cost_c", cost_c, "must not exceed 2 sigma"));
    }
    Ok(())
}

/// `P(y >= l)` under the uniform offer distribution.
pub fn sale_probability(list_price: f64, offers: &OfferModel) -> f64 {
    ((offers.mu + offers.sigma - list_price) / (2.0 * offers.sigma)).clamp(0.0, 1.0)
}

/// Optimal list price once the offer distribution is known: `mu + sigma - sqrt(2 c sigma)`.
pub fn informed_list_price(offers: &OfferModel, cost_c: f64) -> Result<f64> {
    check_cost(offers.sigma, cost_c)?;
    Ok(offers.mu + offers.sigma - (2.0 * cost_c * offers.sigma).sqrt())
}

/// First-period list price under the guess: `mu_tilde + 2 sigma - sqrt(2 c sigma)`.
pub fn first_period_list_price(guess: &SellerGuess, sigma: f64, cost_c: f64) -> Result<f64> {
    check_cost(sigma, cost_c)?;
    Ok(guess.mu_tilde + 2.0 * sigma - (2.0 * cost_c * sigma).sqrt())
}

/// Home value `mu + 2 sigma / 3 - sqrt(2 c sigma)`.
pub fn home_value(offers: &OfferModel, cost_c: f64) -> Result<f64> {
    check_cost(offers.sigma, cost_c)?;
    Ok(offers.mu + 2.0 * offers.sigma / 3.0 - (2.0 * cost_c * offers.sigma).sqrt())
}

/// Valuation blended with the ML price `z`.
pub fn seller_valuation(
    guess: &SellerGuess,
    sigma: f64,
    cost_c: f64,
    alpha: f64,
    ml_price: f64,
) -> Result<f64> {
    check_unit("alpha", alpha)?;
    check_cost(sigma, cost_c)?;
    let prior = guess.mu_tilde + 2.0 * sigma / 3.0 - (2.0 * cost_c * sigma).sqrt();
    Ok((1.0 - alpha) * prior + alpha * ml_price)
}
