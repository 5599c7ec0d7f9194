use rand::Rng;

use super::{check_cost, GameOutcome, OfferModel, SellerGuess, SellerParams};
use crate::error::{check_unit, Result};
use crate::rng::stream;
use crate::stats::RunningStats;

/// Period cap for one listing spell.
pub const MAX_PERIODS: u32 = 10_000;

const CHUNK: u64 = 1 << 14;

/// Offers and cost after blending with the ML price `z` at reliance `alpha < 1`.
///
/// The offer mean moves to `(1 - alpha) mu + alpha z` and the spread, the guess
/// offsets and the cost all scale by `1 - alpha`, so that the valuation of every
/// guess becomes `(1 - alpha) v(guess) + alpha z` and `c = kappa sigma_e(alpha)`.
pub fn blend(offers: &OfferModel, cost_c: f64, alpha: f64, z: f64) -> (OfferModel, f64) {
    let w = 1.0 - alpha;
    (
        OfferModel {
            mu: w * offers.mu + alpha * z,
            sigma: w * offers.sigma,
        },
        w * cost_c,
    )
}

/// One listing spell with the default period cap.
pub fn simulate_seller_game<R: Rng + ?Sized>(
    offers: &OfferModel,
    params: &SellerParams,
    alpha: f64,
    ml_price: f64,
    rng: &mut R,
) -> Result<GameOutcome> {
    simulate_seller_game_capped(offers, params, alpha, ml_price, MAX_PERIODS, rng)
}

/// One listing spell, truncated after `max_periods` unsold periods.
pub fn simulate_seller_game_capped<R: Rng + ?Sized>(
    offers: &OfferModel,
    params: &SellerParams,
    alpha: f64,
    ml_price: f64,
    max_periods: u32,
    rng: &mut R,
) -> Result<GameOutcome> {
    check_unit("alpha", alpha)?;
    params.validate()?;
    check_cost(offers.sigma, params.cost_c)?;
    let max_periods = max_periods.max(1);

    if alpha == 1.0 {
        return Ok(GameOutcome {
            sale_price: ml_price,
            periods_on_market: 1,
            payoff: params.flow_r + ml_price,
            sold: true,
            truncated: false,
            valuation: ml_price,
            first_list_price: ml_price,
        });
    }

    let (o, c) = blend(offers, params.cost_c, alpha, ml_price);
    let root = (2.0 * c * o.sigma).sqrt();
    let k = rng.random_range(0..3usize);
    let guess = o.mu + SellerGuess::OFFSETS[k] * o.sigma;
    let valuation = guess + 2.0 * o.sigma / 3.0 - root;
    let first = guess + 2.0 * o.sigma - root;
    let informed = o.mu + o.sigma - root;
    let low = o.mu - o.sigma;
    let width = 2.0 * o.sigma;
    let flow = params.flow_r - c;

    let mut list = first;
    for t in 1..=max_periods {
        let y = low + width * rng.random::<f64>();
        if y >= list {
            return Ok(GameOutcome {
                sale_price: list,
                periods_on_market: t,
                payoff: f64::from(t) * flow + list,
                sold: true,
                truncated: false,
                valuation,
                first_list_price: first,
            });
        }
        list = informed;
    }
    Ok(GameOutcome {
        sale_price: f64::NAN,
        periods_on_market: max_periods,
        payoff: f64::from(max_periods) * flow,
        sold: false,
        truncated: true,
        valuation,
        first_list_price: first,
    })
}

/// Moments collected over many simulated games.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GameSummary {
    pub games: u64,
    pub truncated: u64,
    /// Sale prices of games that sold.
    pub price: RunningStats,
    pub valuation: RunningStats,
    pub payoff: RunningStats,
    pub periods: RunningStats,
}

impl GameSummary {
    fn record(&mut self, g: &GameOutcome) {
        self.games += 1;
        if g.truncated {
            self.truncated += 1;
        } else {
            self.price.push(g.sale_price);
        }
        self.valuation.push(g.valuation);
        self.payoff.push(g.payoff);
        self.periods.push(f64::from(g.periods_on_market));
    }

    fn merge(&mut self, other: &GameSummary) {
        self.games += other.games;
        self.truncated += other.truncated;
        self.price.merge(&other.price);
        self.valuation.merge(&other.valuation);
        self.payoff.merge(&other.payoff);
        self.periods.merge(&other.periods);
    }

    /// Empirical `Var[p] / Var[v~]`.
    pub fn delta(&self) -> f64 {
        self.price.variance() / self.valuation.variance()
    }
}

/// Run `n_games` independent games from `seed`.
///
/// Games are split into fixed-size chunks, each with its own derived stream,
/// and chunk summaries are merged in index order.
pub fn run_games(
    offers: &OfferModel,
    params: &SellerParams,
    alpha: f64,
    ml_price: f64,
    n_games: u64,
    seed: u64,
) -> Result<GameSummary> {
    check_unit("alpha", alpha)?;
    params.validate()?;
    check_cost(offers.sigma, params.cost_c)?;

    let chunks = n_games.div_ceil(CHUNK);
    let run_chunk = |idx: u64| -> Result<GameSummary> {
        let mut rng = stream(seed, "seller-game", idx);
        let len = CHUNK.min(n_games - idx * CHUNK);
        let mut s = GameSummary::default();
        for _ in 0..len {
            s.record(&simulate_seller_game(offers, params, alpha, ml_price, &mut rng)?);
        }
        Ok(s)
    };

    #[cfg(feature = "parallel")]
    let parts: Vec<Result<GameSummary>> = {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(run_chunk).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<GameSummary>> = (0..chunks).map(run_chunk).collect();

    let mut total = GameSummary::default();
    for p in parts {
        total.merge(&p?);
    }
    Ok(total)
}
