//! Multi-period agent-based simulation of the pricing feedback loop.
//!
//! Each period home values drift, the platform prices every home from the
//! previous period's cluster-mean sale prices, sellers blend that price into
//! their valuations with an endogenous reliance, and the platform retrains on
//! the new sales. The simulator sees true values, so it can record both the
//! true and the self-reported error of the ML price.

mod cycles;
mod io;

pub use cycles::{overconfidence_cycles, CycleOptions, CycleSummary};
pub use io::{write_loop_csv, LOOP_COLUMNS};

use std::collections::VecDeque;

use rand::seq::index::sample;

use crate::error::{check_unit, Error, Result};
use crate::feedback_analysis::reliance;
use crate::market_model::{
    check_cost, exact_moments, realized_delta, simulate_seller_game, GameOutcome, OfferModel, SellerParams,
};
use crate::ml_pricer::{fit_clusters, ClusterModel, HomeRecord, MlConfig, SyntheticMarket};
use crate::rng::{derive_seed, std_normal, stream};
use crate::stats::RunningStats;

/// Which error sellers plug into the reliance map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelianceMode {
    /// The platform's self-reported error.
    Displayed,
    /// The true error of the ML price, as measured by the simulator.
    Rational,
}

/// Market-wide loss of trust in the ML price.
///
/// When the true error exceeds `audit_ratio` times the reported error (in
/// standard deviations) for `stale_threshold_periods` consecutive periods,
/// reliance is set to `reset_alpha_to` for the following period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustResetRule {
    pub enabled: bool,
    pub stale_threshold_periods: u32,
    pub reset_alpha_to: f64,
    pub audit_ratio: f64,
}

impl TrustResetRule {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            stale_threshold_periods: 1,
            reset_alpha_to: 0.0,
            audit_ratio: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled && self.stale_threshold_periods == 0 {
            return Err(Error::Config("stale_threshold_periods must be at least 1".into()));
        }
        check_unit("reset_alpha_to", self.reset_alpha_to)?;
        if !(self.audit_ratio > 0.0) {
            return Err(Error::Config("audit_ratio must be positive".into()));
        }
        Ok(())
    }
}

/// Which sales the platform trains and self-evaluates on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Training {
    /// Every sale of the period.
    AllSales,
    /// Only a random `fraction` of sellers, who never see the ML price.
    HoldOut { fraction: f64 },
}

/// Full configuration of one simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopScenario {
    pub n_homes: usize,
    pub periods: usize,
    /// Cluster count, feature dimension and value process. `n_training` homes
    /// sell each period; `delta` and `sigma_e2` are taken from the offer model instead.
    pub ml_cfg: MlConfig,
    /// Half-width of each home's offer distribution.
    pub offer_sigma: f64,
    /// Initial mean home value.
    pub base_value: f64,
    pub seller: SellerParams,
    pub lambda_adoption: f64,
    pub reliance_mode: RelianceMode,
    pub reset_rule: TrustResetRule,
    pub training: Training,
    /// Periods pooled into the platform's error estimate.
    pub window: usize,
    /// Variance of the first-period ML price around true values.
    pub initial_noise2: f64,
    pub rng_seed: u64,
}

impl LoopScenario {
    pub fn validate(&self) -> Result<()> {
        self.ml_cfg.validate()?;
        self.seller.validate()?;
        self.reset_rule.validate()?;
        check_cost(self.offer_sigma, self.seller.cost_c)?;
        check_unit("lambda_adoption", self.lambda_adoption)?;
        if (self.n_homes as u64) < self.ml_cfg.n_training {
            return Err(Error::Config(format!(
                "n_homes = {} is below n_training = {}",
                self.n_homes, self.ml_cfg.n_training
            )));
        }
        if self.periods == 0 || self.window == 0 {
            return Err(Error::Config("periods and window must be at least 1".into()));
        }
        if !(self.initial_noise2 >= 0.0 && self.initial_noise2.is_finite()) {
            return Err(Error::Config("initial_noise2 must be finite and non-negative".into()));
        }
        if let Training::HoldOut { fraction } = self.training {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::Config("hold-out fraction must lie in (0, 1]".into()));
            }
            if ((self.ml_cfg.n_training as f64 * fraction) as u64) < 2 {
                return Err(Error::Config("hold-out sample has fewer than two sales".into()));
            }
        }
        Ok(())
    }

    /// Valuation variance `8 sigma^2 / 3` of the offer model.
    pub fn sigma_e2(&self) -> f64 {
        8.0 * self.offer_sigma * self.offer_sigma / 3.0
    }

    /// The error-model configuration matching this market: `ml_cfg` with the
    /// offer model's valuation variance and the game's exact price-noise share.
    pub fn analytic_config(&self) -> Result<MlConfig> {
        Ok(MlConfig {
            delta: realized_delta(self.offer_sigma, self.seller.cost_c)?,
            sigma_e2: self.sigma_e2(),
            ..self.ml_cfg
        })
    }
}

/// Summary of one simulated period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopRecord {
    pub period: u64,
    /// Reliance of sellers who see the ML price.
    pub alpha: f64,
    /// Variance of `z - v` over the period's sellers.
    pub sigma_z2_emp: f64,
    /// Variance of `z - p` over the platform's evaluation sales.
    pub sigma_hat2_emp: f64,
    pub overconfidence: f64,
    /// Mean `|z - v|`.
    pub mean_abs_price_error: f64,
    pub mean_payoff: f64,
    pub payoff_variance: f64,
    /// Cross-sectional mean of `p - v`.
    pub mean_price_gap: f64,
    /// Standard error of `mean_price_gap`, clustered by ML cluster.
    pub price_gap_se: f64,
    /// Reliance was overridden by the trust-reset rule this period.
    pub reset: bool,
}

struct Sale {
    home: usize,
    hidden: bool,
    z: f64,
    v: f64,
    outcome: GameOutcome,
}

fn clustered_se(gaps: &[(usize, f64)], q: usize) -> f64 {
    let n = gaps.len() as f64;
    let mean = gaps.iter().map(|g| g.1).sum::<f64>() / n;
    let mut sums = vec![0.0; q];
    let mut used = vec![false; q];
    for &(k, x) in gaps {
        sums[k] += x - mean;
        used[k] = true;
    }
    let g = used.iter().filter(|&&u| u).count() as f64;
    if g < 2.0 {
        return f64::NAN;
    }
    let ss: f64 = sums.iter().map(|s| s * s).sum();
    (ss * g / (g - 1.0)).sqrt() / n
}

fn cluster_means(model: &ClusterModel, assign: &[usize], sales: &[(usize, f64)], prev: &[f64]) -> Vec<f64> {
    let q = model.cluster_count();
    let mut sum = vec![0.0; q];
    let mut cnt = vec![0usize; q];
    for &(h, p) in sales {
        sum[assign[h]] += p;
        cnt[assign[h]] += 1;
    }
    let overall = sales.iter().map(|s| s.1).sum::<f64>() / sales.len() as f64;
    (0..q)
        .map(|k| {
            if cnt[k] > 0 {
                sum[k] / cnt[k] as f64
            } else if prev[k].is_finite() {
                prev[k]
            } else {
                overall
            }
        })
        .collect()
}

/// Run the feedback loop for `scenario.periods` periods.
///
/// Per period: values take a random-walk step; every home receives the
/// cluster-mean price of last period's training sales; sellers form reliance
/// from last period's reported error (or the true error in rational mode);
/// each selling home plays the seller game with offers centred so that its
/// expected sale price equals its true value; the platform retrains.
/// Period 1 runs at zero reliance with ML prices drawn around true values.
pub fn run_loop(scenario: &LoopScenario) -> Result<Vec<LoopRecord>> {
    scenario.validate()?;
    let s = scenario;
    let seed = s.rng_seed;
    let cfg = &s.ml_cfg;
    let sigma_e2 = s.sigma_e2();
    let mut market = SyntheticMarket::generate(cfg, s.n_homes, s.base_value, derive_seed(seed, "market", 0))?;

    let labelled: Vec<HomeRecord> = market
        .homes
        .iter()
        .map(|h| HomeRecord::new(h.home_id, h.features.clone(), h.true_value, Some(h.true_value)))
        .collect();
    let model = fit_clusters(&labelled, cfg.q_clusters as usize, derive_seed(seed, "clusters", 0))?;
    let assign = model.assignment.clone();
    let q = model.cluster_count();
    let offset = exact_moments(&OfferModel { mu: 0.0, sigma: s.offer_sigma }, s.seller.cost_c, s.seller.flow_r)?
        .mean_price;
    let n_sellers = cfg.n_training as usize;

    let mut prices = vec![f64::NAN; q];
    let mut window: VecDeque<Vec<f64>> = VecDeque::with_capacity(s.window);
    let mut last_sigma_z2 = f64::NAN;
    let mut streak = 0u32;
    let mut reset_next = false;
    let mut records = Vec::with_capacity(s.periods);

    for t in 1..=s.periods as u64 {
        if t > 1 {
            market.advance(cfg.sigma_rw2, &mut stream(seed, "random-walk", t));
        }
        let z: Vec<f64> = if t == 1 {
            let mut rng = stream(seed, "bootstrap", 0);
            let sd = s.initial_noise2.sqrt();
            market.homes.iter().map(|h| h.true_value + sd * std_normal(&mut rng)).collect()
        } else {
            assign.iter().map(|&k| prices[k]).collect()
        };

        let reset = reset_next;
        reset_next = false;
        let alpha = if t == 1 {
            0.0
        } else if reset {
            s.reset_rule.reset_alpha_to
        } else {
            let err = match s.reliance_mode {
                RelianceMode::Displayed => {
                    let pooled: RunningStats = window.iter().flatten().copied().collect();
                    pooled.variance()
                }
                RelianceMode::Rational => last_sigma_z2,
            };
            reliance(sigma_e2, err, s.lambda_adoption)?
        };

        let mut pick = stream(seed, "sellers", t);
        let sellers: Vec<usize> = if n_sellers == s.n_homes {
            (0..s.n_homes).collect()
        } else {
            let mut v = sample(&mut pick, s.n_homes, n_sellers).into_vec();
            v.sort_unstable();
            v
        };
        let hidden: Vec<bool> = match s.training {
            Training::AllSales => vec![false; sellers.len()],
            Training::HoldOut { fraction } => {
                let m = ((sellers.len() as f64) * fraction) as usize;
                let mut h = vec![false; sellers.len()];
                for i in sample(&mut pick, sellers.len(), m) {
                    h[i] = true;
                }
                h
            }
        };

        let play = |i: usize| -> Result<Sale> {
            let k = sellers[i];
            let v = market.value(k);
            let offers = OfferModel { mu: v - offset, sigma: s.offer_sigma };
            let a = if hidden[i] { 0.0 } else { alpha };
            let mut rng = stream(seed, "loop-sale", (t << 32) | k as u64);
            let outcome = simulate_seller_game(&offers, &s.seller, a, z[k], &mut rng)?;
            Ok(Sale { home: k, hidden: hidden[i], z: z[k], v, outcome })
        };
        #[cfg(feature = "parallel")]
        let sales: Vec<Sale> = {
            use rayon::prelude::*;
            (0..sellers.len()).into_par_iter().map(play).collect::<Result<_>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let sales: Vec<Sale> = (0..sellers.len()).map(play).collect::<Result<_>>()?;

        let sold: Vec<&Sale> = sales.iter().filter(|x| x.outcome.sold).collect();
        if sold.len() < 2 {
            return Err(Error::TooFewRecords { needed: 2, got: sold.len() });
        }
        let training: Vec<&Sale> = match s.training {
            Training::AllSales => sold.clone(),
            Training::HoldOut { .. } => sold.iter().copied().filter(|x| x.hidden).collect(),
        };
        if training.len() < 2 {
            return Err(Error::TooFewRecords { needed: 2, got: training.len() });
        }

        let true_err: RunningStats = sales.iter().map(|x| x.z - x.v).collect();
        let abs_err: RunningStats = sales.iter().map(|x| (x.z - x.v).abs()).collect();
        let reported: Vec<f64> = training.iter().map(|x| x.z - x.outcome.sale_price).collect();
        let hat: RunningStats = reported.iter().copied().collect();
        let payoff: RunningStats = sales.iter().map(|x| x.outcome.payoff).collect();
        let gaps: Vec<(usize, f64)> = sold.iter().map(|x| (assign[x.home], x.outcome.sale_price - x.v)).collect();
        let gap_mean = gaps.iter().map(|g| g.1).sum::<f64>() / gaps.len() as f64;

        let (sz2, sh2) = (true_err.variance(), hat.variance());
        records.push(LoopRecord {
            period: t,
            alpha,
            sigma_z2_emp: sz2,
            sigma_hat2_emp: sh2,
            overconfidence: sz2.sqrt() - sh2.sqrt(),
            mean_abs_price_error: abs_err.mean(),
            mean_payoff: payoff.mean(),
            payoff_variance: payoff.variance(),
            mean_price_gap: gap_mean,
            price_gap_se: clustered_se(&gaps, q),
            reset,
        });

        if window.len() == s.window {
            window.pop_front();
        }
        window.push_back(reported);
        last_sigma_z2 = sz2;
        let train_sales: Vec<(usize, f64)> = training.iter().map(|x| (x.home, x.outcome.sale_price)).collect();
        prices = cluster_means(&model, &assign, &train_sales, &prices);

        if s.reset_rule.enabled {
            if sz2.sqrt() > s.reset_rule.audit_ratio * sh2.sqrt() {
                streak += 1;
            } else {
                streak = 0;
            }
            if streak >= s.reset_rule.stale_threshold_periods {
                reset_next = true;
                streak = 0;
            }
        }
    }
    Ok(records)
}
