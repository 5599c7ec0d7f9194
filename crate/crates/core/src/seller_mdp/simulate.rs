use rand::Rng;

use super::{bayesian_update, Action, BeliefState, FullModelParams, MdpSolution};
use crate::error::Result;
use crate::rng::{std_normal, stream};

const CHUNK: u64 = 1024;
const MAX_PERIODS: usize = 2000;

/// Cross-path statistics for one period on the market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub tau: usize,
    /// Paths listed in this period.
    pub active: u64,
    pub mean_list_price: f64,
    /// Mean of `100 l_tau / l_0` over listed paths.
    pub mean_list_pct_of_first: f64,
    pub list_pct_std_error: f64,
    /// Share of listed paths that sell this period.
    pub sale_hazard: f64,
}

/// Forward simulation of the optimal policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTrajectory {
    pub points: Vec<TrajectoryPoint>,
    pub n_paths: u64,
    /// Discounted payoff, averaged over paths.
    pub mean_payoff: f64,
    pub payoff_std_error: f64,
    /// Paths that exit without ever listing.
    pub exit_at_entry: u64,
    pub mean_first_list_price: f64,
}

#[derive(Default, Clone)]
struct Acc {
    active: Vec<u64>,
    list: Vec<f64>,
    pct: Vec<f64>,
    pct2: Vec<f64>,
    sold: Vec<u64>,
    payoff: f64,
    payoff2: f64,
    exit_at_entry: u64,
    first: f64,
    listed: u64,
}

impl Acc {
    fn at(&mut self, tau: usize) {
        if self.active.len() <= tau {
            self.active.resize(tau + 1, 0);
            self.list.resize(tau + 1, 0.0);
            self.pct.resize(tau + 1, 0.0);
            self.pct2.resize(tau + 1, 0.0);
            self.sold.resize(tau + 1, 0);
        }
    }

    fn merge(&mut self, o: &Acc) {
        self.at(o.active.len().saturating_sub(1));
        for t in 0..o.active.len() {
            self.active[t] += o.active[t];
            self.list[t] += o.list[t];
            self.pct[t] += o.pct[t];
            self.pct2[t] += o.pct2[t];
            self.sold[t] += o.sold[t];
        }
        self.payoff += o.payoff;
        self.payoff2 += o.payoff2;
        self.exit_at_entry += o.exit_at_entry;
        self.first += o.first;
        self.listed += o.listed;
    }
}

fn one_path<R: Rng + ?Sized>(sol: &MdpSolution, truth: &FullModelParams, rng: &mut R, acc: &mut Acc) -> Result<()> {
    let p = &sol.params;
    let g = p.discount_gamma;
    let sig = truth.signal_variance().sqrt();
    let mut belief = BeliefState {
        mu_tilde: truth.mu + truth.sigma_s0 * std_normal(rng),
        sigma_tilde: truth.sigma_s0,
    };
    let mut payoff = 0.0;
    let mut disc = 1.0;
    let mut first = f64::NAN;
    for tau in 0..MAX_PERIODS {
        match sol.action_at(&belief) {
            Action::Exit => {
                payoff += disc * p.outside_x;
                if tau == 0 {
                    acc.exit_at_entry += 1;
                }
                break;
            }
            Action::List(l) => {
                if tau == 0 {
                    first = l;
                    acc.first += l;
                    acc.listed += 1;
                }
                acc.at(tau);
                acc.active[tau] += 1;
                acc.list[tau] += l;
                let pct = 100.0 * l / first;
                acc.pct[tau] += pct;
                acc.pct2[tau] += pct * pct;
                payoff += disc * (p.flow_r - p.cost_c);
                let offer = truth.mu + truth.sigma_b * std_normal(rng);
                if offer >= l {
                    acc.sold[tau] += 1;
                    payoff += disc * g * l;
                    break;
                }
                let signal = if sig.is_finite() { truth.mu + sig * std_normal(rng) } else { belief.mu_tilde };
                belief = bayesian_update(&belief, signal, truth)?;
                disc *= g;
                if tau + 1 == MAX_PERIODS {
                    payoff += disc * sol.value_at(&belief);
                }
            }
        }
    }
    acc.payoff += payoff;
    acc.payoff2 += payoff * payoff;
    Ok(())
}

/// Simulate `n_paths` sellers whose initial belief mean is drawn from
/// `N(mu, sigma_s0^2)`, facing offers and signals drawn from `truth`, acting
/// greedily with respect to the solved value function.
pub fn simulate_policy(
    solution: &MdpSolution,
    truth: &FullModelParams,
    n_paths: u64,
    rng_seed: u64,
) -> Result<PolicyTrajectory> {
    truth.validate()?;
    let chunks = n_paths.div_ceil(CHUNK);
    let run = |c: u64| -> Result<Acc> {
        let mut rng = stream(rng_seed, "mdp-paths", c);
        let mut acc = Acc::default();
        for _ in 0..CHUNK.min(n_paths - c * CHUNK) {
            one_path(solution, truth, &mut rng, &mut acc)?;
        }
        Ok(acc)
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<Acc>> = {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<Acc>> = (0..chunks).map(run).collect();
    let mut acc = Acc::default();
    for part in parts {
        acc.merge(&part?);
    }

    let n = n_paths.max(1) as f64;
    let mean = acc.payoff / n;
    let var = if n_paths > 1 { (acc.payoff2 - n * mean * mean) / (n - 1.0) } else { 0.0 };
    let points = (0..acc.active.len())
        .filter(|&t| acc.active[t] > 0)
        .map(|t| {
            let a = acc.active[t] as f64;
            let m = acc.pct[t] / a;
            let v = if a > 1.0 { (acc.pct2[t] - a * m * m) / (a - 1.0) } else { 0.0 };
            TrajectoryPoint {
                tau: t,
                active: acc.active[t],
                mean_list_price: acc.list[t] / a,
                mean_list_pct_of_first: m,
                list_pct_std_error: (v.max(0.0) / a).sqrt(),
                sale_hazard: acc.sold[t] as f64 / a,
            }
        })
        .collect();
    Ok(PolicyTrajectory {
        points,
        n_paths,
        mean_payoff: mean,
        payoff_std_error: (var.max(0.0) / n).sqrt(),
        exit_at_entry: acc.exit_at_entry,
        mean_first_list_price: if acc.listed > 0 { acc.first / acc.listed as f64 } else { f64::NAN },
    })
}
