//! Full-model seller decision process.
//!
//! Offers are Gaussian, the seller holds a Gaussian belief about the offer
//! mean and learns from a noisy market signal each period on the market.
//! The infinite-horizon problem (exit for the outside value, or list at a
//! price) is solved by value iteration on a belief grid.

mod io;
mod quadrature;
mod simulate;

pub use io::{write_policy_csv, write_trajectory_csv, POLICY_COLUMNS, TRAJECTORY_COLUMNS};
pub use quadrature::{gauss_hermite, normal_rule};
pub use simulate::{simulate_policy, PolicyTrajectory, TrajectoryPoint};

use crate::error::{domain, Error, Result};

/// Primitives of the full model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullModelParams {
    /// True offer mean.
    pub mu: f64,
    /// Offer standard deviation.
    pub sigma_b: f64,
    /// Initial belief standard deviation.
    pub sigma_s0: f64,
    /// Signal variance in units of `sigma_b^2`; infinite means no learning.
    pub signal_kappa: f64,
    pub flow_r: f64,
    pub cost_c: f64,
    pub discount_gamma: f64,
    /// Value of leaving the market, `r / (1 - gamma)`.
    pub outside_x: f64,
}

impl FullModelParams {
    pub fn new(
        mu: f64,
        sigma_b: f64,
        sigma_s0: f64,
        signal_kappa: f64,
        flow_r: f64,
        cost_c: f64,
        discount_gamma: f64,
    ) -> Result<Self> {
        let p = Self {
            mu,
            sigma_b,
            sigma_s0,
            signal_kappa,
            flow_r,
            cost_c,
            discount_gamma,
            outside_x: flow_r / (1.0 - discount_gamma),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_b > 0.0 && self.sigma_b.is_finite()) {
            return Err(domain("sigma_b", self.sigma_b, "must be positive"));
        }
        if !(self.sigma_s0 >= 0.0 && self.sigma_s0.is_finite()) {
            return Err(domain("sigma_s0", self.sigma_s0, "must be finite and non-negative"));
        }
        if !(self.signal_kappa >= 0.0) {
            return Err(domain("signal_kappa", self.signal_kappa, "must be non-negative"));
        }
        if !(self.discount_gamma > 0.0 && self.discount_gamma < 1.0) {
            return Err(domain("discount_gamma", self.discount_gamma, "must lie in (0, 1)"));
        }
        for (name, v) in [("mu", self.mu), ("flow_r", self.flow_r), ("cost_c", self.cost_c)] {
            if !v.is_finite() {
                return Err(domain(name, v, "must be finite"));
            }
        }
        let x = self.flow_r / (1.0 - self.discount_gamma);
        if (self.outside_x - x).abs() > 1e-9 * x.abs().max(1.0) {
            return Err(domain("outside_x", self.outside_x, "must equal flow_r / (1 - discount_gamma)"));
        }
        Ok(())
    }

    /// `sigma_signal^2 = signal_kappa sigma_b^2`.
    pub fn signal_variance(&self) -> f64 {
        self.signal_kappa * self.sigma_b * self.sigma_b
    }
}

/// Gaussian belief about the offer mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefState {
    pub mu_tilde: f64,
    pub sigma_tilde: f64,
}

/// Conjugate normal update of the belief on one signal draw.
pub fn bayesian_update(belief: &BeliefState, observed_signal: f64, params: &FullModelParams) -> Result<BeliefState> {
    if !(belief.sigma_tilde >= 0.0 && belief.sigma_tilde.is_finite()) {
        return Err(domain("sigma_tilde", belief.sigma_tilde, "must be finite and non-negative"));
    }
    let s2 = params.signal_variance();
    let p2 = belief.sigma_tilde * belief.sigma_tilde;
    if s2 == 0.0 {
        return Ok(BeliefState { mu_tilde: observed_signal, sigma_tilde: 0.0 });
    }
    if p2 == 0.0 || s2.is_infinite() {
        return Ok(*belief);
    }
    let gain = p2 / (p2 + s2);
    Ok(BeliefState {
        mu_tilde: belief.mu_tilde + gain * (observed_signal - belief.mu_tilde),
        sigma_tilde: (p2 * s2 / (p2 + s2)).sqrt(),
    })
}

/// Posterior standard deviation after one signal.
fn next_sigma(sigma_tilde: f64, s2: f64) -> f64 {
    let p2 = sigma_tilde * sigma_tilde;
    if s2 == 0.0 {
        0.0
    } else if p2 == 0.0 || s2.is_infinite() {
        sigma_tilde
    } else {
        (p2 * s2 / (p2 + s2)).sqrt()
    }
}

/// Normal survival function.
pub fn normal_sf(u: f64) -> f64 {
    0.5 * libm::erfc(u / std::f64::consts::SQRT_2)
}

fn normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Mills ratio `(1 - Phi(u)) / phi(u)`.
fn mills(u: f64) -> f64 {
    if u < 25.0 {
        normal_sf(u) / normal_pdf(u)
    } else {
        let r = 1.0 / (u * u);
        (1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r))) / u
    }
}

/// Standardised list price `u` maximising `S(u) (u - d)`, with `S` the normal survival function.
fn best_margin_point(d: f64, start: f64) -> f64 {
    let mut u = start;
    for _ in 0..100 {
        let m = mills(u);
        let g = u - m - d;
        let dg = 2.0 - u * m;
        let step = g / dg;
        u -= step;
        if step.abs() < 1e-13 * u.abs().max(1.0) {
            break;
        }
    }
    u
}

/// What the seller does in a belief state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Exit,
    List(f64),
}

/// Uniform belief grid and solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_mu: usize,
    pub n_sigma: usize,
    pub mu_lo: f64,
    pub mu_hi: f64,
    /// Upper end of the belief-spread axis, which starts at zero.
    pub sigma_hi: f64,
    pub quadrature_nodes: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl GridSpec {
    /// Grid covering `mu +/- max(6 sigma_b, 4 sigma_s0)` and spreads `[0, sigma_s0]`.
    pub fn for_params(p: &FullModelParams, n_mu: usize, n_sigma: usize) -> Self {
        let half = (6.0 * p.sigma_b).max(4.0 * p.sigma_s0);
        Self {
            n_mu,
            n_sigma: if p.sigma_s0 == 0.0 { 1 } else { n_sigma },
            mu_lo: p.mu - half,
            mu_hi: p.mu + half,
            sigma_hi: p.sigma_s0,
            quadrature_nodes: 16,
            tol: 1e-6,
            max_iter: 20_000,
        }
    }

    /// The same box with grid spacing halved.
    pub fn refined(&self) -> Self {
        Self {
            n_mu: 2 * self.n_mu - 1,
            n_sigma: if self.n_sigma > 1 { 2 * self.n_sigma - 1 } else { 1 },
            ..*self
        }
    }

    pub fn validate(&self, p: &FullModelParams) -> Result<()> {
        if self.n_mu < 2 || self.n_sigma == 0 || self.quadrature_nodes == 0 {
            return Err(Error::Config("grid needs n_mu >= 2, n_sigma >= 1 and quadrature nodes".into()));
        }
        if !(self.mu_lo < self.mu_hi) || !(self.sigma_hi >= 0.0) {
            return Err(Error::Config("grid bounds are empty".into()));
        }
        if self.n_sigma == 1 && self.sigma_hi > 0.0 {
            return Err(Error::Config("a positive spread axis needs n_sigma >= 2".into()));
        }
        if self.mu_lo > p.mu - 4.0 * p.sigma_b || self.mu_hi < p.mu + 4.0 * p.sigma_b || self.sigma_hi < p.sigma_s0 {
            return Err(Error::Config("grid must cover mu +/- 4 sigma_b and spreads up to sigma_s0".into()));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Config("tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }

    pub fn mu_at(&self, i: usize) -> f64 {
        self.mu_lo + (self.mu_hi - self.mu_lo) * i as f64 / (self.n_mu - 1) as f64
    }

    pub fn sigma_at(&self, j: usize) -> f64 {
        if self.n_sigma == 1 {
            0.0
        } else {
            self.sigma_hi * j as f64 / (self.n_sigma - 1) as f64
        }
    }

    fn index(&self, i: usize, j: usize) -> usize {
        j * self.n_mu + i
    }
}

/// Converged value function and policy on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpSolution {
    pub params: FullModelParams,
    pub grid: GridSpec,
    /// Values indexed by `j * n_mu + i` for spread node `j` and mean node `i`.
    pub values: Vec<f64>,
    pub actions: Vec<Action>,
    pub iterations: usize,
    /// Sup-norm change of each sweep.
    pub residuals: Vec<f64>,
    kernel: Kernel,
}

#[derive(Debug, Clone, PartialEq)]
struct Kernel {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn interp(grid: &GridSpec, values: &[f64], mu: f64, sigma: f64) -> f64 {
    let fx = ((mu - grid.mu_lo) / (grid.mu_hi - grid.mu_lo) * (grid.n_mu - 1) as f64).clamp(0.0, (grid.n_mu - 1) as f64);
    let i0 = (fx.floor() as usize).min(grid.n_mu - 2);
    let tx = fx - i0 as f64;
    let row = |j: usize| {
        let a = values[grid.index(i0, j)];
        let b = values[grid.index(i0 + 1, j)];
        a + tx * (b - a)
    };
    if grid.n_sigma == 1 {
        return row(0);
    }
    let fy = (sigma / grid.sigma_hi * (grid.n_sigma - 1) as f64).clamp(0.0, (grid.n_sigma - 1) as f64);
    let j0 = (fy.floor() as usize).min(grid.n_sigma - 2);
    let ty = fy - j0 as f64;
    let (a, b) = (row(j0), row(j0 + 1));
    a + ty * (b - a)
}

struct Bellman<'a> {
    p: &'a FullModelParams,
    grid: &'a GridSpec,
    kernel: &'a Kernel,
}

impl Bellman<'_> {
    /// Expected next-period value if the home does not sell.
    fn continuation(&self, values: &[f64], mu: f64, sigma: f64) -> f64 {
        let s2 = self.p.signal_variance();
        let next = next_sigma(sigma, s2);
        let spread = (sigma * sigma - next * next).max(0.0).sqrt();
        if spread == 0.0 {
            return interp(self.grid, values, mu, next);
        }
        self.kernel
            .nodes
            .iter()
            .zip(&self.kernel.weights)
            .map(|(x, w)| w * interp(self.grid, values, mu + spread * x, next))
            .sum()
    }

    /// Best action and its value given the continuation `w`.
    fn decide(&self, mu: f64, sigma: f64, w: f64, start: f64) -> (Action, f64, f64) {
        let p = self.p;
        let s = (sigma * sigma + p.sigma_b * p.sigma_b).sqrt();
        let reach = 3.0 * (sigma + p.sigma_b) / s;
        let u = best_margin_point((w - mu) / s, start).clamp(-reach, reach);
        let l = mu + s * u;
        let list = p.flow_r - p.cost_c + p.discount_gamma * (w + normal_sf(u) * (l - w));
        if p.outside_x >= list {
            (Action::Exit, p.outside_x, u)
        } else {
            (Action::List(l), list, u)
        }
    }

    fn greedy(&self, values: &[f64], belief: &BeliefState) -> (Action, f64) {
        let w = self.continuation(values, belief.mu_tilde, belief.sigma_tilde);
        let (a, v, _) = self.decide(belief.mu_tilde, belief.sigma_tilde, w, 0.0);
        (a, v)
    }
}

/// Value iteration to sup-norm tolerance `grid.tol`.
///
/// Each sweep evaluates, per grid cell, the continuation value by Gauss-Hermite
/// quadrature over the next belief mean with bilinear interpolation, then the
/// best list price in closed form given that continuation.
pub fn solve_mdp(params: &FullModelParams, grid: &GridSpec) -> Result<MdpSolution> {
    params.validate()?;
    grid.validate(params)?;
    let (nodes, weights) = normal_rule(grid.quadrature_nodes);
    let kernel = Kernel { nodes, weights };
    let bell = Bellman { p: params, grid, kernel: &kernel };
    let cells = grid.n_mu * grid.n_sigma;
    let mut values = vec![params.outside_x; cells];
    let mut starts = vec![0.0; cells];
    let mut residuals = Vec::new();

    let sweep = |k: usize, values: &[f64], start: f64| -> (f64, f64) {
        let (i, j) = (k % grid.n_mu, k / grid.n_mu);
        let (mu, sigma) = (grid.mu_at(i), grid.sigma_at(j));
        let w = bell.continuation(values, mu, sigma);
        let (_, v, u) = bell.decide(mu, sigma, w, start);
        (v, u)
    };

    for iter in 1..=grid.max_iter {
        #[cfg(feature = "parallel")]
        let next: Vec<(f64, f64)> = {
            use rayon::prelude::*;
            (0..cells).into_par_iter().map(|k| sweep(k, &values, starts[k])).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let next: Vec<(f64, f64)> = (0..cells).map(|k| sweep(k, &values, starts[k])).collect();

        let mut res = 0.0f64;
        for (k, (v, u)) in next.into_iter().enumerate() {
            res = res.max((v - values[k]).abs());
            values[k] = v;
            starts[k] = u;
        }
        residuals.push(res);
        if res < grid.tol {
            let actions = (0..cells)
                .map(|k| {
                    let (i, j) = (k % grid.n_mu, k / grid.n_mu);
                    let w = bell.continuation(&values, grid.mu_at(i), grid.sigma_at(j));
                    bell.decide(grid.mu_at(i), grid.sigma_at(j), w, starts[k]).0
                })
                .collect();
            return Ok(MdpSolution {
                params: *params,
                grid: *grid,
                values,
                actions,
                iterations: iter,
                residuals,
                kernel,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: grid.max_iter,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}

impl MdpSolution {
    /// Interpolated value at an arbitrary belief.
    pub fn value_at(&self, belief: &BeliefState) -> f64 {
        interp(&self.grid, &self.values, belief.mu_tilde, belief.sigma_tilde)
    }

    /// One-step greedy action at an arbitrary belief under the converged values.
    pub fn action_at(&self, belief: &BeliefState) -> Action {
        let bell = Bellman { p: &self.params, grid: &self.grid, kernel: &self.kernel };
        bell.greedy(&self.values, belief).0
    }

    /// Grid action at node `(i, j)`.
    pub fn action(&self, i: usize, j: usize) -> Action {
        self.actions[self.grid.index(i, j)]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }
}

/// List price maximising the stationary objective `(r - c + gamma P(l) l) / (1 - gamma + gamma P(l))`
/// for a known offer distribution with survival function `sale_prob`, by grid search on `[lo, hi]`
/// followed by golden-section refinement.
pub fn stationary_list_price(
    sale_prob: impl Fn(f64) -> f64,
    flow_r: f64,
    cost_c: f64,
    gamma: f64,
    lo: f64,
    hi: f64,
) -> (f64, f64) {
    let obj = |l: f64| {
        let p = sale_prob(l);
        (flow_r - cost_c + gamma * p * l) / (1.0 - gamma + gamma * p)
    };
    let n = 2000;
    let step = (hi - lo) / n as f64;
    let best = (0..=n)
        .map(|k| lo + step * k as f64)
        .fold((lo, f64::NEG_INFINITY), |b, l| {
            let v = obj(l);
            if v > b.1 {
                (l, v)
            } else {
                b
            }
        });
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if obj(c) >= obj(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let l = 0.5 * (a + b);
    (l, obj(l))
}
