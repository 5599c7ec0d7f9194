//! Reliance and confidence as a coupled system.
//!
//! Participants weight the ML price by `alpha = lambda sigma_e^2 / (sigma_e^2 + sigma_hat^2)`
//! while the platform's error estimate `sigma_hat^2` itself falls with `alpha`.
//! This module iterates that loop, enumerates its equilibria and evaluates the
//! payoff consequences.

mod equilibria;
mod payoff;

pub use equilibria::{
    evaluate_conditions, solve_equilibria, solve_equilibria_with_lambda, solve_fixed_points, Equilibrium,
    EquilibriumReport, Stability,
};
pub use payoff::{risk_averse_payoff, PayoffComparison};

pub use crate::market_model::{gamma_kappa, omega_kappa};

use crate::error::{check_unit, domain, Result};
use crate::ml_pricer::{estimated_error_variance, true_error_variance, MlConfig};

/// `lambda sigma_e^2 / (sigma_e^2 + sigma_hat^2)`.
pub fn reliance(sigma_e2: f64, sigma_hat2: f64, lambda: f64) -> Result<f64> {
    if !(sigma_e2 > 0.0) {
        return Err(domain("sigma_e2", sigma_e2, "must be positive"));
    }
    if !(sigma_hat2 >= 0.0) {
        return Err(domain("sigma_hat2", sigma_hat2, "must be non-negative"));
    }
    check_unit("lambda", lambda)?;
    Ok(lambda * sigma_e2 / (sigma_e2 + sigma_hat2))
}

/// One point of the reliance/confidence system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackState {
    pub alpha: f64,
    pub sigma_hat2: f64,
    pub sigma_z2_conf: f64,
    pub iteration: u64,
}

/// Which error estimate feeds the reliance map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IterationMode {
    /// `sigma_hat^2(alpha) = (1 - alpha)^2 sigma_hat^2(0)` with a fixed base.
    ConstantBase { sigma_hat2_at_zero: f64 },
    /// `sigma_hat^2(alpha)` from the full error model.
    FullMap,
    /// Participants see the true error `sigma_z^2(alpha)`.
    Rational,
}

impl IterationMode {
    fn sigma_hat2(&self, cfg: &MlConfig, alpha: f64) -> f64 {
        match *self {
            IterationMode::ConstantBase { sigma_hat2_at_zero } => (1.0 - alpha).powi(2) * sigma_hat2_at_zero,
            IterationMode::FullMap | IterationMode::Rational => estimated_error_variance(cfg, alpha),
        }
    }

    fn signal(&self, cfg: &MlConfig, alpha: f64) -> f64 {
        match self {
            IterationMode::Rational => true_error_variance(cfg, alpha),
            _ => self.sigma_hat2(cfg, alpha),
        }
    }

    /// The composed map `alpha -> reliance(signal(alpha))`.
    pub fn step(&self, cfg: &MlConfig, lambda: f64, alpha: f64) -> f64 {
        lambda * cfg.sigma_e2 / (cfg.sigma_e2 + self.signal(cfg, alpha))
    }

    fn state(&self, cfg: &MlConfig, alpha: f64, iteration: u64) -> FeedbackState {
        FeedbackState {
            alpha,
            sigma_hat2: self.sigma_hat2(cfg, alpha),
            sigma_z2_conf: true_error_variance(cfg, alpha),
            iteration,
        }
    }
}

/// Trajectory of the feedback iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackPath {
    /// The leading states, starting with the initial one; at most [`RECORD_LIMIT`] entries.
    pub states: Vec<FeedbackState>,
    /// The last state reached.
    pub last: FeedbackState,
    pub converged: bool,
}

/// Number of states kept in [`FeedbackPath::states`].
pub const RECORD_LIMIT: usize = 10_000;

/// Iterate from `alpha = 0` until successive reliances differ by less than `tol`.
pub fn iterate_feedback(
    cfg: &MlConfig,
    lambda: f64,
    mode: IterationMode,
    max_iter: u64,
    tol: f64,
) -> Result<FeedbackPath> {
    iterate_feedback_from(cfg, lambda, mode, 0.0, max_iter, tol)
}

/// Iterate from a given starting reliance.
pub fn iterate_feedback_from(
    cfg: &MlConfig,
    lambda: f64,
    mode: IterationMode,
    alpha0: f64,
    max_iter: u64,
    tol: f64,
) -> Result<FeedbackPath> {
    cfg.validate()?;
    check_unit("lambda", lambda)?;
    check_unit("alpha0", alpha0)?;
    if max_iter == 0 {
        return Err(domain("max_iter", 0.0, "must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(domain("tol", tol, "must be positive"));
    }
    if let IterationMode::ConstantBase { sigma_hat2_at_zero } = mode {
        if !(sigma_hat2_at_zero >= 0.0) {
            return Err(domain("sigma_hat2_at_zero", sigma_hat2_at_zero, "must be non-negative"));
        }
    }
    let mut states = vec![mode.state(cfg, alpha0, 0)];
    let mut alpha = alpha0;
    let mut converged = false;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let next = mode.step(cfg, lambda, alpha);
        let done = (next - alpha).abs() < tol;
        alpha = next;
        if states.len() < RECORD_LIMIT {
            states.push(mode.state(cfg, alpha, it));
        }
        if done {
            converged = true;
            break;
        }
    }
    Ok(FeedbackPath {
        states,
        last: mode.state(cfg, alpha, it),
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reliance_examples() {
        assert!((reliance(1e8, 4e8, 1.0).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(reliance(1.0, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(reliance(1.0, 3.0, 0.0).unwrap(), 0.0);
        assert!(reliance(0.0, 3.0, 1.0).is_err());
        assert!(reliance(1.0, 3.0, 1.5).is_err());
    }

    #[test]
    fn constant_base_worked_example() {
        let cfg = MlConfig::limit(3.5, 1.0 / 6.0, 1e8);
        let mode = IterationMode::ConstantBase { sigma_hat2_at_zero: 4e8 };
        let path = iterate_feedback(&cfg, 1.0, mode, 100_000_000, 1e-14).unwrap();
        assert!((path.states[1].alpha - 0.2).abs() < 1e-12);
        assert!((path.states[1].sigma_hat2 / 1e8 - 2.56).abs() < 1e-12);
        assert!((path.states[2].alpha - 0.280_898_876).abs() < 1e-8);
        assert!(path.converged);
        assert!((path.last.alpha - 0.5).abs() < 1e-6, "{}", path.last.alpha);
        assert!((path.last.sigma_hat2 / 1e8 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_base_collapse() {
        let cfg = MlConfig::limit(3.5, 1.0 / 6.0, 1e8);
        let mode = IterationMode::ConstantBase { sigma_hat2_at_zero: 2e8 };
        let path = iterate_feedback(&cfg, 1.0, mode, 1_000_000, 1e-14).unwrap();
        assert!(path.converged);
        assert!((path.last.alpha - 1.0).abs() < 1e-6);
        assert!(path.last.sigma_hat2 < 1e-3);
    }

    #[test]
    fn full_map_collapses_below_four_minus_delta() {
        let cfg = MlConfig::limit(3.5, 1.0 / 6.0, 1.0);
        let path = iterate_feedback(&cfg, 1.0, IterationMode::FullMap, 1_000_000, 1e-13).unwrap();
        assert!(path.converged);
        assert!((path.last.alpha - 1.0).abs() < 1e-6);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let cfg = MlConfig::limit(3.5, 1.0 / 6.0, 1.0);
        let mode = IterationMode::ConstantBase { sigma_hat2_at_zero: 4.0 };
        let path = iterate_feedback(&cfg, 1.0, mode, 5, 1e-14).unwrap();
        assert!(!path.converged);
        assert_eq!(path.states.len(), 6);
        assert_eq!(path.last.iteration, 5);
    }

    #[test]
    fn rational_mode_fixed_point() {
        let mut cfg = MlConfig::limit(1.5, 1.0 / 6.0, 1.0);
        cfg.n_training = 200;
        cfg.q_clusters = 10;
        cfg.sigma_rw2 = 1.5 - cfg.finite_sample();
        let path = iterate_feedback(&cfg, 1.0, IterationMode::Rational, 10_000, 1e-15).unwrap();
        let a = path.last.alpha;
        assert!((a - 1.0 / (1.0 + true_error_variance(&cfg, a))).abs() < 1e-10);
        assert!(true_error_variance(&cfg, a) > true_error_variance(&cfg, 0.0));
        assert!(a < 1.0);
    }
}
