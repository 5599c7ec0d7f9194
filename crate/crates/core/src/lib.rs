//! Machine-learning pricing feedback loops in a housing market.
//!
//! The crate is organised around five models:
//!
//! * [`market_model`]: the simple-model seller game, its closed forms and a Monte Carlo oracle.
//! * [`ml_pricer`]: a cluster-mean price predictor on synthetic homes and its analytic error model.
//! * [`feedback_analysis`]: the reliance/confidence fixed point, equilibria and payoff comparisons.
//! * [`loop_simulator`]: a multi-period agent-based simulation of the full loop.
//! * [`seller_mdp`]: the full-model seller decision process solved by value iteration.
//!
//! Every stochastic routine takes an explicit seed or random source. Parallel
//! Monte Carlo work splits into fixed chunks with derived seeds and reduces in
//! chunk order, so results do not depend on the number of threads.

pub mod error;
pub mod feedback_analysis;
pub mod loop_simulator;
pub mod market_model;
pub mod ml_pricer;
pub mod rng;
pub mod seller_mdp;
pub mod stats;

pub use error::{Error, Result};
