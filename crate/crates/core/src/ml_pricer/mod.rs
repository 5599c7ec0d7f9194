//! Cluster-mean ML pricer and its analytic error model.
//!
//! The platform's price for a home is the mean recent sale price of the
//! home's feature cluster. Its true error against home values and its
//! self-estimated error against sale prices follow closed forms in the
//! reliance `alpha`.

mod cluster;
mod io;
mod synthetic;

pub use cluster::{fit_clusters, predict_price, ClusterModel, HomeRecord};
pub use io::{read_training_csv, write_training_csv};
pub use synthetic::SyntheticMarket;

use crate::error::{domain, Error, Result};
use crate::stats::RunningStats;

/// Training-set size, cluster count and the variance inputs of the error model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlConfig {
    /// Training homes `N`.
    pub n_training: u64,
    /// Clusters `Q`.
    pub q_clusters: u64,
    /// Feature dimension of synthetic homes.
    pub feature_dim: usize,
    /// Per-period random-walk variance of home values.
    pub sigma_rw2: f64,
    /// Heterogeneity of the housing stock.
    pub sigma_v2: f64,
    /// Coefficient in `h(Q) = h_scale / Q`.
    pub h_scale: f64,
    /// Share of valuation variance surviving into sale prices.
    pub delta: f64,
    /// Variance of private valuations.
    pub sigma_e2: f64,
    /// Keep the `1 / (1 - Q alpha^2 / N)` factor instead of the simplified form.
    pub exact_denominator: bool,
}

impl MlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q_clusters == 0 || self.n_training <= 2 * self.q_clusters {
            return Err(Error::Config(format!(
                "need N > 2Q > 0, got N = {}, Q = {}",
                self.n_training, self.q_clusters
            )));
        }
        for (name, v) in [
            ("sigma_rw2", self.sigma_rw2),
            ("sigma_v2", self.sigma_v2),
            ("h_scale", self.h_scale),
            ("delta", self.delta),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(domain(name, v, "must be finite and non-negative"));
            }
        }
        if !(self.sigma_e2 > 0.0 && self.sigma_e2.is_finite()) {
            return Err(domain("sigma_e2", self.sigma_e2, "must be positive"));
        }
        if self.feature_dim == 0 {
            return Err(Error::Config("feature_dim must be at least 1".into()));
        }
        Ok(())
    }

    /// A configuration with `Q / N` negligible and un-confounded error `ratio * sigma_e2`.
    pub fn limit(ratio: f64, delta: f64, sigma_e2: f64) -> Self {
        let n = 1_000_000_000_000_000u64;
        let finite = delta * sigma_e2 / n as f64;
        Self {
            n_training: n,
            q_clusters: 1,
            feature_dim: 1,
            sigma_rw2: ratio * sigma_e2 - finite,
            sigma_v2: 0.0,
            h_scale: 0.0,
            delta,
            sigma_e2,
            exact_denominator: false,
        }
    }

    pub fn q_over_n(&self) -> f64 {
        self.q_clusters as f64 / self.n_training as f64
    }

    /// Unpriced-feature share `h(Q) = h_scale / Q`.
    pub fn h(&self, q: u64) -> f64 {
        self.h_scale / q as f64
    }

    /// Finite-sample error `delta Q sigma_e^2 / N`.
    pub fn finite_sample(&self) -> f64 {
        self.delta * self.q_over_n() * self.sigma_e2
    }

    /// Un-confounded error `sigma_rw^2 + h(Q) sigma_v^2 + delta Q sigma_e^2 / N`.
    pub fn sigma_z2(&self) -> f64 {
        self.sigma_rw2 + self.h(self.q_clusters) * self.sigma_v2 + self.finite_sample()
    }

    /// `sigma_z^2 / sigma_e^2`.
    pub fn ratio(&self) -> f64 {
        self.sigma_z2() / self.sigma_e2
    }
}

/// True ML error `sigma_z^2(alpha) = sigma_z^2 + alpha (2 - alpha) delta Q sigma_e^2 / N`.
///
/// With `exact_denominator` the implicit equation
/// `s = sigma_rw^2 + h sigma_v^2 + alpha^2 (Q/N) s + (1 - alpha)^2 delta Q sigma_e^2 / N`
/// is solved instead.
pub fn true_error_variance(cfg: &MlConfig, alpha: f64) -> f64 {
    if cfg.exact_denominator {
        let base = cfg.sigma_rw2 + cfg.h(cfg.q_clusters) * cfg.sigma_v2;
        let w = 1.0 - alpha;
        (base + w * w * cfg.finite_sample()) / (1.0 - cfg.q_over_n() * alpha * alpha)
    } else {
        cfg.sigma_z2() + alpha * (2.0 - alpha) * cfg.finite_sample()
    }
}

/// Platform's estimate `(1 - alpha)^2 (sigma_z^2(alpha) + delta sigma_e^2)`.
pub fn estimated_error_variance(cfg: &MlConfig, alpha: f64) -> f64 {
    let w = 1.0 - alpha;
    w * w * (true_error_variance(cfg, alpha) + cfg.delta * cfg.sigma_e2)
}

/// Integer `Q` in `[1, N]` minimising `h(Q) sigma_v^2 + delta Q sigma_e^2 / N`.
pub fn optimal_cluster_count(cfg: &MlConfig) -> Result<u64> {
    if !(cfg.h_scale > 0.0) {
        return Err(domain("h_scale", cfg.h_scale, "must be positive"));
    }
    if !(cfg.sigma_e2 > 0.0 && cfg.delta > 0.0) {
        return Err(domain("delta", cfg.delta, "delta sigma_e2 must be positive"));
    }
    let n = cfg.n_training.max(1);
    let objective = |q: u64| cfg.h(q) * cfg.sigma_v2 + cfg.delta * q as f64 * cfg.sigma_e2 / n as f64;
    let q0 = (cfg.h_scale * cfg.sigma_v2 * n as f64 / (cfg.delta * cfg.sigma_e2)).sqrt();
    let lo = (q0.floor() as u64).clamp(1, n);
    let hi = (q0.ceil() as u64).clamp(1, n);
    Ok(if objective(hi) < objective(lo) { hi } else { lo })
}

/// One prediction record: ML price `z`, sale price `p`, true value `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricePoint {
    pub z: f64,
    pub p: f64,
    pub v: f64,
}

/// Sample variances of `v - z` and `p - z`.
pub fn measure_empirical_errors(points: &[PricePoint]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::TooFewRecords { needed: 2, got: points.len() });
    }
    let true_err: RunningStats = points.iter().map(|r| r.v - r.z).collect();
    let est_err: RunningStats = points.iter().map(|r| r.p - r.z).collect();
    Ok((true_err.variance(), est_err.variance()))
}

/// Reliance at which the estimated error crosses the true error.
pub fn alpha_one(cfg: &MlConfig) -> f64 {
    let f = |a: f64| estimated_error_variance(cfg, a) - true_error_variance(cfg, a);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if f(lo) <= 0.0 {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Reliance above which the estimated error falls with `alpha`.
pub fn alpha_two(cfg: &MlConfig) -> f64 {
    let nq = cfg.n_training as f64 / cfg.q_clusters as f64;
    1.0 - (0.5 + nq / 2.0 + nq / (2.0 * cfg.delta) * cfg.ratio()).sqrt()
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> MlConfig {
        MlConfig {
            n_training: 2000,
            q_clusters: 40,
            feature_dim: 4,
            sigma_rw2: 50.0,
            sigma_v2: 400.0,
            h_scale: 2.0,
            delta: 1.0 / 6.0,
            sigma_e2: 170.0,
            exact_denominator: false,
        }
    }

    #[test]
    fn error_variance_end_points() {
        let c = cfg();
        let base = c.sigma_rw2 + c.h_scale / 40.0 * c.sigma_v2 + c.delta * 40.0 / 2000.0 * c.sigma_e2;
        assert!((true_error_variance(&c, 0.0) - base).abs() < 1e-12);
        assert!((true_error_variance(&c, 1.0) - (base + c.finite_sample())).abs() < 1e-12);
        assert!(true_error_variance(&c, 1.0) > base);
        assert!((estimated_error_variance(&c, 0.0) - (base + c.delta * c.sigma_e2)).abs() < 1e-12);
        assert_eq!(estimated_error_variance(&c, 1.0), 0.0);
    }

    #[test]
    fn estimated_error_example() {
        let c = MlConfig::limit(1.0, 1.0 / 6.0, 1.0);
        assert!((estimated_error_variance(&c, 0.5) - 0.25 * (7.0 / 6.0)).abs() < 1e-9);
    }

    #[test]
    fn true_error_increasing_on_grid() {
        let c = cfg();
        let vals: Vec<f64> = (0..100).map(|i| true_error_variance(&c, i as f64 / 99.0)).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn q_star_examples() {
        let mut c = cfg();
        c.n_training = 1000;
        c.delta = 1.0;
        c.sigma_e2 = 1000.0;
        c.h_scale = 1.0;
        c.sigma_v2 = 1.0;
        assert_eq!(optimal_cluster_count(&c).unwrap(), 1);
        c.sigma_v2 = 100.0;
        assert_eq!(optimal_cluster_count(&c).unwrap(), 10);
    }

    #[test]
    fn alpha_one_and_two_examples() {
        let c = MlConfig::limit(1.0, 1.0 / 6.0, 1.0);
        let a1 = alpha_one(&c);
        assert!((a1 - 0.074_180).abs() < 1e-5, "{a1}");
        assert!((1.0 / true_error_variance(&c, a1) - 6.0 * (1.0 / (1.0 - a1).powi(2) - 1.0)).abs() < 1e-9);
        let d = MlConfig {
            n_training: 100,
            q_clusters: 1,
            feature_dim: 1,
            sigma_rw2: 1.0 - 1.0 / 600.0,
            sigma_v2: 0.0,
            h_scale: 0.0,
            delta: 1.0 / 6.0,
            sigma_e2: 1.0,
            exact_denominator: false,
        };
        assert!((d.ratio() - 1.0).abs() < 1e-12);
        assert!((alpha_two(&d) - (1.0 - 350.5f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn empirical_errors() {
        let pts = vec![PricePoint { z: 1.0, p: 1.0, v: 1.0 }; 5];
        assert_eq!(measure_empirical_errors(&pts).unwrap(), (0.0, 0.0));
        assert!(measure_empirical_errors(&pts[..1]).is_err());
    }

    fn arb_cfg() -> impl Strategy<Value = MlConfig> {
        (10u64..500, 3u64..50, 0.0f64..5.0, 0.0f64..5.0, 0.0f64..3.0, 0.01f64..0.5, 0.1f64..10.0)
            .prop_map(|(q, mult, rw, v2, h, delta, e2)| MlConfig {
                n_training: 2 * q * mult + 1,
                q_clusters: q,
                feature_dim: 3,
                sigma_rw2: rw,
                sigma_v2: v2,
                h_scale: h,
                delta,
                sigma_e2: e2,
                exact_denominator: false,
            })
    }

    proptest! {
        #[test]
        fn q_star_matches_scan(cfg in arb_cfg(), hv in 0.01f64..1e4) {
            let mut c = cfg;
            c.n_training = c.n_training.min(4000);
            c.h_scale = 1.0;
            c.sigma_v2 = hv;
            let obj = |q: u64| c.h(q) * c.sigma_v2 + c.delta * q as f64 * c.sigma_e2 / c.n_training as f64;
            let best = (1..=c.n_training).fold((1u64, f64::INFINITY), |b, q| if obj(q) < b.1 { (q, obj(q)) } else { b });
            let q = optimal_cluster_count(&c).unwrap();
            prop_assert!((obj(q) - best.1).abs() <= 1e-12 * best.1.abs().max(1.0));
        }

        #[test]
        fn unsimplified_denominator_solves_implicit_equation(cfg in arb_cfg(), a in 0.0f64..1.0) {
            let mut c = cfg;
            c.exact_denominator = true;
            let s = true_error_variance(&c, a);
            let rhs = c.sigma_rw2 + c.h(c.q_clusters) * c.sigma_v2 + a * a * c.q_over_n() * s
                + (1.0 - a).powi(2) * c.finite_sample();
            prop_assert!((s - rhs).abs() < 1e-9 * s.max(1.0));
        }
    }
}
