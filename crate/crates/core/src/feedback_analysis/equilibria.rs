use super::payoff::{risk_averse_payoff, PayoffComparison};
use super::{iterate_feedback, IterationMode};
use crate::error::{check_unit, domain, Result};
use crate::market_model::{gamma_kappa, omega_kappa};
use crate::ml_pricer::{alpha_one, alpha_two, estimated_error_variance, true_error_variance, MlConfig};

const GRID: usize = 10_000;
const DOUBLE_TOL: f64 = 1e-12;

/// Stability of a fixed point under the composed reliance map (an extension; the
/// classification is by `|slope| < 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Neutral,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Neutral => "neutral",
        }
    }
}

/// A fixed point of the reliance/confidence system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub alpha: f64,
    pub sigma_hat2: f64,
    pub sigma_z2_conf: f64,
    pub multiplicity: u8,
    pub map_slope: f64,
    pub stability: Stability,
    /// Residual of the equilibrium equation; zero by construction at `alpha = 1`.
    pub residual: f64,
}

/// Equilibria, condition checks and the payoff comparison for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub equilibria: Vec<Equilibrium>,
    pub alpha1: Option<f64>,
    pub alpha2: f64,
    /// No interior equilibrium was found.
    pub unique_full_reliance: bool,
    /// `sigma_z^2 / sigma_e^2 < 4 - delta - delta Q / N`.
    pub full_reliance_condition: bool,
    pub variance_thresholds: [f64; 3],
    /// `None` for a risk-neutral seller, whose payoff always rises with reliance.
    pub full_reliance_hurts: Option<bool>,
    pub viability_holds: bool,
    /// Both the uniqueness and the payoff conditions hold.
    pub band_holds: bool,
    pub payoff: PayoffComparison,
}

const FULL: IterationMode = IterationMode::FullMap;

/// `alpha (1 - alpha) (sigma_z^2(alpha) / sigma_e^2 + delta) - 1`, zero at interior equilibria.
fn interior_gap(cfg: &MlConfig, a: f64) -> f64 {
    a * (1.0 - a) * (true_error_variance(cfg, a) / cfg.sigma_e2 + cfg.delta) - 1.0
}

/// The displayed form `ratio + delta + delta alpha (2 - alpha) Q/N - 1 / (alpha (1 - alpha))`.
fn equation_residual(cfg: &MlConfig, a: f64) -> f64 {
    true_error_variance(cfg, a) / cfg.sigma_e2 + cfg.delta - 1.0 / (a * (1.0 - a))
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn derivative(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-7;
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Roots of `f` on `(lo, hi)`: sign changes on a uniform grid refined by bisection,
/// plus tangential (double) roots found at extrema where `|f|` vanishes.
fn scan_roots(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<(f64, u8)> {
    let xs: Vec<f64> = (0..=GRID).map(|i| lo + (hi - lo) * i as f64 / GRID as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots: Vec<(f64, u8)> = Vec::new();
    for i in 0..GRID {
        let (a, b) = (fs[i], fs[i + 1]);
        if a != 0.0 && b != 0.0 && (a > 0.0) != (b > 0.0) {
            roots.push((bisect(f, xs[i], xs[i + 1]), 1));
        } else if a == 0.0 && i > 0 && (fs[i - 1] > 0.0) != (b > 0.0) && fs[i - 1] != 0.0 && b != 0.0 {
            roots.push((xs[i], 1));
        }
    }
    let df = |x: f64| derivative(f, x);
    for i in 1..GRID - 1 {
        let (d0, d1) = (df(xs[i]), df(xs[i + 1]));
        if (d0 > 0.0) == (d1 > 0.0) {
            continue;
        }
        let x = bisect(&df, xs[i], xs[i + 1]);
        if f(x).abs() <= DOUBLE_TOL {
            roots.retain(|(r, _)| (r - x).abs() > 1e-6);
            roots.push((x, 2));
        }
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    roots
}

fn classify(cfg: &MlConfig, lambda: f64, mode: IterationMode, alpha: f64, multiplicity: u8) -> (f64, Stability) {
    let step = |a: f64| mode.step(cfg, lambda, a.clamp(0.0, 1.0));
    let h = 1e-6;
    let slope = if alpha + h > 1.0 {
        (step(alpha) - step(alpha - h)) / h
    } else if alpha - h < 0.0 {
        (step(alpha + h) - step(alpha)) / h
    } else {
        (step(alpha + h) - step(alpha - h)) / (2.0 * h)
    };
    let stability = if multiplicity > 1 || (slope.abs() - 1.0).abs() < 1e-6 {
        Stability::Neutral
    } else if slope.abs() < 1.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    (slope, stability)
}

fn make(cfg: &MlConfig, lambda: f64, mode: IterationMode, alpha: f64, multiplicity: u8, residual: f64) -> Equilibrium {
    let (map_slope, stability) = classify(cfg, lambda, mode, alpha, multiplicity);
    Equilibrium {
        alpha,
        sigma_hat2: mode.sigma_hat2(cfg, alpha),
        sigma_z2_conf: true_error_variance(cfg, alpha),
        multiplicity,
        map_slope,
        stability,
        residual,
    }
}

/// All equilibria under full adoption, in increasing `alpha`; `alpha = 1` is always last.
pub fn solve_equilibria(cfg: &MlConfig) -> Result<Vec<Equilibrium>> {
    solve_equilibria_with_lambda(cfg, 1.0)
}

/// All fixed points of `alpha = lambda sigma_e^2 / (sigma_e^2 + sigma_hat^2(alpha))`.
pub fn solve_equilibria_with_lambda(cfg: &MlConfig, lambda: f64) -> Result<Vec<Equilibrium>> {
    cfg.validate()?;
    check_unit("lambda", lambda)?;
    if lambda == 1.0 {
        let g = |a: f64| interior_gap(cfg, a);
        let mut out: Vec<Equilibrium> = scan_roots(&g, 0.0, 1.0)
            .into_iter()
            .map(|(a, m)| make(cfg, 1.0, FULL, a, m, equation_residual(cfg, a)))
            .collect();
        out.push(make(cfg, 1.0, FULL, 1.0, 1, 0.0));
        Ok(out)
    } else {
        let h = |a: f64| a * (1.0 + estimated_error_variance(cfg, a) / cfg.sigma_e2) - lambda;
        Ok(scan_roots(&h, 0.0, 1.0)
            .into_iter()
            .map(|(a, m)| make(cfg, lambda, FULL, a, m, h(a)))
            .collect())
    }
}

/// All fixed points of `alpha = mode.step(alpha)` on `[0, 1]`.
pub fn solve_fixed_points(cfg: &MlConfig, lambda: f64, mode: IterationMode) -> Result<Vec<Equilibrium>> {
    if mode == FULL {
        return solve_equilibria_with_lambda(cfg, lambda);
    }
    cfg.validate()?;
    check_unit("lambda", lambda)?;
    if let IterationMode::ConstantBase { sigma_hat2_at_zero } = mode {
        if !(sigma_hat2_at_zero >= 0.0) {
            return Err(domain("sigma_hat2_at_zero", sigma_hat2_at_zero, "must be non-negative"));
        }
    }
    let f = |a: f64| mode.step(cfg, lambda, a) - a;
    let mut out: Vec<Equilibrium> = scan_roots(&f, 0.0, 1.0)
        .into_iter()
        .filter(|(a, _)| 1.0 - a > 1e-6)
        .map(|(a, m)| make(cfg, lambda, mode, a, m, f(a)))
        .collect();
    if f(1.0).abs() <= DOUBLE_TOL {
        out.push(make(cfg, lambda, mode, 1.0, 1, f(1.0)));
    }
    Ok(out)
}

/// Evaluate the equilibrium conditions and payoff comparison for a seller with
/// cost coefficient `kappa` and risk aversion `a`.
pub fn evaluate_conditions(cfg: &MlConfig, mu: f64, kappa: f64, a: f64) -> Result<EquilibriumReport> {
    if !(a >= 0.0) {
        return Err(domain("risk_aversion_a", a, "must be non-negative"));
    }
    if !(kappa >= 0.0) {
        return Err(domain("kappa", kappa, "must be non-negative"));
    }
    let equilibria = solve_equilibria(cfg)?;
    let ratio = cfg.ratio();
    let qn = cfg.q_over_n();
    let (gamma, omega) = (gamma_kappa(kappa), omega_kappa(kappa));
    let sz2 = cfg.sigma_z2();
    let e2 = cfg.sigma_e2;

    let alpha1 = (cfg.delta > 0.0).then(|| alpha_one(cfg));
    let full_reliance_condition = ratio < 4.0 - cfg.delta - cfg.delta * qn;
    let (full_reliance_hurts, viability_holds) = if a > 0.0 {
        let lhs = (omega.sqrt() + 2.0 * gamma / a).powi(2);
        (Some(ratio > lhs - cfg.delta * qn), lhs + cfg.delta < 4.0)
    } else {
        (None, false)
    };

    let path = iterate_feedback(cfg, 1.0, IterationMode::FullMap, 10_000_000, 1e-13)?;
    let alpha_star = path.last.alpha;
    let payoff = PayoffComparison {
        pi_no_ml: risk_averse_payoff(mu, e2, kappa, a, 0.0, cfg)?,
        pi_equilibrium: risk_averse_payoff(mu, e2, kappa, a, alpha_star, cfg)?,
        alpha_star,
        gamma_kappa: gamma,
        omega_kappa: omega,
    };

    Ok(EquilibriumReport {
        unique_full_reliance: equilibria.len() == 1,
        equilibria,
        alpha1,
        alpha2: alpha_two(cfg),
        full_reliance_condition,
        variance_thresholds: [e2 / (e2 + sz2), e2 / (e2 + sz2 / cfg.delta), e2 / (e2 + sz2 / omega)],
        full_reliance_hurts,
        viability_holds,
        band_holds: full_reliance_condition && full_reliance_hurts == Some(true),
        payoff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alphas(cfg: &MlConfig) -> Vec<f64> {
        solve_equilibria(cfg).unwrap().iter().map(|e| e.alpha).collect()
    }

    #[test]
    fn below_threshold_only_full_reliance() {
        assert_eq!(alphas(&MlConfig::limit(2.0, 1.0 / 6.0, 1.0)), vec![1.0]);
    }

    #[test]
    fn interior_roots_match_quadratic() {
        let eq = solve_equilibria(&MlConfig::limit(6.0, 1.0 / 6.0, 1.0)).unwrap();
        let k: f64 = 6.0 + 1.0 / 6.0;
        let disc = (1.0 - 4.0 / k).sqrt();
        let (r1, r2) = ((1.0 - disc) / 2.0, (1.0 + disc) / 2.0);
        assert_eq!(eq.len(), 3);
        assert!((eq[0].alpha - r1).abs() < 1e-10 && (eq[1].alpha - r2).abs() < 1e-10);
        assert!((eq[0].alpha - 0.2036).abs() < 1e-4 && (eq[1].alpha - 0.7964).abs() < 1e-4);
        assert!(eq.iter().all(|e| e.residual.abs() < 1e-10));
        assert_eq!(eq[0].stability, Stability::Stable);
        assert_eq!(eq[1].stability, Stability::Unstable);
        assert_eq!(eq[2].stability, Stability::Stable);
    }

    #[test]
    fn boundary_gives_double_root() {
        let eq = solve_equilibria(&MlConfig::limit(4.0 - 1.0 / 6.0, 1.0 / 6.0, 1.0)).unwrap();
        assert_eq!(eq.len(), 2);
        assert!((eq[0].alpha - 0.5).abs() < 1e-5);
        assert_eq!(eq[0].multiplicity, 2);
    }

    #[test]
    fn lambda_below_one_has_interior_fixed_point() {
        let cfg = MlConfig::limit(2.0, 1.0 / 12.0, 1.0);
        let eq = solve_equilibria_with_lambda(&cfg, 0.4).unwrap();
        assert_eq!(eq.len(), 1);
        let a = eq[0].alpha;
        assert!((a - 0.4 / (1.0 + estimated_error_variance(&cfg, a))).abs() < 1e-12);
    }

    #[test]
    fn constant_base_fixed_points() {
        let cfg = MlConfig::limit(3.5, 1.0 / 6.0, 1.0);
        let mode = IterationMode::ConstantBase { sigma_hat2_at_zero: 4.0 };
        let eq = solve_fixed_points(&cfg, 1.0, mode).unwrap();
        let a: Vec<f64> = eq.iter().map(|e| e.alpha).collect();
        assert_eq!(a.len(), 2, "{a:?}");
        assert!((a[0] - 0.5).abs() < 1e-5);
        assert_eq!(eq[0].multiplicity, 2);
        assert!((eq[0].sigma_hat2 - 1.0).abs() < 1e-4);
        assert_eq!(a[1], 1.0);
    }

    #[test]
    fn rational_fixed_point_is_interior() {
        let cfg = MlConfig::limit(1.5, 1.0 / 6.0, 1.0);
        let eq = solve_fixed_points(&cfg, 1.0, IterationMode::Rational).unwrap();
        assert_eq!(eq.len(), 1);
        let a = eq[0].alpha;
        assert!((a - 1.0 / (1.0 + true_error_variance(&cfg, a))).abs() < 1e-10);
        assert_eq!(eq[0].stability, Stability::Stable);
    }

    #[test]
    fn report_examples() {
        let cfg = MlConfig::limit(1.0, 1.0 / 6.0, 1.0);
        let r = evaluate_conditions(&cfg, 100.0, 0.3, 0.0).unwrap();
        assert!((r.variance_thresholds[0] - 0.5).abs() < 1e-12);
        assert!(r.full_reliance_hurts.is_none());
        assert!((r.alpha1.unwrap() - 0.0742).abs() < 1e-4);
        assert!(r.unique_full_reliance && r.full_reliance_condition);
    }
}
