//! The experiment commands.
//!
//! Each command turns a scenario into named CSV documents held in memory, so
//! that nothing is written when a command fails.

use mlfeedback::feedback_analysis::{
    iterate_feedback_from, evaluate_conditions, solve_fixed_points, Equilibrium, IterationMode,
};
use mlfeedback::loop_simulator::{
    overconfidence_cycles, run_loop, write_loop_csv, CycleOptions, LoopRecord, LoopScenario, RelianceMode,
    Training, TrustResetRule,
};
use mlfeedback::market_model::{
    blend, exact_moments, expected_payoff, first_period_list_price, gamma_kappa, home_value, informed_list_price,
    omega_kappa, payoff_variance, realized_delta, run_games, sale_probability, seller_valuation, OfferModel,
    SellerGuess, SellerParams,
};
use mlfeedback::ml_pricer::{true_error_variance, MlConfig};
use mlfeedback::rng::derive_seed;
use mlfeedback::seller_mdp::{
    simulate_policy, solve_mdp, write_policy_csv, write_trajectory_csv, FullModelParams, GridSpec,
};
use rayon::prelude::*;

use crate::error::CliError;
use crate::scenario::{Kind, Scenario, Value, KEYS};

/// One named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub artifacts: Vec<Artifact>,
    /// Human-readable lines for standard output.
    pub report: Vec<String>,
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Numerical(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Numerical(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Numerical(e.to_string()))
}

fn utf8(bytes: Vec<u8>) -> Result<String, CliError> {
    String::from_utf8(bytes).map_err(|e| CliError::Numerical(e.to_string()))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn quantity_table(name: &str, rows: &[(&str, String)]) -> Result<(Artifact, Vec<String>), CliError> {
    let body: Vec<Vec<String>> = rows.iter().map(|(k, v)| vec![k.to_string(), v.clone()]).collect();
    let report = rows.iter().map(|(k, v)| format!("{k:<28} {v}")).collect();
    Ok((
        Artifact {
            name: name.to_string(),
            contents: csv_text(&["quantity", "value"], &body)?,
        },
        report,
    ))
}

/// Offer model, cost and cost coefficient from `[market]`.
///
/// Either `cost_c` or `kappa` may be given; with both they must agree.
pub fn market(s: &Scenario) -> Result<(OfferModel, f64, f64), CliError> {
    let offers = OfferModel::new(s.float("market", "mu")?, s.float("market", "sigma")?)?;
    let se = offers.sigma_e();
    let (c, kappa) = match (s.float_opt("market", "cost_c")?, s.float_opt("market", "kappa")?) {
        (Some(c), Some(kappa)) => {
            if (c - kappa * se).abs() > 1e-9 * c.abs().max(1.0) {
                return Err(CliError::Config(format!(
                    "[market] cost_c = {c} disagrees with kappa = {kappa} (kappa sigma_e = {})",
                    kappa * se
                )));
            }
            (c, kappa)
        }
        (Some(c), None) => (c, c / se),
        (None, Some(kappa)) => (kappa * se, kappa),
        (None, None) => return Err(CliError::Config("[market] needs cost_c or kappa".into())),
    };
    Ok((offers, c, kappa))
}

fn seller(s: &Scenario, cost_c: f64, kappa: f64) -> Result<SellerParams, CliError> {
    let p = SellerParams {
        cost_c,
        kappa,
        risk_aversion_a: s.float_or("market", "risk_aversion_a", 0.0)?,
        flow_r: s.float_or("market", "flow_r", 0.0)?,
        discount_gamma: 1.0,
    };
    p.validate()?;
    Ok(p)
}

/// Error-model configuration from `[ml]`; `delta` and `sigma_e2` fall back to
/// the values implied by `[market]`.
pub fn ml_config(s: &Scenario) -> Result<MlConfig, CliError> {
    let implied = |key: &str| -> Result<f64, CliError> {
        let (offers, c, _) = market(s).map_err(|e| {
            CliError::Config(format!("missing key `{key}` in [ml] and no [market] to derive it from ({e})"))
        })?;
        Ok(match key {
            "delta" => realized_delta(offers.sigma, c)?,
            _ => offers.sigma_e2(),
        })
    };
    let delta = match s.float_opt("ml", "delta")? {
        Some(d) => d,
        None => implied("delta")?,
    };
    let sigma_e2 = match s.float_opt("ml", "sigma_e2")? {
        Some(v) => v,
        None => implied("sigma_e2")?,
    };
    let cfg = MlConfig {
        n_training: s.int("ml", "n_training")?,
        q_clusters: s.int("ml", "q_clusters")?,
        feature_dim: s.int_or("ml", "feature_dim", 2)? as usize,
        sigma_rw2: s.float("ml", "sigma_rw2")?,
        sigma_v2: s.float_or("ml", "sigma_v2", 0.0)?,
        h_scale: s.float_or("ml", "h_scale", 0.0)?,
        delta,
        sigma_e2,
        exact_denominator: s.bool_or("ml", "exact_denominator", false)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn iteration_mode(s: &Scenario) -> Result<IterationMode, CliError> {
    Ok(match s.choice_or("feedback", "mode", "full")? {
        "constant" => IterationMode::ConstantBase {
            sigma_hat2_at_zero: s.float("feedback", "sigma_hat2_at_zero")?,
        },
        "rational" => IterationMode::Rational,
        _ => IterationMode::FullMap,
    })
}

fn mode_name(mode: IterationMode) -> &'static str {
    match mode {
        IterationMode::ConstantBase { .. } => "constant",
        IterationMode::FullMap => "full",
        IterationMode::Rational => "rational",
    }
}

pub fn closed_forms(s: &Scenario) -> Result<Output, CliError> {
    let (offers, c, kappa) = market(s)?;
    let alpha = s.float_or("market", "alpha", 0.0)?;
    let z = if alpha > 0.0 {
        s.float("market", "ml_price")?
    } else {
        s.float_or("market", "ml_price", offers.mu)?
    };
    let sigma = offers.sigma;
    let l2 = informed_list_price(&offers, c)?;
    let guesses = SellerGuess::support(&offers);
    let first = |g: &SellerGuess| first_period_list_price(g, sigma, c);
    let valuation = |g: &SellerGuess| seller_valuation(g, sigma, c, alpha, z);
    let se = offers.sigma_e();
    let var_pi = if alpha > 0.0 {
        let cfg = ml_config(s)?;
        payoff_variance(se, kappa, alpha, true_error_variance(&cfg, alpha))
    } else {
        payoff_variance(se, kappa, 0.0, 0.0)
    };
    let rows = [
        ("home_value", home_value(&offers, c)?.to_string()),
        ("first_list_price_low", first(&guesses[0])?.to_string()),
        ("first_list_price_mid", first(&guesses[1])?.to_string()),
        ("first_list_price_high", first(&guesses[2])?.to_string()),
        ("informed_list_price", l2.to_string()),
        ("sale_probability_informed", sale_probability(l2, &offers).to_string()),
        ("sigma_e2", offers.sigma_e2().to_string()),
        ("kappa", kappa.to_string()),
        ("alpha", alpha.to_string()),
        ("valuation_low", valuation(&guesses[0])?.to_string()),
        ("valuation_mid", valuation(&guesses[1])?.to_string()),
        ("valuation_high", valuation(&guesses[2])?.to_string()),
        ("expected_payoff", expected_payoff(offers.mu, (1.0 - alpha) * se, kappa).to_string()),
        ("gamma_kappa", gamma_kappa(kappa).to_string()),
        ("omega_kappa", omega_kappa(kappa).to_string()),
        ("payoff_variance", var_pi.to_string()),
    ];
    let (artifact, report) = quantity_table("closed_forms.csv", &rows)?;
    Ok(Output {
        artifacts: vec![artifact],
        report,
    })
}

pub fn simulate(s: &Scenario, seed: u64) -> Result<Output, CliError> {
    let (offers, c, kappa) = market(s)?;
    let params = seller(s, c, kappa)?;
    let alpha = s.float_or("market", "alpha", 0.0)?;
    let z = if alpha > 0.0 {
        s.float("market", "ml_price")?
    } else {
        s.float_or("market", "ml_price", offers.mu)?
    };
    let games = s.int_or("market", "games", 100_000)?;
    if games < 2 {
        return Err(CliError::Config("[market] games must be at least 2".into()));
    }
    let mc = run_games(&offers, &params, alpha, z, games, seed)?;
    let exact = if alpha < 1.0 {
        let (o, cb) = blend(&offers, c, alpha, z);
        Some(exact_moments(&o, cb, params.flow_r)?)
    } else {
        None
    };
    let ex = |f: fn(&mlfeedback::market_model::GameMoments) -> f64| opt(exact.as_ref().map(f));
    let rows: Vec<Vec<String>> = vec![
        vec!["games".into(), mc.games.to_string(), String::new()],
        vec!["truncated".into(), mc.truncated.to_string(), String::new()],
        vec!["mean_price".into(), mc.price.mean().to_string(), ex(|m| m.mean_price)],
        vec!["var_price".into(), mc.price.variance().to_string(), ex(|m| m.var_price)],
        vec!["mean_valuation".into(), mc.valuation.mean().to_string(), ex(|m| m.mean_valuation)],
        vec!["var_valuation".into(), mc.valuation.variance().to_string(), ex(|m| m.var_valuation)],
        vec!["mean_payoff".into(), mc.payoff.mean().to_string(), ex(|m| m.mean_payoff)],
        vec!["var_payoff".into(), mc.payoff.variance().to_string(), ex(|m| m.var_payoff)],
        vec!["mean_periods".into(), mc.periods.mean().to_string(), ex(|m| m.mean_periods)],
        vec!["delta".into(), mc.delta().to_string(), ex(|m| m.var_price / m.var_valuation)],
    ];
    let report = rows
        .iter()
        .map(|r| format!("{:<16} {:>24} {:>24}", r[0], r[1], r[2]))
        .collect();
    Ok(Output {
        artifacts: vec![Artifact {
            name: "simulate.csv".into(),
            contents: csv_text(&["statistic", "monte_carlo", "exact"], &rows)?,
        }],
        report,
    })
}

const EQUILIBRIUM_COLUMNS: [&str; 7] =
    ["alpha", "sigma_hat2", "sigma_z2", "multiplicity", "map_slope", "stability", "residual"];

fn equilibrium_row(e: &Equilibrium) -> Vec<String> {
    vec![
        e.alpha.to_string(),
        e.sigma_hat2.to_string(),
        e.sigma_z2_conf.to_string(),
        e.multiplicity.to_string(),
        e.map_slope.to_string(),
        e.stability.as_str().to_string(),
        e.residual.to_string(),
    ]
}

pub fn equilibrium(s: &Scenario) -> Result<Output, CliError> {
    let cfg = ml_config(s)?;
    let (offers, _, kappa) = market(s)?;
    let a = s.float_or("market", "risk_aversion_a", 0.0)?;
    let lambda = s.float_or("feedback", "lambda", 1.0)?;
    let mode = iteration_mode(s)?;
    let alpha0 = s.float_or("feedback", "alpha0", 0.0)?;
    let max_iter = s.int_or("feedback", "max_iter", 10_000_000)?;
    let tol = s.float_or("feedback", "tol", 1e-12)?;

    let points = solve_fixed_points(&cfg, lambda, mode)?;
    let rows: Vec<Vec<String>> = points.iter().map(equilibrium_row).collect();
    let path = iterate_feedback_from(&cfg, lambda, mode, alpha0, max_iter, tol)?;
    let report = evaluate_conditions(&cfg, offers.mu, kappa, a)?;
    let [t_var, t_delta, t_omega] = report.variance_thresholds;
    let summary = [
        ("mode", mode_name(mode).to_string()),
        ("lambda", lambda.to_string()),
        ("ratio", cfg.ratio().to_string()),
        ("equilibria", points.len().to_string()),
        ("iterated_alpha", path.last.alpha.to_string()),
        ("iterated_sigma_hat2", path.last.sigma_hat2.to_string()),
        ("iterations", path.last.iteration.to_string()),
        ("converged", path.converged.to_string()),
        ("alpha1", opt(report.alpha1)),
        ("alpha2", report.alpha2.to_string()),
        ("unique_full_reliance", report.unique_full_reliance.to_string()),
        ("full_reliance_condition", report.full_reliance_condition.to_string()),
        ("variance_threshold_sigma_z", t_var.to_string()),
        ("variance_threshold_delta", t_delta.to_string()),
        ("variance_threshold_omega", t_omega.to_string()),
        ("full_reliance_hurts", opt(report.full_reliance_hurts)),
        ("viability_holds", report.viability_holds.to_string()),
        ("band_holds", report.band_holds.to_string()),
        ("alpha_star", report.payoff.alpha_star.to_string()),
        ("pi_no_ml", report.payoff.pi_no_ml.to_string()),
        ("pi_equilibrium", report.payoff.pi_equilibrium.to_string()),
        ("gamma_kappa", report.payoff.gamma_kappa.to_string()),
        ("omega_kappa", report.payoff.omega_kappa.to_string()),
    ];
    let (table, mut lines) = quantity_table("equilibrium_report.csv", &summary)?;
    for e in &points {
        lines.push(format!(
            "equilibrium alpha = {} ({}, slope {}, multiplicity {})",
            e.alpha,
            e.stability.as_str(),
            e.map_slope,
            e.multiplicity
        ));
    }
    Ok(Output {
        artifacts: vec![
            Artifact {
                name: "equilibrium.csv".into(),
                contents: csv_text(&EQUILIBRIUM_COLUMNS, &rows)?,
            },
            table,
        ],
        report: lines,
    })
}

/// Simulation settings from `[market]`, `[ml]`, `[feedback]` and `[loop]`.
pub fn loop_scenario(s: &Scenario, seed: u64) -> Result<LoopScenario, CliError> {
    let (offers, c, kappa) = market(s)?;
    let ml_cfg = ml_config(s)?;
    let training = match s.choice_or("loop", "training", "all")? {
        "holdout" => Training::HoldOut {
            fraction: s.float("loop", "holdout_fraction")?,
        },
        _ => Training::AllSales,
    };
    let scenario = LoopScenario {
        n_homes: s.int("loop", "n_homes")? as usize,
        periods: s.int("loop", "periods")? as usize,
        ml_cfg,
        offer_sigma: offers.sigma,
        base_value: s.float_or("loop", "base_value", offers.mu)?,
        seller: seller(s, c, kappa)?,
        lambda_adoption: s.float_or("feedback", "lambda", 1.0)?,
        reliance_mode: match s.choice_or("loop", "reliance", "displayed")? {
            "rational" => RelianceMode::Rational,
            _ => RelianceMode::Displayed,
        },
        reset_rule: TrustResetRule {
            enabled: s.bool_or("loop", "trust_reset", false)?,
            stale_threshold_periods: u32::try_from(s.int_or("loop", "stale_threshold", 3)?)
                .map_err(|_| CliError::Config("[loop] stale_threshold is too large".into()))?,
            reset_alpha_to: s.float_or("loop", "reset_alpha_to", 0.0)?,
            audit_ratio: s.float_or("loop", "audit_ratio", 2.0)?,
        },
        training,
        window: s.int_or("loop", "window", 1)? as usize,
        initial_noise2: s.float_or("loop", "initial_noise2", 0.0)?,
        rng_seed: seed,
    };
    scenario.validate()?;
    Ok(scenario)
}

fn cycle_options(s: &Scenario) -> Result<CycleOptions, CliError> {
    let d = CycleOptions::default();
    Ok(CycleOptions {
        burn_in: s.int_or("loop", "burn_in", d.burn_in as u64)? as usize,
        min_swing: s.float_or("loop", "min_swing", d.min_swing)?,
        relative_swing: s.float_or("loop", "relative_swing", d.relative_swing)?,
    })
}

/// Post-burn-in summaries of one run.
struct LoopStats {
    mean_alpha: f64,
    mean_overconfidence: f64,
    cycles: usize,
    amplitude: f64,
    period: f64,
    mean_abs_price_error: f64,
    resets: usize,
    gap_violations: usize,
}

fn loop_stats(records: &[LoopRecord], opts: &CycleOptions) -> Result<LoopStats, CliError> {
    let cycles = overconfidence_cycles(records, opts)?;
    let tail = &records[opts.burn_in.min(records.len())..];
    let mean = |f: fn(&LoopRecord) -> f64| tail.iter().map(f).sum::<f64>() / tail.len().max(1) as f64;
    Ok(LoopStats {
        mean_alpha: mean(|r| r.alpha),
        mean_overconfidence: mean(|r| r.overconfidence),
        cycles: cycles.count,
        amplitude: cycles.mean_amplitude,
        period: cycles.mean_period,
        mean_abs_price_error: mean(|r| r.mean_abs_price_error),
        resets: records.iter().filter(|r| r.reset).count(),
        gap_violations: records
            .iter()
            .filter(|r| r.mean_price_gap.abs() > 3.0 * r.price_gap_se)
            .count(),
    })
}

pub fn run_loop_command(s: &Scenario, seed: u64) -> Result<Output, CliError> {
    let scenario = loop_scenario(s, seed)?;
    let opts = cycle_options(s)?;
    let records = run_loop(&scenario)?;
    let st = loop_stats(&records, &opts)?;
    let mut series = Vec::new();
    write_loop_csv(&records, &mut series)?;
    let rows = [
        ("periods", records.len().to_string()),
        ("mean_alpha", st.mean_alpha.to_string()),
        ("mean_overconfidence", st.mean_overconfidence.to_string()),
        ("cycle_count", st.cycles.to_string()),
        ("cycle_amplitude", st.amplitude.to_string()),
        ("cycle_period", st.period.to_string()),
        ("mean_abs_price_error", st.mean_abs_price_error.to_string()),
        ("resets", st.resets.to_string()),
        ("price_gap_violations", st.gap_violations.to_string()),
    ];
    let (summary, report) = quantity_table("loop_summary.csv", &rows)?;
    Ok(Output {
        artifacts: vec![
            Artifact {
                name: "loop_timeseries.csv".into(),
                contents: utf8(series)?,
            },
            summary,
        ],
        report,
    })
}

pub fn mdp(s: &Scenario, seed: u64) -> Result<Output, CliError> {
    let params = FullModelParams::new(
        s.float("market", "mu")?,
        s.float("mdp", "sigma_b")?,
        s.float("mdp", "sigma_s0")?,
        s.float("mdp", "signal_kappa")?,
        s.float_or("market", "flow_r", 0.0)?,
        s.float("market", "cost_c")?,
        s.float("market", "discount_gamma")?,
    )?;
    let mut grid = GridSpec::for_params(
        &params,
        s.int_or("mdp", "n_mu", 81)? as usize,
        s.int_or("mdp", "n_sigma", 21)? as usize,
    );
    grid.quadrature_nodes = s.int_or("mdp", "quadrature_nodes", grid.quadrature_nodes as u64)? as usize;
    grid.tol = s.float_or("mdp", "tol", grid.tol)?;
    grid.max_iter = s.int_or("mdp", "max_iter", grid.max_iter as u64)? as usize;
    let solution = solve_mdp(&params, &grid)?;
    let paths = s.int_or("mdp", "paths", 20_000)?;
    let trajectory = simulate_policy(&solution, &params, paths, seed)?;
    let mut policy = Vec::new();
    write_policy_csv(&solution, &mut policy)?;
    let mut traj = Vec::new();
    write_trajectory_csv(&trajectory, &mut traj)?;
    let rows = [
        ("iterations", solution.iterations.to_string()),
        ("final_residual", opt(solution.residuals.last())),
        ("outside_x", params.outside_x.to_string()),
        ("paths", trajectory.n_paths.to_string()),
        ("mean_payoff", trajectory.mean_payoff.to_string()),
        ("payoff_std_error", trajectory.payoff_std_error.to_string()),
        ("exit_at_entry", trajectory.exit_at_entry.to_string()),
        ("mean_first_list_price", trajectory.mean_first_list_price.to_string()),
    ];
    let (summary, report) = quantity_table("mdp_summary.csv", &rows)?;
    Ok(Output {
        artifacts: vec![
            Artifact {
                name: "mdp_policy.csv".into(),
                contents: utf8(policy)?,
            },
            Artifact {
                name: "mdp_trajectory.csv".into(),
                contents: utf8(traj)?,
            },
            summary,
        ],
        report,
    })
}

/// Where a swept key lands in the scenario.
fn sweep_target(key: &str) -> (&'static str, bool) {
    match key {
        "n_training" | "q_clusters" => ("ml", true),
        "sigma_rw2" | "delta" | "sigma_e2" => ("ml", false),
        "risk_aversion_a" | "kappa" => ("market", false),
        _ => ("feedback", false),
    }
}

/// The swept axes in declaration order and the cross product of their values.
pub fn sweep_grid(s: &Scenario) -> Result<(Vec<&'static str>, Vec<Vec<f64>>), CliError> {
    let mut axes = Vec::new();
    let mut values: Vec<&[f64]> = Vec::new();
    for spec in KEYS.iter().filter(|k| k.section == "sweep" && k.kind == Kind::List) {
        if let Some(xs) = s.list("sweep", spec.key)? {
            if xs.is_empty() {
                return Err(CliError::Usage(format!("sweep grid `{}` is empty", spec.key)));
            }
            if sweep_target(spec.key).1 && xs.iter().any(|x| x.fract() != 0.0 || *x < 0.0) {
                return Err(CliError::Config(format!("[sweep] {} must list non-negative integers", spec.key)));
            }
            axes.push(spec.key);
            values.push(xs);
        }
    }
    if axes.is_empty() {
        return Err(CliError::Usage("the [sweep] section lists no grid".into()));
    }
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for xs in values {
        points = points
            .into_iter()
            .flat_map(|p| {
                xs.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    Ok((axes, points))
}

fn apply_point(base: &Scenario, axes: &[&str], point: &[f64]) -> Result<Scenario, CliError> {
    let mut s = base.clone();
    for (key, &x) in axes.iter().zip(point) {
        let (section, integral) = sweep_target(key);
        let value = if integral { Value::Int(x as u64) } else { Value::Float(x) };
        if *key == "kappa" {
            s.remove("market", "cost_c");
        }
        s.set(section, key, value)?;
    }
    Ok(s)
}

const EQ_SWEEP_COLUMNS: [&str; 15] = [
    "ratio",
    "n_equilibria",
    "equilibria",
    "stability",
    "alpha1",
    "alpha2",
    "unique_full_reliance",
    "full_reliance_condition",
    "full_reliance_hurts",
    "viability_holds",
    "band_holds",
    "alpha_star",
    "pi_no_ml",
    "pi_equilibrium",
    "gamma_kappa",
];

fn equilibrium_point(s: &Scenario) -> Result<Vec<String>, CliError> {
    let cfg = ml_config(s)?;
    let (offers, _, kappa) = market(s)?;
    let a = s.float_or("market", "risk_aversion_a", 0.0)?;
    let lambda = s.float_or("feedback", "lambda", 1.0)?;
    let points = solve_fixed_points(&cfg, lambda, iteration_mode(s)?)?;
    let r = evaluate_conditions(&cfg, offers.mu, kappa, a)?;
    let join = |f: &dyn Fn(&Equilibrium) -> String| points.iter().map(f).collect::<Vec<_>>().join(";");
    Ok(vec![
        cfg.ratio().to_string(),
        points.len().to_string(),
        join(&|e| e.alpha.to_string()),
        join(&|e| e.stability.as_str().to_string()),
        opt(r.alpha1),
        r.alpha2.to_string(),
        r.unique_full_reliance.to_string(),
        r.full_reliance_condition.to_string(),
        opt(r.full_reliance_hurts),
        r.viability_holds.to_string(),
        r.band_holds.to_string(),
        r.payoff.alpha_star.to_string(),
        r.payoff.pi_no_ml.to_string(),
        r.payoff.pi_equilibrium.to_string(),
        r.payoff.gamma_kappa.to_string(),
    ])
}

const LOOP_SWEEP_COLUMNS: [&str; 8] = [
    "replicates",
    "mean_alpha",
    "mean_overconfidence",
    "cycle_count",
    "cycle_amplitude",
    "mean_abs_price_error",
    "resets",
    "price_gap_violations",
];

fn loop_point(s: &Scenario, axes: &[&str], seed: u64) -> Result<Vec<String>, CliError> {
    if let Some(k) = axes.iter().find(|k| matches!(**k, "delta" | "sigma_e2")) {
        return Err(CliError::Config(format!(
            "{k} is set by the offer model in the loop; sweep [market] sigma instead"
        )));
    }
    let replicates = s.int_or("sweep", "replicates", 1)?.max(1);
    let opts = cycle_options(s)?;
    let mut acc = [0.0f64; 7];
    for r in 0..replicates {
        let scenario = loop_scenario(s, derive_seed(seed, "sweep-replicate", r))?;
        let st = loop_stats(&run_loop(&scenario)?, &opts)?;
        for (slot, v) in acc.iter_mut().zip([
            st.mean_alpha,
            st.mean_overconfidence,
            st.cycles as f64,
            st.amplitude,
            st.mean_abs_price_error,
            st.resets as f64,
            st.gap_violations as f64,
        ]) {
            *slot += v / replicates as f64;
        }
    }
    let mut row = vec![replicates.to_string()];
    row.extend(acc.iter().map(|v| v.to_string()));
    Ok(row)
}

pub fn sweep(s: &Scenario, seed: u64) -> Result<Output, CliError> {
    let (axes, points) = sweep_grid(s)?;
    let target = s.choice_or("sweep", "target", "equilibrium")?;
    let columns: &[&str] = if target == "loop" {
        &LOOP_SWEEP_COLUMNS
    } else {
        &EQ_SWEEP_COLUMNS
    };
    let results: Vec<Result<Vec<String>, CliError>> = points
        .par_iter()
        .map(|p| {
            let point = apply_point(s, &axes, p)?;
            if target == "loop" {
                loop_point(&point, &axes, seed)
            } else {
                equilibrium_point(&point)
            }
        })
        .collect();
    if let Some(Err(first)) = results.iter().find(|r| r.is_err()) {
        if results.iter().all(|r| r.is_err()) {
            return Err(match first {
                CliError::Config(m) => CliError::Config(format!("every sweep point failed; first: {m}")),
                CliError::Usage(m) => CliError::Usage(m.clone()),
                other => CliError::Numerical(format!("every sweep point failed; first: {other}")),
            });
        }
    }
    let mut header = vec!["point"];
    header.extend(axes.iter().copied());
    header.extend(columns.iter().copied());
    header.push("error");
    let mut failed = 0;
    let rows: Vec<Vec<String>> = points
        .iter()
        .zip(results)
        .enumerate()
        .map(|(i, (p, r))| {
            let mut row = vec![i.to_string()];
            row.extend(p.iter().map(|x| x.to_string()));
            match r {
                Ok(cells) => {
                    row.extend(cells);
                    row.push(String::new());
                }
                Err(e) => {
                    failed += 1;
                    row.extend(columns.iter().map(|_| String::new()));
                    row.push(e.to_string());
                }
            }
            row
        })
        .collect();
    let report = vec![format!(
        "{} sweep over {}: {} points, {} failed",
        target,
        axes.join(" x "),
        points.len(),
        failed
    )];
    Ok(Output {
        artifacts: vec![Artifact {
            name: "sweep.csv".into(),
            contents: csv_text(&header, &rows)?,
        }],
        report,
    })
}
