//! Scenario files.
//!
//! A scenario is flat sectioned `key = value` text. Keys outside any section
//! are global (only `seed`). Lines starting with `#` or `;` are comments.
//! Every key is declared in [`KEYS`] with its type and unit; anything else is
//! rejected.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::CliError;

/// Value type of a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Float,
    Int,
    Bool,
    Choice(&'static [&'static str]),
    /// Comma-separated floats; may be empty.
    List,
}

/// Declaration of one scenario key.
#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub section: &'static str,
    pub key: &'static str,
    pub kind: Kind,
    pub unit: &'static str,
    pub doc: &'static str,
}

const fn k(section: &'static str, key: &'static str, kind: Kind, unit: &'static str, doc: &'static str) -> KeySpec {
    KeySpec {
        section,
        key,
        kind,
        unit,
        doc,
    }
}

use Kind::{Bool, Choice, Float, Int, List};

pub const SECTIONS: [&str; 7] = ["", "market", "ml", "feedback", "loop", "mdp", "sweep"];

/// Every accepted key, in serialization order.
pub const KEYS: &[KeySpec] = &[
    k("", "seed", Int, "-", "master seed; every random stream is derived from it"),
    k("market", "mu", Float, "currency", "mean best offer"),
    k("market", "sigma", Float, "currency", "half-width of the uniform offer support"),
    k("market", "cost_c", Float, "currency/period", "market participation cost"),
    k("market", "kappa", Float, "-", "cost coefficient in cost_c = kappa sigma_e"),
    k("market", "risk_aversion_a", Float, "1/currency", "CARA coefficient"),
    k("market", "flow_r", Float, "currency/period", "rental flow while listed"),
    k("market", "discount_gamma", Float, "-", "per-period discount factor"),
    k("market", "alpha", Float, "-", "reliance at which closed forms are evaluated"),
    k("market", "ml_price", Float, "currency", "ML price z shown to the seller"),
    k("market", "games", Int, "count", "Monte Carlo games for simulate"),
    k("ml", "n_training", Int, "count", "training sales N"),
    k("ml", "q_clusters", Int, "count", "clusters Q"),
    k("ml", "feature_dim", Int, "count", "feature dimension of synthetic homes"),
    k("ml", "sigma_rw2", Float, "currency^2", "per-period random-walk variance of values"),
    k("ml", "sigma_v2", Float, "currency^2", "heterogeneity of the housing stock"),
    k("ml", "h_scale", Float, "-", "h(Q) = h_scale / Q"),
    k("ml", "delta", Float, "-", "share of valuation variance in sale prices"),
    k("ml", "sigma_e2", Float, "currency^2", "valuation variance"),
    k("ml", "exact_denominator", Bool, "-", "keep the 1 / (1 - Q alpha^2 / N) factor"),
    k("feedback", "lambda", Float, "-", "adoption multiplier on reliance"),
    k("feedback", "mode", Choice(&["full", "constant", "rational"]), "-", "iteration map"),
    k("feedback", "sigma_hat2_at_zero", Float, "currency^2", "base error of the constant map"),
    k("feedback", "alpha0", Float, "-", "starting reliance of the iteration"),
    k("feedback", "max_iter", Int, "count", "iteration cap"),
    k("feedback", "tol", Float, "-", "convergence tolerance on alpha"),
    k("loop", "n_homes", Int, "count", "homes in the market"),
    k("loop", "periods", Int, "count", "simulated periods"),
    k("loop", "base_value", Float, "currency", "initial mean home value"),
    k("loop", "reliance", Choice(&["displayed", "rational"]), "-", "error sellers react to"),
    k("loop", "trust_reset", Bool, "-", "enable the trust-reset rule"),
    k("loop", "stale_threshold", Int, "periods", "consecutive stale periods before a reset"),
    k("loop", "reset_alpha_to", Float, "-", "reliance after a reset"),
    k("loop", "audit_ratio", Float, "-", "true/reported error ratio counted as stale"),
    k("loop", "training", Choice(&["all", "holdout"]), "-", "sales used for training"),
    k("loop", "holdout_fraction", Float, "-", "share of sellers who ignore the ML price"),
    k("loop", "window", Int, "periods", "periods pooled into the reported error"),
    k("loop", "initial_noise2", Float, "currency^2", "first-period ML price noise"),
    k("loop", "burn_in", Int, "periods", "periods skipped by summaries"),
    k("loop", "min_swing", Float, "-", "absolute swing that counts as a cycle"),
    k("loop", "relative_swing", Float, "-", "relative swing that counts as a cycle"),
    k("mdp", "sigma_b", Float, "currency", "offer standard deviation"),
    k("mdp", "sigma_s0", Float, "currency", "initial belief standard deviation"),
    k("mdp", "signal_kappa", Float, "-", "signal variance in units of sigma_b^2"),
    k("mdp", "n_mu", Int, "count", "grid points on the belief mean"),
    k("mdp", "n_sigma", Int, "count", "grid points on the belief spread"),
    k("mdp", "quadrature_nodes", Int, "count", "Gauss-Hermite nodes"),
    k("mdp", "tol", Float, "currency", "sup-norm tolerance of value iteration"),
    k("mdp", "max_iter", Int, "count", "value iteration cap"),
    k("mdp", "paths", Int, "count", "simulated seller paths"),
    k("sweep", "target", Choice(&["equilibrium", "loop"]), "-", "what each grid point runs"),
    k("sweep", "replicates", Int, "count", "seeds per loop grid point"),
    k("sweep", "n_training", List, "count", "grid over N"),
    k("sweep", "q_clusters", List, "count", "grid over Q"),
    k("sweep", "sigma_rw2", List, "currency^2", "grid over the random-walk variance"),
    k("sweep", "delta", List, "-", "grid over delta"),
    k("sweep", "risk_aversion_a", List, "1/currency", "grid over a"),
    k("sweep", "kappa", List, "-", "grid over kappa"),
    k("sweep", "sigma_e2", List, "currency^2", "grid over sigma_e^2"),
    k("sweep", "lambda", List, "-", "grid over lambda"),
];

pub fn spec(section: &str, key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|s| s.section == section && s.key == key)
}

/// A typed scenario value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Int(u64),
    Bool(bool),
    Choice(String),
    List(Vec<f64>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Float(x) => write!(f, "{x}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Choice(s) => f.write_str(s),
            Value::List(xs) => {
                let parts: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
                f.write_str(&parts.join(", "))
            }
        }
    }
}

fn parse_float(text: &str) -> Option<f64> {
    text.parse::<f64>().ok().filter(|x| x.is_finite())
}

impl Value {
    pub fn parse(kind: Kind, text: &str) -> Result<Value, String> {
        match kind {
            Float => parse_float(text).map(Value::Float).ok_or_else(|| format!("expected a finite number, got `{text}`")),
            Int => text.parse().map(Value::Int).map_err(|_| format!("expected a non-negative integer, got `{text}`")),
            Bool => match text {
                "true" => Ok(Value::Bool(true)),
                "false" => Ok(Value::Bool(false)),
                _ => Err(format!("expected true or false, got `{text}`")),
            },
            Choice(options) => {
                if options.contains(&text) {
                    Ok(Value::Choice(text.to_string()))
                } else {
                    Err(format!("expected one of {}, got `{text}`", options.join(", ")))
                }
            }
            List => {
                if text.is_empty() {
                    return Ok(Value::List(Vec::new()));
                }
                text.split(',')
                    .map(|p| parse_float(p.trim()).ok_or_else(|| format!("bad list entry `{}`", p.trim())))
                    .collect::<Result<Vec<_>, _>>()
                    .map(Value::List)
            }
        }
    }

    pub fn kind_matches(&self, kind: Kind) -> bool {
        match (self, kind) {
            (Value::Float(x), Float) => x.is_finite(),
            (Value::Int(_), Int) | (Value::Bool(_), Bool) => true,
            (Value::Choice(s), Choice(options)) => options.contains(&s.as_str()),
            (Value::List(xs), List) => xs.iter().all(|x| x.is_finite()),
            _ => false,
        }
    }
}

/// A parsed scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scenario {
    values: BTreeMap<(&'static str, &'static str), Value>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, CliError> {
        let mut out = Scenario::default();
        let mut section: &'static str = "";
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let bad = |msg: String| CliError::Config(format!("line {line_no}: {msg}"));
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| bad(format!("unterminated section header `{line}`")))?
                    .trim();
                section = SECTIONS
                    .iter()
                    .copied()
                    .find(|s| !s.is_empty() && *s == name)
                    .ok_or_else(|| bad(format!("unknown section [{name}]")))?;
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let ks = spec(section, key).ok_or_else(|| bad(format!("unknown key `{key}` in {}", label(section))))?;
            let v = Value::parse(ks.kind, value).map_err(|m| bad(format!("{}: {m}", ks.key)))?;
            if out.values.insert((ks.section, ks.key), v).is_some() {
                return Err(bad(format!("duplicate key `{key}` in {}", label(section))));
            }
        }
        Ok(out)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for section in SECTIONS {
            let entries: Vec<_> = KEYS
                .iter()
                .filter(|s| s.section == section)
                .filter_map(|s| self.values.get(&(s.section, s.key)).map(|v| (s.key, v)))
                .collect();
            if entries.is_empty() {
                continue;
            }
            if !section.is_empty() {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{section}]\n"));
            }
            for (key, v) in entries {
                let text = v.to_string();
                if text.is_empty() {
                    out.push_str(&format!("{key} =\n"));
                } else {
                    out.push_str(&format!("{key} = {text}\n"));
                }
            }
        }
        out
    }

    /// Set a declared key; the value must match its kind.
    pub fn set(&mut self, section: &str, key: &str, value: Value) -> Result<(), CliError> {
        let ks = spec(section, key)
            .ok_or_else(|| CliError::Config(format!("unknown key `{key}` in {}", label(section))))?;
        if !value.kind_matches(ks.kind) {
            return Err(CliError::Config(format!("{} {key}: value `{value}` has the wrong type", label(section))));
        }
        self.values.insert((ks.section, ks.key), value);
        Ok(())
    }

    pub fn remove(&mut self, section: &str, key: &str) -> Option<Value> {
        let ks = spec(section, key)?;
        self.values.remove(&(ks.section, ks.key))
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.values
            .iter()
            .find(|((s, k), _)| *s == section && *k == key)
            .map(|(_, v)| v)
    }

    pub fn has(&self, section: &str, key: &str) -> bool {
        self.get(section, key).is_some()
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.values.keys().any(|(s, _)| *s == section)
    }

    fn missing(section: &str, key: &str) -> CliError {
        CliError::Config(format!("missing key `{key}` in {}", label(section)))
    }

    pub fn float(&self, section: &str, key: &str) -> Result<f64, CliError> {
        self.float_opt(section, key)?.ok_or_else(|| Self::missing(section, key))
    }

    pub fn float_opt(&self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(v) => Err(CliError::Config(format!("{} {key}: unexpected value `{v}`", label(section)))),
        }
    }

    pub fn float_or(&self, section: &str, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.float_opt(section, key)?.unwrap_or(default))
    }

    pub fn int(&self, section: &str, key: &str) -> Result<u64, CliError> {
        self.int_opt(section, key)?.ok_or_else(|| Self::missing(section, key))
    }

    pub fn int_opt(&self, section: &str, key: &str) -> Result<Option<u64>, CliError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::Int(n)) => Ok(Some(*n)),
            Some(v) => Err(CliError::Config(format!("{} {key}: unexpected value `{v}`", label(section)))),
        }
    }

    pub fn int_or(&self, section: &str, key: &str, default: u64) -> Result<u64, CliError> {
        Ok(self.int_opt(section, key)?.unwrap_or(default))
    }

    pub fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool, CliError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(Value::Bool(b)) => Ok(*b),
            Some(v) => Err(CliError::Config(format!("{} {key}: unexpected value `{v}`", label(section)))),
        }
    }

    pub fn choice_or<'a>(&'a self, section: &str, key: &str, default: &'a str) -> Result<&'a str, CliError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(Value::Choice(s)) => Ok(s),
            Some(v) => Err(CliError::Config(format!("{} {key}: unexpected value `{v}`", label(section)))),
        }
    }

    pub fn list(&self, section: &str, key: &str) -> Result<Option<&[f64]>, CliError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::List(xs)) => Ok(Some(xs)),
            Some(v) => Err(CliError::Config(format!("{} {key}: unexpected value `{v}`", label(section)))),
        }
    }
}

pub fn label(section: &str) -> String {
    if section.is_empty() {
        "the global section".to_string()
    } else {
        format!("[{section}]")
    }
}
