//! Flat `key = value` scenario files.
//!
//! ```text
//! # strong epidemic
//! beta = 1.2
//! gamma = 0.1
//! budget_fraction = 0.125
//! ```
//!
//! `#` starts a comment. Keys are case-sensitive; unknown and repeated keys
//! are rejected. Unset keys take the reference values (`T = 5`,
//! `u_max = 0.06`, `s0 = 0.01`, `alpha = 0.5`, `gamma = 0.1`, `beta = 0.8`,
//! `budget_fraction = 0.125`).

use std::fmt::{self, Write as _};
use std::sync::Arc;

use crate::control::{quadratic_cost, ControlBudget, CostFunction, PowerCost};
use crate::error::{Error, Result};
use crate::experiments::{linspace, Scenario, SweepParameter, SweepSpec};
use crate::model::{EpidemicParams, SpreadingProfile};
use crate::sweep::SweepConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Constant,
    LogisticIncreasing,
    LogisticDecreasing,
}

impl ProfileKind {
    fn name(&self) -> &'static str {
        match self {
            ProfileKind::Constant => "constant",
            ProfileKind::LogisticIncreasing => "logistic_increasing",
            ProfileKind::LogisticDecreasing => "logistic_decreasing",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ProfileKind::Constant),
            "logistic_increasing" => Ok(ProfileKind::LogisticIncreasing),
            "logistic_decreasing" => Ok(ProfileKind::LogisticDecreasing),
            _ => Err(Error::param(
                "profile",
                format!("`{s}` is not one of constant, logistic_increasing, logistic_decreasing"),
            )),
        }
    }
}

/// Budget given either absolutely or as a share of `c(u_max) T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BudgetSpec {
    Absolute(f64),
    Fraction(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepValues {
    Linspace { start: f64, stop: f64, count: usize },
    List(Vec<f64>),
}

impl SweepValues {
    pub fn values(&self) -> Vec<f64> {
        match self {
            SweepValues::Linspace { start, stop, count } => linspace(*start, *stop, *count),
            SweepValues::List(v) => v.clone(),
        }
    }

    fn parse(text: &str) -> Result<Self> {
        let bad = |why: &str| Error::param("sweep_values", why.to_string());
        if let Some(inner) = text.strip_prefix("linspace(").and_then(|r| r.strip_suffix(')')) {
            let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(bad("linspace takes (start, stop, count)"));
            }
            let start = parse_f64("sweep_values", parts[0])?;
            let stop = parse_f64("sweep_values", parts[1])?;
            let count = parts[2]
                .parse::<usize>()
                .map_err(|_| bad("linspace count must be a positive integer"))?;
            if count == 0 {
                return Err(bad("linspace count must be a positive integer"));
            }
            return Ok(SweepValues::Linspace { start, stop, count });
        }
        let list = text
            .split(',')
            .map(|p| parse_f64("sweep_values", p.trim()))
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepValues::List(list))
    }
}

impl fmt::Display for SweepValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValues::Linspace { start, stop, count } => write!(f, "linspace({start:?}, {stop:?}, {count})"),
            SweepValues::List(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                f.write_str(&parts.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub profile: ProfileKind,
    pub beta: f64,
    pub beta_m: f64,
    pub beta_big_m: f64,
    pub a1: f64,
    pub c1: f64,
    pub a2: f64,
    pub c2: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub s0: f64,
    pub horizon: f64,
    pub u_max: f64,
    pub budget: BudgetSpec,
    /// Exponent `p` of `c(u) = u^p`; 2 is the quadratic cost.
    pub cost_exponent: f64,
    pub lambda_low: f64,
    pub lambda_high: f64,
    pub budget_tol: f64,
    pub lambda_tol: f64,
    pub n_sweep: usize,
    pub theta: f64,
    pub n_steps: usize,
    pub sweep_param: Option<SweepParameter>,
    pub sweep_values: Option<SweepValues>,
    pub oracle_segments: usize,
    pub oracle_levels: usize,
    pub control_file: Option<String>,
    pub output: Option<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let solver = SweepConfig::default();
        ScenarioConfig {
            profile: ProfileKind::Constant,
            beta: 0.8,
            beta_m: 0.01,
            beta_big_m: 2.0,
            a1: 2.0,
            c1: 3.0,
            a2: 2.0,
            c2: 2.0,
            gamma: 0.1,
            alpha: 0.5,
            s0: 0.01,
            horizon: 5.0,
            u_max: 0.06,
            budget: BudgetSpec::Fraction(0.125),
            cost_exponent: 2.0,
            lambda_low: solver.lambda_low,
            lambda_high: solver.lambda_high,
            budget_tol: solver.budget_tol,
            lambda_tol: solver.lambda_tol,
            n_sweep: solver.n_sweep,
            theta: solver.relaxation,
            n_steps: solver.n_steps,
            sweep_param: None,
            sweep_values: None,
            oracle_segments: 5,
            oracle_levels: 12,
            control_file: None,
            output: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "profile",
    "beta",
    "beta_m",
    "beta_M",
    "a1",
    "c1",
    "a2",
    "c2",
    "gamma",
    "alpha",
    "s0",
    "T",
    "u_max",
    "B",
    "budget_fraction",
    "cost_exponent",
    "lambda_low",
    "lambda_high",
    "B_th",
    "lambda_th",
    "N_sweep",
    "theta",
    "n_steps",
    "sweep_param",
    "sweep_values",
    "oracle_segments",
    "oracle_levels",
    "control_file",
    "output",
];

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| Error::param(key, format!("`{value}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::param(key, format!("`{value}` is not finite")));
    }
    Ok(v)
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::param(key, format!("`{value}` is not a non-negative integer")))
}

/// Splits a document into `(line, key, value)` entries.
fn entries(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Syntax {
                line,
                reason: format!("expected `key = value`, got `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::Syntax {
                line,
                reason: format!("invalid key `{key}`"),
            });
        }
        if value.is_empty() {
            return Err(Error::Syntax {
                line,
                reason: format!("missing value for `{key}`"),
            });
        }
        if out.iter().any(|(_, k, _)| k == key) {
            return Err(Error::Syntax {
                line,
                reason: format!("duplicate key `{key}`"),
            });
        }
        out.push((line, key.to_string(), value.to_string()));
    }
    Ok(out)
}

impl ScenarioConfig {
    /// Parses and validates a configuration document.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    /// Like [`parse`](Self::parse), with `key=value` overrides applied on top.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut kv = entries(text)?;
        for (n, ov) in overrides.iter().enumerate() {
            let Some((key, value)) = ov.split_once('=') else {
                return Err(Error::Syntax {
                    line: 0,
                    reason: format!("override #{} `{ov}` is not `key=value`", n + 1),
                });
            };
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            kv.retain(|(_, k, _)| *k != key);
            kv.push((0, key, value));
        }

        let mut cfg = ScenarioConfig::default();
        let mut absolute = None;
        let mut fraction = None;
        for (_, key, value) in &kv {
            let v = value.as_str();
            match key.as_str() {
                "profile" => cfg.profile = ProfileKind::parse(v)?,
                "beta" => cfg.beta = parse_f64(key, v)?,
                "beta_m" => cfg.beta_m = parse_f64(key, v)?,
                "beta_M" => cfg.beta_big_m = parse_f64(key, v)?,
                "a1" => cfg.a1 = parse_f64(key, v)?,
                "c1" => cfg.c1 = parse_f64(key, v)?,
                "a2" => cfg.a2 = parse_f64(key, v)?,
                "c2" => cfg.c2 = parse_f64(key, v)?,
                "gamma" => cfg.gamma = parse_f64(key, v)?,
                "alpha" => cfg.alpha = parse_f64(key, v)?,
                "s0" => cfg.s0 = parse_f64(key, v)?,
                "T" => cfg.horizon = parse_f64(key, v)?,
                "u_max" => cfg.u_max = parse_f64(key, v)?,
                "B" => absolute = Some(parse_f64(key, v)?),
                "budget_fraction" => fraction = Some(parse_f64(key, v)?),
                "cost_exponent" => cfg.cost_exponent = parse_f64(key, v)?,
                "lambda_low" => cfg.lambda_low = parse_f64(key, v)?,
                "lambda_high" => cfg.lambda_high = parse_f64(key, v)?,
                "B_th" => cfg.budget_tol = parse_f64(key, v)?,
                "lambda_th" => cfg.lambda_tol = parse_f64(key, v)?,
                "N_sweep" => cfg.n_sweep = parse_usize(key, v)?,
                "theta" => cfg.theta = parse_f64(key, v)?,
                "n_steps" => cfg.n_steps = parse_usize(key, v)?,
                "sweep_param" => cfg.sweep_param = Some(v.parse()?),
                "sweep_values" => cfg.sweep_values = Some(SweepValues::parse(v)?),
                "oracle_segments" => cfg.oracle_segments = parse_usize(key, v)?,
                "oracle_levels" => cfg.oracle_levels = parse_usize(key, v)?,
                "control_file" => cfg.control_file = Some(v.to_string()),
                "output" => cfg.output = Some(v.to_string()),
                other => return Err(Error::UnknownKey(other.to_string())),
            }
        }
        cfg.budget = match (absolute, fraction) {
            (Some(_), Some(_)) => {
                return Err(Error::param("B", "give either B or budget_fraction, not both"));
            }
            (Some(b), None) => BudgetSpec::Absolute(b),
            (None, Some(f)) => BudgetSpec::Fraction(f),
            (None, None) => cfg.budget,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario()?;
        if let Some(values) = &self.sweep_values {
            if self.sweep_param.is_none() {
                return Err(Error::param("sweep_param", "required when sweep_values is set"));
            }
            if values.values().is_empty() {
                return Err(Error::param("sweep_values", "value list is empty"));
            }
        }
        Ok(())
    }

    pub fn cost(&self) -> Result<Arc<dyn CostFunction>> {
        if self.cost_exponent == 2.0 {
            Ok(quadratic_cost())
        } else {
            Ok(Arc::new(PowerCost::new(self.cost_exponent)?))
        }
    }

    pub fn profile(&self) -> Result<SpreadingProfile> {
        match self.profile {
            ProfileKind::Constant => SpreadingProfile::constant(self.beta),
            ProfileKind::LogisticIncreasing => {
                SpreadingProfile::logistic_increasing(self.beta_m, self.beta_big_m, self.a1, self.c1)
            }
            ProfileKind::LogisticDecreasing => {
                SpreadingProfile::logistic_decreasing(self.beta_m, self.beta_big_m, self.a2, self.c2)
            }
        }
    }

    pub fn params(&self) -> Result<EpidemicParams> {
        EpidemicParams::new(self.profile()?, self.gamma, self.alpha, self.s0, self.horizon)
    }

    pub fn control_budget(&self) -> Result<ControlBudget> {
        let cost = self.cost()?;
        let budget = match self.budget {
            BudgetSpec::Absolute(b) => ControlBudget::new(cost, self.u_max, b)?,
            BudgetSpec::Fraction(f) => ControlBudget::with_fraction(cost, self.u_max, f, self.horizon)?,
        };
        budget.check_horizon(self.horizon)?;
        Ok(budget)
    }

    pub fn solver(&self) -> Result<SweepConfig> {
        let cfg = SweepConfig {
            lambda_low: self.lambda_low,
            lambda_high: self.lambda_high,
            budget_tol: self.budget_tol,
            lambda_tol: self.lambda_tol,
            n_sweep: self.n_sweep,
            relaxation: self.theta,
            n_steps: self.n_steps,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Ok(Scenario {
            params: self.params()?,
            budget: self.control_budget()?,
            solver: self.solver()?,
        })
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let parameter = self
            .sweep_param
            .ok_or_else(|| Error::param("sweep_param", "a sweep needs sweep_param and sweep_values"))?;
        let values = self
            .sweep_values
            .as_ref()
            .ok_or_else(|| Error::param("sweep_values", "a sweep needs sweep_param and sweep_values"))?
            .values();
        let spec = SweepSpec {
            parameter,
            values,
            base: self.scenario()?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Canonical document listing every key; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("profile", self.profile.name().into());
        put("beta", format!("{:?}", self.beta));
        put("beta_m", format!("{:?}", self.beta_m));
        put("beta_M", format!("{:?}", self.beta_big_m));
        put("a1", format!("{:?}", self.a1));
        put("c1", format!("{:?}", self.c1));
        put("a2", format!("{:?}", self.a2));
        put("c2", format!("{:?}", self.c2));
        put("gamma", format!("{:?}", self.gamma));
        put("alpha", format!("{:?}", self.alpha));
        put("s0", format!("{:?}", self.s0));
        put("T", format!("{:?}", self.horizon));
        put("u_max", format!("{:?}", self.u_max));
        match self.budget {
            BudgetSpec::Absolute(b) => put("B", format!("{b:?}")),
            BudgetSpec::Fraction(f) => put("budget_fraction", format!("{f:?}")),
        }
        put("cost_exponent", format!("{:?}", self.cost_exponent));
        put("lambda_low", format!("{:?}", self.lambda_low));
        put("lambda_high", format!("{:?}", self.lambda_high));
        put("B_th", format!("{:?}", self.budget_tol));
        put("lambda_th", format!("{:?}", self.lambda_tol));
        put("N_sweep", self.n_sweep.to_string());
        put("theta", format!("{:?}", self.theta));
        put("n_steps", self.n_steps.to_string());
        if let Some(p) = self.sweep_param {
            put("sweep_param", p.name().into());
        }
        if let Some(v) = &self.sweep_values {
            put("sweep_values", v.to_string());
        }
        put("oracle_segments", self.oracle_segments.to_string());
        put("oracle_levels", self.oracle_levels.to_string());
        if let Some(c) = &self.control_file {
            put("control_file", c.clone());
        }
        if let Some(o) = &self.output {
            put("output", o.clone());
        }
        s
    }
}

/// Free function form of [`ScenarioConfig::parse`].
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    ScenarioConfig::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn empty_document_gives_reference_defaults() {
        let cfg = parse_config("").unwrap();
        let b = cfg.control_budget().unwrap();
        assert_abs_diff_eq!(b.budget, 0.06 * 0.06 * 5.0 / 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.budget, 0.00225, epsilon = 1e-15);
        let p = cfg.params().unwrap();
        assert_eq!(p.horizon, 5.0);
        assert_eq!(p.s0, 0.01);
        assert_eq!(p.alpha, 0.5);
        assert_eq!(p.gamma, 0.1);
        assert_eq!(p.beta(0.0), 0.8);
        assert_eq!(cfg.n_steps, 1000);
    }

    #[test]
    fn range_errors_name_the_key() {
        for (doc, key) in [
            ("gamma = -1", "gamma"),
            ("s0 = 1.5", "s0"),
            ("T = 0", "T"),
            ("u_max = 0", "u_max"),
            ("theta = 2", "theta"),
            ("budget_fraction = 1.5", "budget_fraction"),
            ("beta = abc", "beta"),
        ] {
            match parse_config(doc) {
                Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, key, "{doc}"),
                other => panic!("{doc}: {other:?}"),
            }
        }
    }

    #[test]
    fn syntax_and_key_errors() {
        assert!(matches!(parse_config("beta 1.2"), Err(Error::Syntax { line: 1, .. })));
        assert!(matches!(parse_config("\n\nbeta ="), Err(Error::Syntax { line: 3, .. })));
        assert!(matches!(
            parse_config("beta = 1\nbeta = 2"),
            Err(Error::Syntax { line: 2, .. })
        ));
        assert_eq!(parse_config("kappa = 3"), Err(Error::UnknownKey("kappa".into())));
        assert!(matches!(parse_config("Beta = 3"), Err(Error::UnknownKey(_))));
        assert!(parse_config("B = 0.001\nbudget_fraction = 0.1").is_err());
    }

    #[test]
    fn comments_and_whitespace() {
        let cfg = parse_config("# header\n  beta = 1.2   # strong\n\ngamma=0.1\n").unwrap();
        assert_eq!(cfg.beta, 1.2);
    }

    #[test]
    fn increasing_profile() {
        let cfg = parse_config("profile = logistic_increasing\nbeta_m = 0.01\nbeta_M = 2\na1 = 2\nc1 = 3").unwrap();
        assert_eq!(
            cfg.profile().unwrap(),
            SpreadingProfile::logistic_increasing(0.01, 2.0, 2.0, 3.0).unwrap()
        );
        assert!(parse_config("profile = wavy").is_err());
    }

    #[test]
    fn overrides_replace_file_values() {
        let cfg = ScenarioConfig::parse_with_overrides("beta = 1.2", &["beta=0.2".into(), "B=0".into()]).unwrap();
        assert_eq!(cfg.beta, 0.2);
        assert_eq!(cfg.budget, BudgetSpec::Absolute(0.0));
        assert!(ScenarioConfig::parse_with_overrides("", &["beta".into()]).is_err());
    }

    #[test]
    fn sweep_keys() {
        let cfg = parse_config("sweep_param = gamma\nsweep_values = linspace(0.1, 6, 15)").unwrap();
        let spec = cfg.sweep_spec().unwrap();
        assert_eq!(spec.values.len(), 15);
        let cfg = parse_config("sweep_param = alpha\nsweep_values = 0, 0.5, 1").unwrap();
        assert_eq!(cfg.sweep_spec().unwrap().values, vec![0.0, 0.5, 1.0]);
        assert!(parse_config("sweep_values = 1, 2").is_err());
        assert!(parse_config("sweep_param = gamma\nsweep_values = linspace(1, 2)").is_err());
        assert!(parse_config("sweep_param = gamma\nsweep_values = 1, 0.5")
            .unwrap()
            .sweep_spec()
            .is_err());
    }

    prop_compose! {
        fn arb_config()(
            beta in 0.0..5.0f64, gamma in 0.0..6.0f64, alpha in 0.0..2.0f64,
            s0 in 0.001..0.9f64, horizon in 0.5..20.0f64, u_max in 0.01..1.0f64,
            frac in 0.0..1.0f64, use_abs in any::<bool>(), theta in 0.01..1.0f64,
            n_steps in 1usize..5000, kind in 0usize..3, exponent in 1.5..3.0f64,
            with_sweep in any::<bool>(), out in "[a-z]{1,8}\\.csv",
        ) -> ScenarioConfig {
            let profile = [ProfileKind::Constant, ProfileKind::LogisticIncreasing, ProfileKind::LogisticDecreasing][kind];
            let budget = if use_abs {
                BudgetSpec::Absolute(frac * u_max.powf(exponent) * horizon)
            } else {
                BudgetSpec::Fraction(frac)
            };
            ScenarioConfig {
                profile, beta, gamma, alpha, s0, horizon, u_max, budget, theta, n_steps,
                cost_exponent: exponent,
                sweep_param: with_sweep.then_some(SweepParameter::Alpha),
                sweep_values: with_sweep.then(|| SweepValues::List(vec![0.0, alpha + 0.5])),
                output: Some(out),
                ..ScenarioConfig::default()
            }
        }
    }

    proptest! {
        #[test]
        fn text_roundtrip(cfg in arb_config()) {
            let text = cfg.to_text();
            let back = parse_config(&text).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
