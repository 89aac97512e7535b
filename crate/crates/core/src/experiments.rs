//! Parameter sweeps and control-shape studies.
//!
//! Each sweep varies one parameter of a base scenario and compares the
//! optimal, static and no-control strategies. Rows are independent and are
//! evaluated through [`crate::parallel`]; output order follows the value list.

use std::fmt;
use std::str::FromStr;

use crate::baselines::{evaluate_strategy, no_control, static_control};
use crate::control::{quadratic_cost, ControlBudget, ControlSignal};
use crate::error::{Error, Result};
use crate::integrator::TimeGrid;
use crate::model::{EpidemicParams, SpreadingProfile};
use crate::parallel::{self, Execution};
use crate::sweep::{solve_optimal, SolveResult, SweepConfig};

/// Parameters, budget and solver settings of one problem instance.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: EpidemicParams,
    pub budget: ControlBudget,
    pub solver: SweepConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.solver.validate()?;
        self.budget.check_horizon(self.params.horizon)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.params.horizon, self.solver.n_steps)
    }

    /// Defaults shared by the parameter studies: quadratic cost, `T = 5`,
    /// `u_max = 0.06`, `B = u_max^2 T / 8`, `s0 = 0.01`, `alpha = 0.5`.
    pub fn reference(beta: f64, gamma: f64) -> Result<Self> {
        let params = EpidemicParams::new(SpreadingProfile::constant(beta)?, gamma, 0.5, 0.01, 5.0)?;
        let budget = ControlBudget::with_fraction(quadratic_cost(), 0.06, 0.125, 5.0)?;
        Ok(Scenario {
            params,
            budget,
            solver: SweepConfig::default(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParameter {
    Budget,
    Beta,
    Gamma,
    Horizon,
    S0,
    UMax,
    Alpha,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 7] = [
        SweepParameter::Budget,
        SweepParameter::Beta,
        SweepParameter::Gamma,
        SweepParameter::Horizon,
        SweepParameter::S0,
        SweepParameter::UMax,
        SweepParameter::Alpha,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Budget => "budget",
            SweepParameter::Beta => "beta",
            SweepParameter::Gamma => "gamma",
            SweepParameter::Horizon => "horizon",
            SweepParameter::S0 => "s0",
            SweepParameter::UMax => "u_max",
            SweepParameter::Alpha => "alpha",
        }
    }

    /// Applies one value to a base scenario. Sweeping the horizon or the cap
    /// keeps the absolute budget fixed.
    pub fn apply(&self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut sc = base.clone();
        match self {
            SweepParameter::Budget => sc.budget = ControlBudget::new(sc.budget.cost.clone(), sc.budget.u_max, value)?,
            SweepParameter::Beta => sc.params.profile = SpreadingProfile::constant(value)?,
            SweepParameter::Gamma => sc.params.gamma = value,
            SweepParameter::Horizon => sc.params.horizon = value,
            SweepParameter::S0 => sc.params.s0 = value,
            SweepParameter::UMax => sc.budget = ControlBudget::new(sc.budget.cost.clone(), value, sc.budget.budget)?,
            SweepParameter::Alpha => sc.params.alpha = value,
        }
        sc.validate()?;
        Ok(sc)
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParameter::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            Error::param(
                "sweep_param",
                format!("`{s}` is not one of budget, beta, gamma, horizon, s0, u_max, alpha"),
            )
        })
    }
}

/// `n` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    stop
                } else {
                    start + (stop - start) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub base: Scenario,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::param("sweep_values", "value list is empty"));
        }
        if let Some(w) = self.values.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::param(
                "sweep_values",
                format!("values must be strictly increasing ({} then {})", w[0], w[1]),
            ));
        }
        for &v in &self.values {
            self.parameter.apply(&self.base, v)?;
        }
        Ok(())
    }
}

/// Reference sweep grids, one per parameter study (15 values each).
pub fn reference_sweep(parameter: SweepParameter) -> Result<SweepSpec> {
    let (base, values) = match parameter {
        SweepParameter::Budget => {
            let base = Scenario::reference(0.8, 0.1)?;
            let full = base.budget.max_spend(base.params.horizon);
            (base, linspace(full / 15.0, full, 15))
        }
        SweepParameter::Beta => (Scenario::reference(0.8, 0.1)?, linspace(0.2, 3.0, 15)),
        SweepParameter::Gamma => (Scenario::reference(0.8, 0.1)?, linspace(0.1, 6.0, 15)),
        SweepParameter::Horizon => (Scenario::reference(0.8, 0.1)?, linspace(1.0, 15.0, 15)),
        SweepParameter::S0 => (Scenario::reference(0.8, 0.1)?, linspace(0.01, 0.29, 15)),
        SweepParameter::UMax => {
            let base = Scenario::reference(0.8, 0.1)?;
            let u_stat = base.budget.cost.inverse(base.budget.budget / base.params.horizon)?;
            (base, linspace(u_stat, 0.2, 15))
        }
        SweepParameter::Alpha => (Scenario::reference(4.0, 6.0)?, linspace(0.0, 1.0, 15)),
    };
    Ok(SweepSpec {
        parameter,
        values,
        base,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub j_optimal: f64,
    pub j_static: f64,
    pub j_nocontrol: f64,
    pub spend_optimal: f64,
    pub bisection_iterations: usize,
    /// Failures of any of the three strategies; the affected columns are NaN.
    pub error: Option<String>,
}

impl SweepRow {
    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }
}

fn sweep_row(spec: &SweepSpec, value: f64) -> SweepRow {
    let mut row = SweepRow {
        value,
        j_optimal: f64::NAN,
        j_static: f64::NAN,
        j_nocontrol: f64::NAN,
        spend_optimal: f64::NAN,
        bisection_iterations: 0,
        error: None,
    };
    let mut errors = Vec::new();
    let sc = match spec.parameter.apply(&spec.base, value) {
        Ok(sc) => sc,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    match solve_optimal(&sc.params, &sc.budget, &sc.solver) {
        Ok(r) => {
            row.j_optimal = r.cost;
            row.spend_optimal = r.spend;
            row.bisection_iterations = r.diagnostics.bisection_iterations;
        }
        Err(e) => errors.push(format!("optimal: {e}")),
    }
    let baselines = sc.grid().map(|grid| {
        let cost = sc.budget.cost.as_ref();
        let stat = static_control(&sc.budget, sc.params.horizon, grid)
            .and_then(|u| evaluate_strategy(&sc.params, &u, cost, grid));
        let none = evaluate_strategy(&sc.params, &no_control(grid), cost, grid);
        (stat, none)
    });
    match baselines {
        Ok((stat, none)) => {
            match stat {
                Ok(o) => row.j_static = o.cost,
                Err(e) => errors.push(format!("static: {e}")),
            }
            match none {
                Ok(o) => row.j_nocontrol = o.cost,
                Err(e) => errors.push(format!("no control: {e}")),
            }
        }
        Err(e) => errors.push(e.to_string()),
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row
}

pub fn run_parameter_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    run_parameter_sweep_with(Execution::default(), spec)
}

pub fn run_parameter_sweep_with(exec: Execution, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    Ok(parallel::map(exec, spec.values.clone(), |v| sweep_row(spec, v)))
}

/// Optimal control, its cumulative spend and the three terminal costs of one scenario.
#[derive(Debug, Clone)]
pub struct ShapeStudy {
    pub optimal: SolveResult,
    pub static_control: ControlSignal,
    pub j_optimal: f64,
    pub j_static: f64,
    pub j_nocontrol: f64,
}

impl ShapeStudy {
    pub fn control(&self) -> &ControlSignal {
        &self.optimal.control
    }

    pub fn spend_curve(&self) -> &[f64] {
        &self.optimal.trajectory.b
    }

    /// Mean optimal control over the first half of the horizon.
    pub fn early_mean_control(&self) -> f64 {
        let n = self.optimal.control.grid().n_steps();
        self.optimal.control.mean_over_nodes(0, n / 2)
    }
}

pub fn run_shape_study(p: &EpidemicParams, budget: &ControlBudget, cfg: &SweepConfig) -> Result<ShapeStudy> {
    let optimal = solve_optimal(p, budget, cfg)?;
    let grid = optimal.control.grid();
    let cost = budget.cost.as_ref();
    let stat = static_control(budget, p.horizon, grid)?;
    let j_static = evaluate_strategy(p, &stat, cost, grid)?.cost;
    let j_nocontrol = evaluate_strategy(p, &no_control(grid), cost, grid)?.cost;
    Ok(ShapeStudy {
        j_optimal: optimal.cost,
        optimal,
        static_control: stat,
        j_static,
        j_nocontrol,
    })
}

/// The increasing and decreasing spreading-rate profiles of the variable-rate study.
pub fn reference_profiles() -> Result<(SpreadingProfile, SpreadingProfile)> {
    Ok((
        SpreadingProfile::logistic_increasing(0.01, 2.0, 2.0, 3.0)?,
        SpreadingProfile::logistic_decreasing(0.01, 2.0, 2.0, 2.0)?,
    ))
}
