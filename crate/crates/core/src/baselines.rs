//! Reference strategies: a constant control spending exactly the budget, and no control.

use crate::control::{ControlBudget, ControlSignal, CostFunction};
use crate::error::{Error, Result};
use crate::integrator::{integrate_forward, TimeGrid};
use crate::model::EpidemicParams;

/// Constant control `u = c^{-1}(B / T)`; `sqrt(B / T)` for quadratic cost.
pub fn static_control(budget: &ControlBudget, horizon: f64, grid: TimeGrid) -> Result<ControlSignal> {
    let level = budget.cost.inverse(budget.budget / horizon)?;
    if level > budget.u_max * (1.0 + 1e-12) {
        return Err(Error::StaticInfeasible {
            required: level,
            u_max: budget.u_max,
        });
    }
    ControlSignal::constant(grid, level.min(budget.u_max))
}

pub fn no_control(grid: TimeGrid) -> ControlSignal {
    ControlSignal::zeros(grid)
}

/// Terminal ignorant fraction and total spend of a control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyOutcome {
    pub cost: f64,
    pub spend: f64,
}

pub fn evaluate_strategy(
    p: &EpidemicParams,
    u: &ControlSignal,
    cost: &dyn CostFunction,
    grid: TimeGrid,
) -> Result<StrategyOutcome> {
    let traj = integrate_forward(p, u, cost, grid)?;
    Ok(StrategyOutcome {
        cost: traj.terminal_ignorants(),
        spend: traj.spend(),
    })
}
