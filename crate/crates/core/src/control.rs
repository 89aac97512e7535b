//! Campaign cost functions, budgets and the Hamiltonian-minimizing control law.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::integrator::TimeGrid;

/// Smallest budget multiplier accepted by [`pointwise_optimal_control`].
pub const LAMBDA_B_EPS: f64 = 1e-12;

/// Instantaneous cost of applying control at level `u`.
///
/// Implementations must be continuous and strictly increasing on `[0, u_max]`
/// with `evaluate(0) = 0`, and must provide closed forms for the inverse of the
/// derivative and of the cost itself.
pub trait CostFunction: fmt::Debug + Send + Sync {
    fn evaluate(&self, u: f64) -> f64;

    fn derivative(&self, u: f64) -> f64;

    /// Solves `c'(u) = y`. For arguments below `c'(0)` the result must fall
    /// below zero so the control law clamps it to the lower bound.
    fn derivative_inverse(&self, y: f64) -> f64;

    /// Solves `c(u) = v` for `v >= 0`.
    fn inverse(&self, v: f64) -> Result<f64>;
}

/// `c(u) = u^2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QuadraticCost;

impl CostFunction for QuadraticCost {
    fn evaluate(&self, u: f64) -> f64 {
        u * u
    }

    fn derivative(&self, u: f64) -> f64 {
        2.0 * u
    }

    fn derivative_inverse(&self, y: f64) -> f64 {
        y / 2.0
    }

    fn inverse(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0) {
            return Err(Error::param("cost", format!("cannot invert a negative cost rate {v}")));
        }
        Ok(v.sqrt())
    }
}

pub fn quadratic_cost() -> Arc<dyn CostFunction> {
    Arc::new(QuadraticCost)
}

/// `c(u) = u^p` for `p > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerCost {
    exponent: f64,
}

impl PowerCost {
    pub fn new(exponent: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent > 1.0) {
            return Err(Error::param("cost_exponent", format!("must be > 1, got {exponent}")));
        }
        Ok(PowerCost { exponent })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

impl CostFunction for PowerCost {
    fn evaluate(&self, u: f64) -> f64 {
        u.powf(self.exponent)
    }

    fn derivative(&self, u: f64) -> f64 {
        self.exponent * u.powf(self.exponent - 1.0)
    }

    fn derivative_inverse(&self, y: f64) -> f64 {
        // odd extension below zero keeps the sign for the lower clamp
        let mag = (y.abs() / self.exponent).powf(1.0 / (self.exponent - 1.0));
        mag.copysign(y)
    }

    fn inverse(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0) {
            return Err(Error::param("cost", format!("cannot invert a negative cost rate {v}")));
        }
        Ok(v.powf(1.0 / self.exponent))
    }
}

/// Cost function, control cap and total budget of a campaign.
#[derive(Debug, Clone)]
pub struct ControlBudget {
    pub cost: Arc<dyn CostFunction>,
    pub u_max: f64,
    pub budget: f64,
}

impl ControlBudget {
    pub fn new(cost: Arc<dyn CostFunction>, u_max: f64, budget: f64) -> Result<Self> {
        if !(u_max.is_finite() && u_max > 0.0) {
            return Err(Error::param("u_max", format!("must be finite and > 0, got {u_max}")));
        }
        if !(budget.is_finite() && budget >= 0.0) {
            return Err(Error::param("B", format!("must be finite and >= 0, got {budget}")));
        }
        Ok(ControlBudget { cost, u_max, budget })
    }

    pub fn quadratic(u_max: f64, budget: f64) -> Result<Self> {
        Self::new(quadratic_cost(), u_max, budget)
    }

    /// Spend of full-strength control over `horizon`.
    pub fn max_spend(&self, horizon: f64) -> f64 {
        self.cost.evaluate(self.u_max) * horizon
    }

    /// Checks `B <= c(u_max) T`, allowing relative round-off.
    pub fn check_horizon(&self, horizon: f64) -> Result<()> {
        let max_spend = self.max_spend(horizon);
        if self.budget > max_spend * (1.0 + 1e-9) {
            return Err(Error::BudgetInfeasible {
                budget: self.budget,
                max_spend,
            });
        }
        Ok(())
    }

    /// Budget expressed as a fraction of `c(u_max) T`.
    pub fn with_fraction(cost: Arc<dyn CostFunction>, u_max: f64, fraction: f64, horizon: f64) -> Result<Self> {
        if !(fraction.is_finite() && (0.0..=1.0).contains(&fraction)) {
            return Err(Error::param(
                "budget_fraction",
                format!("must lie in [0, 1], got {fraction}"),
            ));
        }
        let budget = cost.evaluate(u_max) * horizon * fraction;
        Self::new(cost, u_max, budget)
    }
}

/// Control samples on the nodes of a time grid.
///
/// Between nodes the control is taken to be piecewise linear.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl ControlSignal {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param(
                "u",
                format!("sample {k} is {v}; controls must be finite and >= 0"),
            ));
        }
        Ok(ControlSignal { grid, values })
    }

    pub fn constant(grid: TimeGrid, level: f64) -> Result<Self> {
        Self::new(grid, vec![level; grid.len()])
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        ControlSignal {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_within(&self, u_max: f64) -> bool {
        self.values.iter().all(|&v| v <= u_max)
    }

    /// Sup-norm distance to another signal on the same grid.
    pub fn sup_distance(&self, other: &ControlSignal) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Piecewise-linear value at time `t` (clamped to the horizon).
    pub fn at(&self, t: f64) -> f64 {
        let h = self.grid.step();
        let n = self.grid.n_steps();
        let x = (t / h).clamp(0.0, n as f64);
        let k = (x.floor() as usize).min(n - 1);
        let w = x - k as f64;
        (1.0 - w) * self.values[k] + w * self.values[k + 1]
    }

    /// Mean of the piecewise-linear control over `[t0, t1]` restricted to whole steps.
    pub fn mean_over_nodes(&self, k0: usize, k1: usize) -> f64 {
        let seg = &self.values[k0..=k1];
        let trap: f64 = seg.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum();
        trap / (k1 - k0) as f64
    }
}

/// The control level minimizing the Hamiltonian at one instant, projected onto `[0, u_max]`.
///
/// `u = clamp(c'^{-1}((lambda_i i - lambda_s i - lambda_s alpha r) / lambda_b), 0, u_max)`.
#[allow(clippy::too_many_arguments)]
pub fn pointwise_optimal_control(
    i: f64,
    s: f64,
    lambda_i: f64,
    lambda_s: f64,
    lambda_b: f64,
    alpha: f64,
    budget: &ControlBudget,
) -> Result<f64> {
    if !(lambda_b > LAMBDA_B_EPS) {
        return Err(Error::DegenerateMultiplier(lambda_b));
    }
    let r = 1.0 - i - s;
    let switching = lambda_i * i - lambda_s * i - lambda_s * alpha * r;
    let unconstrained = budget.cost.derivative_inverse(switching / lambda_b);
    Ok(unconstrained.min(budget.u_max).max(0.0))
}

/// Trapezoidal quadrature of `c(u(t))` over the grid.
pub fn budget_spent(u: &ControlSignal, cost: &dyn CostFunction) -> f64 {
    let h = u.grid.step();
    let costs: Vec<f64> = u.values.iter().map(|&v| cost.evaluate(v)).collect();
    costs.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn reference_budget() -> ControlBudget {
        ControlBudget::quadratic(0.06, 0.06 * 0.06 * 5.0 / 8.0).unwrap()
    }

    #[test]
    fn quadratic_cost_values() {
        let c = QuadraticCost;
        assert_abs_diff_eq!(c.evaluate(0.06), 0.0036, epsilon = 1e-18);
        assert_eq!(c.derivative_inverse(1.0), 0.5);
        assert_abs_diff_eq!(c.inverse(0.0036).unwrap(), 0.06, epsilon = 1e-15);
        assert!(c.inverse(-1.0).is_err());
    }

    #[test]
    fn control_law_examples() {
        let b = reference_budget();
        // c'^{-1}(1) = 0.5 saturates at u_max
        assert_eq!(
            pointwise_optimal_control(1.0, 0.0, 1.0, 0.0, 1.0, 0.5, &b).unwrap(),
            0.06
        );
        // zero switching function
        let b0 = ControlBudget::quadratic(0.06, 0.001).unwrap();
        assert_eq!(
            pointwise_optimal_control(0.4, 0.3, 0.7, 0.7, 1.0, 0.0, &b0).unwrap(),
            0.0
        );
        // negative argument clamps to zero
        assert_eq!(
            pointwise_optimal_control(0.5, 0.2, 0.0, 1.0, 1.0, 0.5, &b).unwrap(),
            0.0
        );
        // interior
        let u = pointwise_optimal_control(0.5, 0.2, 1.0, 0.5, 10.0, 0.5, &b).unwrap();
        assert_abs_diff_eq!(u, (0.5 - 0.25 - 0.075) / 20.0, epsilon = 1e-15);
    }

    #[test]
    fn control_law_rejects_degenerate_multiplier() {
        let b = reference_budget();
        assert_eq!(
            pointwise_optimal_control(1.0, 0.0, 1.0, 0.0, 0.0, 0.5, &b),
            Err(Error::DegenerateMultiplier(0.0))
        );
        assert!(pointwise_optimal_control(1.0, 0.0, 1.0, 0.0, 1e-13, 0.5, &b).is_err());
    }

    #[test]
    fn spend_examples() {
        let grid = TimeGrid::new(5.0, 1000).unwrap();
        let c = QuadraticCost;
        assert_eq!(budget_spent(&ControlSignal::zeros(grid), &c), 0.0);
        let full = ControlSignal::constant(grid, 0.06).unwrap();
        assert_abs_diff_eq!(budget_spent(&full, &c), 0.018, epsilon = 1e-14);
        let b = 0.06 * 0.06 * 5.0 / 8.0;
        let stat = ControlSignal::constant(grid, (b / 5.0f64).sqrt()).unwrap();
        assert_abs_diff_eq!(budget_spent(&stat, &c), b, epsilon = 1e-14);
    }

    #[test]
    fn budget_validation() {
        assert!(ControlBudget::quadratic(0.0, 0.001).is_err());
        assert!(ControlBudget::quadratic(0.06, -0.001).is_err());
        let b = ControlBudget::quadratic(0.06, 0.02).unwrap();
        assert!(matches!(b.check_horizon(5.0), Err(Error::BudgetInfeasible { .. })));
        assert!(ControlBudget::quadratic(0.06, 0.018)
            .unwrap()
            .check_horizon(5.0)
            .is_ok());
        let f = ControlBudget::with_fraction(quadratic_cost(), 0.06, 0.125, 5.0).unwrap();
        assert_abs_diff_eq!(f.budget, 0.00225, epsilon = 1e-15);
    }

    #[test]
    fn signal_validation_and_interpolation() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        assert!(matches!(
            ControlSignal::new(grid, vec![0.0; 3]),
            Err(Error::GridMismatch { expected: 5, got: 3 })
        ));
        assert!(ControlSignal::new(grid, vec![0.0, -1.0, 0.0, 0.0, 0.0]).is_err());
        let u = ControlSignal::new(grid, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(u.at(0.125), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(u.at(1.0), 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u.mean_over_nodes(0, 4), 2.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn derivative_inverse_roundtrips(u in 1e-6..0.06f64, p in 1.2..4.0f64) {
            let q = QuadraticCost;
            prop_assert!((q.derivative_inverse(q.derivative(u)) - u).abs() < 1e-12);
            let pc = PowerCost::new(p).unwrap();
            prop_assert!((pc.derivative_inverse(pc.derivative(u)) - u).abs() < 1e-12);
            prop_assert!((pc.inverse(pc.evaluate(u)).unwrap() - u).abs() < 1e-12);
        }

        #[test]
        fn control_law_is_boxed_and_monotone_in_multiplier(
            i in 0.0..1.0f64, frac in 0.0..1.0f64,
            li in -2.0..2.0f64, ls in -2.0..2.0f64,
            lb in 1e-6..100.0f64, bump in 0.0..10.0f64, alpha in 0.0..1.0f64,
        ) {
            let s = (1.0 - i) * frac;
            let b = reference_budget();
            let u1 = pointwise_optimal_control(i, s, li, ls, lb, alpha, &b).unwrap();
            let u2 = pointwise_optimal_control(i, s, li, ls, lb + bump, alpha, &b).unwrap();
            prop_assert!((0.0..=0.06).contains(&u1));
            prop_assert!(u2 <= u1);
            // continuity in the multiplier
            let u3 = pointwise_optimal_control(i, s, li, ls, lb * (1.0 + 1e-9), alpha, &b).unwrap();
            prop_assert!((u3 - u1).abs() < 1e-6);
        }
    }
}
