//! Forward-backward sweep with an outer bisection on the budget multiplier.
//!
//! The budget multiplier `lambda_b` is constant in time. For a fixed value the
//! inner sweep alternates forward state integration, backward adjoint
//! integration and a pointwise control update. The outer loop bisects
//! `lambda_b` until the spend `b(T)` matches the budget.

use log::{debug, warn};

use crate::control::{pointwise_optimal_control, ControlBudget, ControlSignal, LAMBDA_B_EPS};
use crate::error::{Error, Result};
use crate::integrator::{integrate_adjoint_backward, integrate_forward, TimeGrid, Trajectory, DEFAULT_STEPS};
use crate::model::EpidemicParams;

/// Bisection guard; ~20 halvings suffice for the default bracket.
pub const MAX_BISECTION_ITERS: usize = 200;

/// Relative control change (in units of `u_max`) above which an inner sweep
/// is flagged as not converged.
pub const SWEEP_CHANGE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub lambda_low: f64,
    pub lambda_high: f64,
    /// Stop when `|b(T) - B|` is below this...
    pub budget_tol: f64,
    /// ...and the bracket is narrower than this.
    pub lambda_tol: f64,
    /// Inner forward-backward iterations per multiplier.
    pub n_sweep: usize,
    /// Weight of the new control in `u <- theta u_new + (1 - theta) u_old`.
    pub relaxation: f64,
    pub n_steps: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            lambda_low: 0.0,
            lambda_high: 100.0,
            budget_tol: 1e-4,
            lambda_tol: 1e-4,
            n_sweep: 50,
            relaxation: 0.5,
            n_steps: DEFAULT_STEPS,
        }
    }
}

impl SweepConfig {
    /// Default settings with direct control replacement (`theta = 1`).
    pub fn unrelaxed() -> Self {
        SweepConfig {
            relaxation: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_low.is_finite() && self.lambda_low >= 0.0) {
            return Err(Error::param(
                "lambda_low",
                format!("must be >= 0, got {}", self.lambda_low),
            ));
        }
        if !(self.lambda_high.is_finite() && self.lambda_high > self.lambda_low) {
            return Err(Error::param(
                "lambda_high",
                format!("must exceed lambda_low = {}, got {}", self.lambda_low, self.lambda_high),
            ));
        }
        if !(self.budget_tol > 0.0 && self.budget_tol.is_finite()) {
            return Err(Error::param("B_th", format!("must be > 0, got {}", self.budget_tol)));
        }
        if !(self.lambda_tol > 0.0 && self.lambda_tol.is_finite()) {
            return Err(Error::param(
                "lambda_th",
                format!("must be > 0, got {}", self.lambda_tol),
            ));
        }
        if self.n_sweep == 0 {
            return Err(Error::param("N_sweep", "must be at least 1"));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::param(
                "theta",
                format!("must lie in (0, 1], got {}", self.relaxation),
            ));
        }
        if self.n_steps == 0 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        Ok(())
    }
}

/// Output of the inner forward-backward sweep at a fixed multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSweep {
    pub control: ControlSignal,
    /// `b(T)` under `control`.
    pub spend: f64,
    /// State and adjoints under `control`.
    pub trajectory: Trajectory,
    /// Sup-norm control change of every iteration.
    pub change_norms: Vec<f64>,
    pub converged: bool,
}

fn control_update(p: &EpidemicParams, budget: &ControlBudget, lambda_b: f64, traj: &Trajectory) -> Result<Vec<f64>> {
    let li = traj.lambda_i.as_ref().expect("adjoints integrated");
    let ls = traj.lambda_s.as_ref().expect("adjoints integrated");
    (0..traj.grid.len())
        .map(|k| pointwise_optimal_control(traj.i[k], traj.s[k], li[k], ls[k], lambda_b, p.alpha, budget))
        .collect()
}

fn state_and_adjoint(p: &EpidemicParams, budget: &ControlBudget, u: &ControlSignal) -> Result<Trajectory> {
    let traj = integrate_forward(p, u, budget.cost.as_ref(), u.grid())?;
    integrate_adjoint_backward(p, u, traj)
}

/// Runs `n_sweep` forward-backward iterations from `u = 0` at a fixed multiplier.
pub fn inner_sweep(p: &EpidemicParams, budget: &ControlBudget, lambda_b: f64, cfg: &SweepConfig) -> Result<InnerSweep> {
    if !(lambda_b > LAMBDA_B_EPS) {
        return Err(Error::DegenerateMultiplier(lambda_b));
    }
    let grid = TimeGrid::new(p.horizon, cfg.n_steps)?;
    let theta = cfg.relaxation;
    let mut u = ControlSignal::zeros(grid);
    let mut change_norms = Vec::with_capacity(cfg.n_sweep);

    for _ in 0..cfg.n_sweep {
        let traj = state_and_adjoint(p, budget, &u)?;
        let fresh = control_update(p, budget, lambda_b, &traj)?;
        let mixed: Vec<f64> = if theta == 1.0 {
            fresh
        } else {
            fresh
                .iter()
                .zip(u.values())
                .map(|(new, old)| theta * new + (1.0 - theta) * old)
                .collect()
        };
        let next = ControlSignal::new(grid, mixed)?;
        change_norms.push(next.sup_distance(&u));
        u = next;
    }

    let trajectory = state_and_adjoint(p, budget, &u)?;
    let last = change_norms.last().copied().unwrap_or(0.0);
    let converged = last <= SWEEP_CHANGE_TOL * budget.u_max;
    if !converged {
        warn!("inner sweep at lambda_b = {lambda_b:e} did not settle: last control change {last:e}");
    }
    Ok(InnerSweep {
        spend: trajectory.spend(),
        control: u,
        trajectory,
        change_norms,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub bisection_iterations: usize,
    /// `(lambda_b, spend)` at every bisection midpoint.
    pub history: Vec<(f64, f64)>,
    /// Control change norms of the final inner sweep.
    pub change_norms: Vec<f64>,
    pub inner_converged: bool,
    /// Full-strength control was applied without bisection.
    pub full_budget_shortcut: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub control: ControlSignal,
    pub trajectory: Trajectory,
    /// Terminal ignorant fraction `i(T)`.
    pub cost: f64,
    /// Converged budget multiplier (0 for the full-strength shortcut,
    /// infinite for a zero budget).
    pub lambda_b: f64,
    pub spend: f64,
    pub diagnostics: SolveDiagnostics,
}

impl SolveResult {
    /// Sup-norm change of the control if the control law is re-applied to the
    /// converged state and adjoints.
    pub fn stationarity_gap(&self, p: &EpidemicParams, budget: &ControlBudget) -> Result<f64> {
        if self.diagnostics.full_budget_shortcut || !self.lambda_b.is_finite() {
            return Ok(0.0);
        }
        let fresh = control_update(p, budget, self.lambda_b, &self.trajectory)?;
        Ok(fresh
            .iter()
            .zip(self.control.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn fixed_control_result(
    p: &EpidemicParams,
    budget: &ControlBudget,
    control: ControlSignal,
    lambda_b: f64,
    shortcut: bool,
) -> Result<SolveResult> {
    let trajectory = state_and_adjoint(p, budget, &control)?;
    Ok(SolveResult {
        cost: trajectory.terminal_ignorants(),
        spend: trajectory.spend(),
        control,
        trajectory,
        lambda_b,
        diagnostics: SolveDiagnostics {
            bisection_iterations: 0,
            history: Vec::new(),
            change_norms: Vec::new(),
            inner_converged: true,
            full_budget_shortcut: shortcut,
        },
    })
}

/// Computes the budget-constrained optimal control.
pub fn solve_optimal(p: &EpidemicParams, budget: &ControlBudget, cfg: &SweepConfig) -> Result<SolveResult> {
    p.validate()?;
    cfg.validate()?;
    budget.check_horizon(p.horizon)?;
    let grid = TimeGrid::new(p.horizon, cfg.n_steps)?;
    let target = budget.budget;

    if (target - budget.max_spend(p.horizon)).abs() < cfg.budget_tol {
        let full = ControlSignal::constant(grid, budget.u_max)?;
        return fixed_control_result(p, budget, full, 0.0, true);
    }
    if target == 0.0 {
        return fixed_control_result(p, budget, ControlSignal::zeros(grid), f64::INFINITY, false);
    }

    let mut low = cfg.lambda_low;
    let mut high = cfg.lambda_high;
    let top = inner_sweep(p, budget, high, cfg)?;
    if top.spend > target {
        return Err(Error::InvalidBracket {
            lambda: high,
            spend: top.spend,
            budget: target,
        });
    }
    // lambda_b -> 0 saturates the control, so a zero lower end always overspends
    if low > LAMBDA_B_EPS {
        let bottom = inner_sweep(p, budget, low, cfg)?;
        if bottom.spend < target {
            return Err(Error::InvalidBracket {
                lambda: low,
                spend: bottom.spend,
                budget: target,
            });
        }
    }

    let mut history = Vec::new();
    for iter in 1..=MAX_BISECTION_ITERS {
        let mid = 0.5 * (low + high);
        let sweep = inner_sweep(p, budget, mid, cfg)?;
        history.push((mid, sweep.spend));
        debug!("bisection {iter}: lambda_b = {mid:.6e}, spend = {:.6e}", sweep.spend);
        if sweep.spend > target {
            low = mid;
        }
        if sweep.spend < target {
            high = mid;
        }
        if (sweep.spend - target).abs() < cfg.budget_tol && (high - low) < cfg.lambda_tol {
            return Ok(SolveResult {
                cost: sweep.trajectory.terminal_ignorants(),
                spend: sweep.spend,
                lambda_b: mid,
                control: sweep.control,
                trajectory: sweep.trajectory,
                diagnostics: SolveDiagnostics {
                    bisection_iterations: iter,
                    history,
                    change_norms: sweep.change_norms,
                    inner_converged: sweep.converged,
                    full_budget_shortcut: false,
                },
            });
        }
        if (sweep.spend - target).abs() >= cfg.budget_tol && high - low <= f64::EPSILON * high.max(1.0) {
            break;
        }
    }
    let (_, last_spend) = history.last().copied().unwrap_or((high, f64::NAN));
    Err(Error::BisectionStalled {
        iterations: history.len(),
        gap: (last_spend - target).abs(),
        width: high - low,
    })
}

/// Cumulative spend `b*(t)` of a solution.
pub fn cumulative_spend_curve(result: &SolveResult) -> &[f64] {
    &result.trajectory.b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::quadratic_cost;
    use crate::model::SpreadingProfile;
    use approx::assert_abs_diff_eq;

    fn reference(beta: f64, gamma: f64) -> (EpidemicParams, ControlBudget) {
        let p = EpidemicParams::new(SpreadingProfile::constant(beta).unwrap(), gamma, 0.5, 0.01, 5.0).unwrap();
        let b = ControlBudget::with_fraction(quadratic_cost(), 0.06, 0.125, 5.0).unwrap();
        (p, b)
    }

    fn small_cfg() -> SweepConfig {
        SweepConfig {
            n_steps: 200,
            ..SweepConfig::unrelaxed()
        }
    }

    #[test]
    fn config_validation() {
        assert!(SweepConfig::default().validate().is_ok());
        let bad = [
            SweepConfig {
                lambda_high: 0.0,
                ..Default::default()
            },
            SweepConfig {
                budget_tol: 0.0,
                ..Default::default()
            },
            SweepConfig {
                lambda_tol: -1.0,
                ..Default::default()
            },
            SweepConfig {
                n_sweep: 0,
                ..Default::default()
            },
            SweepConfig {
                relaxation: 0.0,
                ..Default::default()
            },
            SweepConfig {
                relaxation: 1.5,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn huge_multiplier_spends_nothing() {
        let (p, b) = reference(1.2, 0.1);
        let s = inner_sweep(&p, &b, 1e6, &small_cfg()).unwrap();
        assert!(s.control.max() < 1e-5);
        assert!(s.spend < 1e-9);
    }

    #[test]
    fn tiny_multiplier_saturates() {
        let (p, b) = reference(1.2, 0.1);
        let s = inner_sweep(&p, &b, 1e-6, &small_cfg()).unwrap();
        assert_abs_diff_eq!(s.spend, 0.018, epsilon = 1e-6);
    }

    #[test]
    fn degenerate_multiplier_is_rejected() {
        let (p, b) = reference(1.2, 0.1);
        assert!(matches!(
            inner_sweep(&p, &b, 0.0, &small_cfg()),
            Err(Error::DegenerateMultiplier(_))
        ));
    }

    #[test]
    fn full_budget_shortcut() {
        let (p, _) = reference(1.2, 0.1);
        let b = ControlBudget::quadratic(0.06, 0.018).unwrap();
        let r = solve_optimal(&p, &b, &small_cfg()).unwrap();
        assert!(r.diagnostics.full_budget_shortcut);
        assert_eq!(r.diagnostics.bisection_iterations, 0);
        assert!(r.control.values().iter().all(|&v| v == 0.06));
        assert_abs_diff_eq!(r.spend, 0.018, epsilon = 1e-12);
    }

    #[test]
    fn zero_budget_returns_no_control() {
        let (p, _) = reference(1.2, 0.1);
        let b = ControlBudget::quadratic(0.06, 0.0).unwrap();
        let r = solve_optimal(&p, &b, &small_cfg()).unwrap();
        assert_eq!(r.spend, 0.0);
        assert_eq!(r.control.max(), 0.0);
    }

    #[test]
    fn overspent_budget_is_rejected() {
        let (p, _) = reference(1.2, 0.1);
        let b = ControlBudget::quadratic(0.06, 0.05).unwrap();
        assert!(matches!(
            solve_optimal(&p, &b, &small_cfg()),
            Err(Error::BudgetInfeasible { .. })
        ));
    }

    #[test]
    fn bracket_failure_is_reported() {
        let (p, b) = reference(1.2, 0.1);
        // both ends spend far less than the budget
        let cfg = SweepConfig {
            lambda_low: 50.0,
            lambda_high: 100.0,
            ..small_cfg()
        };
        assert!(matches!(solve_optimal(&p, &b, &cfg), Err(Error::InvalidBracket { .. })));
    }

    #[test]
    fn solve_meets_budget_and_is_deterministic() {
        let (p, b) = reference(1.2, 0.1);
        let cfg = small_cfg();
        let r1 = solve_optimal(&p, &b, &cfg).unwrap();
        let r2 = solve_optimal(&p, &b, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert!((r1.spend - b.budget).abs() < cfg.budget_tol);
        let curve = cumulative_spend_curve(&r1);
        assert_eq!(curve[0], 0.0);
        assert_eq!(*curve.last().unwrap(), r1.spend);
        assert!(curve.windows(2).all(|w| w[1] >= w[0]));
        assert!(r1.control.is_within(b.u_max));
        assert!((0.0..=1.0).contains(&r1.cost));
    }
}
