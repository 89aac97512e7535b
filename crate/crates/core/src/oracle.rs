//! Brute-force verifier over piecewise-constant, budget-exhausting controls.
//!
//! The search uses no adjoint information at all: every candidate is simply
//! integrated forward and scored by `i(T)`. Since the piecewise-constant
//! class is a subset of the admissible controls, the best candidate bounds
//! the continuous optimum from above.

use crate::control::{ControlBudget, ControlSignal};
use crate::error::{Error, Result};
use crate::integrator::{integrate_forward, ControlInput, StageControls, TimeGrid};
use crate::model::EpidemicParams;
use crate::parallel::{self, Execution};

pub const MAX_SEGMENTS: usize = 6;
pub const MAX_LEVELS: usize = 16;

/// Allowed deviation of a candidate's spend from the budget.
pub const BUDGET_MATCH_TOL: f64 = 1e-8;

/// A control that is constant on each of `n` equal segments of `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseControl {
    grid: TimeGrid,
    levels: Vec<f64>,
}

impl PiecewiseControl {
    /// The grid must place a node on every segment boundary.
    pub fn new(grid: TimeGrid, levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::param("n_segments", "must be at least 1"));
        }
        if !grid.n_steps().is_multiple_of(levels.len()) {
            return Err(Error::param(
                "n_steps",
                format!(
                    "{} steps cannot be split into {} equal segments",
                    grid.n_steps(),
                    levels.len()
                ),
            ));
        }
        if let Some(v) = levels.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param("levels", format!("level {v} must be finite and >= 0")));
        }
        Ok(PiecewiseControl { grid, levels })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn n_segments(&self) -> usize {
        self.levels.len()
    }

    pub fn segment_length(&self) -> f64 {
        self.grid.horizon() / self.levels.len() as f64
    }

    pub fn spend(&self, budget: &ControlBudget) -> f64 {
        let d = self.segment_length();
        self.levels.iter().map(|&l| budget.cost.evaluate(l) * d).sum()
    }

    fn level_of_step(&self, k: usize) -> f64 {
        let per = self.grid.n_steps() / self.levels.len();
        self.levels[k / per]
    }
}

impl ControlInput for PiecewiseControl {
    fn grid(&self) -> TimeGrid {
        self.grid
    }

    #[inline]
    fn stages(&self, k: usize) -> StageControls {
        let v = self.level_of_step(k);
        StageControls {
            start: v,
            mid: v,
            end: v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub cost: f64,
    pub control: PiecewiseControl,
    /// Budget-exhausting candidates that were integrated.
    pub candidates: usize,
}

/// Smallest step count `>= n_steps` divisible by `n_segments`.
pub fn aligned_steps(n_steps: usize, n_segments: usize) -> usize {
    n_steps.div_ceil(n_segments) * n_segments
}

fn check_guards(p: &EpidemicParams, budget: &ControlBudget, n_segments: usize, n_levels: usize) -> Result<()> {
    if n_segments == 0 || n_segments > MAX_SEGMENTS {
        return Err(Error::OracleGuard(format!(
            "n_segments = {n_segments} must lie in 1..={MAX_SEGMENTS}"
        )));
    }
    if !(2..=MAX_LEVELS).contains(&n_levels) {
        return Err(Error::OracleGuard(format!(
            "n_levels = {n_levels} must lie in 2..={MAX_LEVELS}"
        )));
    }
    budget.check_horizon(p.horizon)
}

/// Exhaustive search over level grids; see module docs.
pub fn oracle_search(
    p: &EpidemicParams,
    budget: &ControlBudget,
    n_segments: usize,
    n_levels: usize,
    n_steps: usize,
) -> Result<OracleResult> {
    oracle_search_with(Execution::default(), p, budget, n_segments, n_levels, n_steps)
}

pub fn oracle_search_with(
    exec: Execution,
    p: &EpidemicParams,
    budget: &ControlBudget,
    n_segments: usize,
    n_levels: usize,
    n_steps: usize,
) -> Result<OracleResult> {
    p.validate()?;
    check_guards(p, budget, n_segments, n_levels)?;
    let grid = TimeGrid::new(p.horizon, aligned_steps(n_steps, n_segments))?;
    let seg_len = p.horizon / n_segments as f64;
    let cost = budget.cost.as_ref();
    let ladder: Vec<f64> = (0..n_levels)
        .map(|j| budget.u_max * j as f64 / (n_levels - 1) as f64)
        .collect();
    let last_cap = cost.evaluate(budget.u_max) * seg_len;
    let slack = 1e-12 * budget.budget.max(1.0);

    // enumerate free prefixes in lexicographic order; the last level is solved
    let free = n_segments - 1;
    let total = n_levels.pow(free as u32);
    let mut candidates = Vec::new();
    let mut idx = vec![0usize; free];
    for _ in 0..total {
        let mut levels: Vec<f64> = idx.iter().map(|&j| ladder[j]).collect();
        let used: f64 = levels.iter().map(|&l| cost.evaluate(l) * seg_len).sum();
        let residual = budget.budget - used;
        if residual >= -slack && residual <= last_cap + slack {
            let last = cost.inverse(residual.max(0.0) / seg_len)?.min(budget.u_max);
            levels.push(last);
            candidates.push(levels);
        }
        for pos in (0..free).rev() {
            idx[pos] += 1;
            if idx[pos] < n_levels {
                break;
            }
            idx[pos] = 0;
        }
    }
    if candidates.is_empty() {
        return Err(Error::OracleGuard(
            "no budget-exhausting candidate on this level grid".into(),
        ));
    }

    let scored = parallel::map(exec, candidates, |levels| {
        let pc = PiecewiseControl { grid, levels };
        let j = integrate_forward(p, &pc, cost, grid).map(|t| t.terminal_ignorants());
        (j, pc)
    });

    let count = scored.len();
    let mut best: Option<(f64, PiecewiseControl)> = None;
    for (j, pc) in scored {
        let j = j?;
        debug_assert!((pc.spend(budget) - budget.budget).abs() < BUDGET_MATCH_TOL);
        // strict comparison keeps the lexicographically first minimizer
        if best.as_ref().is_none_or(|(bj, _)| j < *bj) {
            best = Some((j, pc));
        }
    }
    let (cost, control) = best.expect("non-empty candidate set");
    Ok(OracleResult {
        cost,
        control,
        candidates: count,
    })
}

/// Segment-averages a sampled control and rescales it to spend exactly the budget.
pub fn project_to_piecewise(u: &ControlSignal, n_segments: usize, budget: &ControlBudget) -> Result<PiecewiseControl> {
    let grid = u.grid();
    let shell = PiecewiseControl::new(grid, vec![0.0; n_segments])?;
    let per = grid.n_steps() / n_segments;
    let means: Vec<f64> = (0..n_segments)
        .map(|j| u.mean_over_nodes(j * per, (j + 1) * per).min(budget.u_max))
        .collect();
    let d = shell.segment_length();
    let spend_at = |scale: f64| -> f64 {
        means
            .iter()
            .map(|&m| budget.cost.evaluate((scale * m).min(budget.u_max)) * d)
            .sum()
    };
    let target = budget.budget;
    if means.iter().all(|&m| m == 0.0) {
        if target > 0.0 {
            return Err(Error::param(
                "u",
                "cannot rescale an all-zero control to a positive budget",
            ));
        }
        return Ok(shell);
    }
    // spend is non-decreasing in the scale factor
    let mut lo = 0.0;
    let mut hi = 1.0;
    while spend_at(hi) < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::BudgetInfeasible {
                budget: target,
                max_spend: spend_at(hi),
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spend_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let levels = means.iter().map(|&m| (hi * m).min(budget.u_max)).collect();
    PiecewiseControl::new(grid, levels)
}
