//! Fixed-step RK4 integration of the state (forward) and adjoint (backward)
//! equations on a shared uniform grid.
//!
//! Controls and states between nodes are piecewise linear, so the RK4
//! half-step stages use the mean of the two neighbouring node values.

use crate::control::{ControlSignal, CostFunction};
use crate::error::{Error, Result};
use crate::model::{controlled_rhs, uncontrolled_rhs_full, EpidemicParams, State};

/// Samples may overshoot `[0, 1]` by this much before integration is declared diverged.
pub const STATE_SLACK: f64 = 1e-6;

pub const DEFAULT_STEPS: usize = 1000;

/// Uniform grid `t_k = k T / n` for `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::param("T", format!("must be finite and > 0, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        Ok(TimeGrid { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.step()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }
}

/// Control values seen by the RK4 stages of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageControls {
    pub start: f64,
    pub mid: f64,
    pub end: f64,
}

/// Anything that can supply control values to the forward integrator.
pub trait ControlInput {
    fn grid(&self) -> TimeGrid;
    fn stages(&self, k: usize) -> StageControls;
}

impl ControlInput for ControlSignal {
    fn grid(&self) -> TimeGrid {
        ControlSignal::grid(self)
    }

    #[inline]
    fn stages(&self, k: usize) -> StageControls {
        let v = self.values();
        StageControls {
            start: v[k],
            mid: 0.5 * (v[k] + v[k + 1]),
            end: v[k + 1],
        }
    }
}

/// States, cumulative spend and (optionally) adjoints on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub i: Vec<f64>,
    pub s: Vec<f64>,
    pub b: Vec<f64>,
    pub lambda_i: Option<Vec<f64>>,
    pub lambda_s: Option<Vec<f64>>,
    /// Samples pulled back into `[0, 1]` after a small RK4 overshoot.
    pub clamped: usize,
}

impl Trajectory {
    pub fn r(&self, k: usize) -> f64 {
        1.0 - self.i[k] - self.s[k]
    }

    pub fn terminal_ignorants(&self) -> f64 {
        *self.i.last().expect("trajectory has at least two nodes")
    }

    pub fn spend(&self) -> f64 {
        *self.b.last().expect("trajectory has at least two nodes")
    }

    pub fn has_adjoints(&self) -> bool {
        self.lambda_i.is_some() && self.lambda_s.is_some()
    }
}

#[inline]
fn rk4<const N: usize>(y: [f64; N], h: f64, f: impl Fn(usize, &[f64; N]) -> [f64; N]) -> [f64; N] {
    // stage index: 0 = start, 1 = mid, 2 = end
    let axpy = |a: &[f64; N], k: &[f64; N], w: f64| -> [f64; N] {
        let mut out = *a;
        for (o, d) in out.iter_mut().zip(k) {
            *o += w * d;
        }
        out
    };
    let k1 = f(0, &y);
    let k2 = f(1, &axpy(&y, &k1, 0.5 * h));
    let k3 = f(1, &axpy(&y, &k2, 0.5 * h));
    let k4 = f(2, &axpy(&y, &k3, h));
    let mut out = y;
    for j in 0..N {
        out[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    out
}

fn guard_fraction(value: f64, what: &str, time: f64, clamped: &mut usize) -> Result<f64> {
    if !value.is_finite() || !(-STATE_SLACK..=1.0 + STATE_SLACK).contains(&value) {
        return Err(Error::Diverged {
            time,
            what: format!("{what} = {value} left [0, 1]"),
        });
    }
    if !(0.0..=1.0).contains(&value) {
        *clamped += 1;
        return Ok(value.clamp(0.0, 1.0));
    }
    Ok(value)
}

/// Integrates `(i, s, b)` forward from `(1 - s0, s0, 0)` under `u`.
pub fn integrate_forward(
    p: &EpidemicParams,
    u: &impl ControlInput,
    cost: &dyn CostFunction,
    grid: TimeGrid,
) -> Result<Trajectory> {
    if u.grid() != grid {
        return Err(Error::GridMismatch {
            expected: grid.len(),
            got: u.grid().len(),
        });
    }
    let h = grid.step();
    let n = grid.len();
    let mut i = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let x0 = p.initial_state();
    let mut y = [x0.i, x0.s, 0.0];
    i.push(y[0]);
    s.push(y[1]);
    b.push(0.0);
    let mut clamped = 0;

    for k in 0..grid.n_steps() {
        let t0 = grid.time(k);
        let ctl = u.stages(k);
        let times = [t0, t0 + 0.5 * h, t0 + h];
        let levels = [ctl.start, ctl.mid, ctl.end];
        let rates = levels.map(|v| cost.evaluate(v));
        let next = rk4(y, h, |stage, y| {
            let (di, ds) = controlled_rhs(State { i: y[0], s: y[1] }, times[stage], levels[stage], p);
            [di, ds, rates[stage]]
        });
        let t1 = grid.time(k + 1);
        let ni = guard_fraction(next[0], "i", t1, &mut clamped)?;
        let ns = guard_fraction(next[1], "s", t1, &mut clamped)?;
        if !next[2].is_finite() {
            return Err(Error::Diverged {
                time: t1,
                what: "cumulative spend is not finite".into(),
            });
        }
        y = [ni, ns, next[2]];
        i.push(ni);
        s.push(ns);
        b.push(next[2]);
    }

    Ok(Trajectory {
        grid,
        i,
        s,
        b,
        lambda_i: None,
        lambda_s: None,
        clamped,
    })
}

/// Right-hand side of the adjoint system: `(d lambda_i/dt, d lambda_s/dt)`.
#[inline]
pub fn adjoint_rhs(x: State, lambda_i: f64, lambda_s: f64, t: f64, u: f64, p: &EpidemicParams) -> (f64, f64) {
    let beta = p.beta(t);
    let g = p.gamma;
    let a = p.alpha;
    let dli = lambda_i * (beta * x.s + u) - lambda_s * ((beta + g) * x.s + u - a * u);
    let dls = lambda_i * beta * x.i - lambda_s * ((beta + g) * x.i - g - a * u);
    (dli, dls)
}

/// Integrates the adjoints backward from `lambda_i(T) = 1`, `lambda_s(T) = 0`.
pub fn integrate_adjoint_backward(p: &EpidemicParams, u: &ControlSignal, mut state: Trajectory) -> Result<Trajectory> {
    let grid = state.grid;
    if u.grid() != grid {
        return Err(Error::GridMismatch {
            expected: grid.len(),
            got: u.grid().len(),
        });
    }
    let h = grid.step();
    let n = grid.n_steps();
    let mut li = vec![0.0; n + 1];
    let mut ls = vec![0.0; n + 1];
    li[n] = 1.0;
    ls[n] = 0.0;
    let mut y = [1.0, 0.0];

    for k in (0..n).rev() {
        // stepping from node k+1 down to node k: "start" is the later node
        let t1 = grid.time(k + 1);
        let ctl = u.stages(k);
        let times = [t1, t1 - 0.5 * h, t1 - h];
        let levels = [ctl.end, ctl.mid, ctl.start];
        let states = [
            State {
                i: state.i[k + 1],
                s: state.s[k + 1],
            },
            State {
                i: 0.5 * (state.i[k] + state.i[k + 1]),
                s: 0.5 * (state.s[k] + state.s[k + 1]),
            },
            State {
                i: state.i[k],
                s: state.s[k],
            },
        ];
        y = rk4(y, -h, |stage, y| {
            let (a, b) = adjoint_rhs(states[stage], y[0], y[1], times[stage], levels[stage], p);
            [a, b]
        });
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::Diverged {
                time: grid.time(k),
                what: "adjoint is not finite".into(),
            });
        }
        li[k] = y[0];
        ls[k] = y[1];
    }

    state.lambda_i = Some(li);
    state.lambda_s = Some(ls);
    Ok(state)
}

/// Derivative of `J = i(T)` with respect to the control at each node,
/// `-lambda_i i + lambda_s i + lambda_s alpha r`.
///
/// The first-order change of `J` under a perturbation `du` is the time
/// integral of this density times `du`.
pub fn control_sensitivity(traj: &Trajectory, alpha: f64) -> Result<Vec<f64>> {
    let (Some(li), Some(ls)) = (&traj.lambda_i, &traj.lambda_s) else {
        return Err(Error::param("trajectory", "adjoints have not been integrated"));
    };
    Ok((0..traj.grid.len())
        .map(|k| {
            let (i, r) = (traj.i[k], traj.r(k));
            -li[k] * i + ls[k] * i + ls[k] * alpha * r
        })
        .collect())
}

/// Integrates all three compartments of the uncontrolled system independently.
///
/// Returns `[i, s, r]` per node; used to check that the reduced two-state
/// form loses nothing.
pub fn integrate_uncontrolled_full(p: &EpidemicParams, grid: TimeGrid) -> Result<Vec<[f64; 3]>> {
    let h = grid.step();
    let x0 = p.initial_state();
    let mut y = [x0.i, x0.s, 0.0];
    let mut out = Vec::with_capacity(grid.len());
    out.push(y);
    for k in 0..grid.n_steps() {
        let t0 = grid.time(k);
        let times = [t0, t0 + 0.5 * h, t0 + h];
        y = rk4(y, h, |stage, y| {
            let (a, b, c) = uncontrolled_rhs_full(y[0], y[1], y[2], times[stage], p);
            [a, b, c]
        });
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                time: grid.time(k + 1),
                what: "state is not finite".into(),
            });
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::QuadraticCost;
    use crate::model::SpreadingProfile;
    use approx::assert_abs_diff_eq;

    fn params(beta: f64, gamma: f64, alpha: f64, s0: f64) -> EpidemicParams {
        EpidemicParams::new(SpreadingProfile::constant(beta).unwrap(), gamma, alpha, s0, 5.0).unwrap()
    }

    #[test]
    fn grid_basics() {
        let g = TimeGrid::new(5.0, 1000).unwrap();
        assert_eq!(g.len(), 1001);
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(1000), 5.0);
        assert_abs_diff_eq!(g.step(), 0.005, epsilon = 1e-18);
        assert!(TimeGrid::new(5.0, 0).is_err());
        assert!(TimeGrid::new(-1.0, 10).is_err());
    }

    #[test]
    fn frozen_ignorants_without_spreading() {
        let p = params(0.0, 0.1, 0.5, 0.01);
        let g = TimeGrid::new(5.0, 1000).unwrap();
        let tr = integrate_forward(&p, &ControlSignal::zeros(g), &QuadraticCost, g).unwrap();
        assert_eq!(tr.terminal_ignorants(), 0.99);
        assert_eq!(tr.spend(), 0.0);
    }

    #[test]
    fn si_reduction_matches_logistic_closed_form() {
        let (beta, s0) = (1.2, 0.01);
        let p = params(beta, 0.0, 0.5, s0);
        let g = TimeGrid::new(5.0, 1000).unwrap();
        let tr = integrate_forward(&p, &ControlSignal::zeros(g), &QuadraticCost, g).unwrap();
        for k in (0..g.len()).step_by(50) {
            let t = g.time(k);
            let e = (beta * t).exp();
            let s = s0 * e / (1.0 - s0 + s0 * e);
            assert_abs_diff_eq!(tr.i[k], 1.0 - s, epsilon = 1e-10);
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let p = params(1.0, 0.1, 0.5, 0.01);
        let g = TimeGrid::new(5.0, 100).unwrap();
        let other = TimeGrid::new(5.0, 50).unwrap();
        assert!(matches!(
            integrate_forward(&p, &ControlSignal::zeros(other), &QuadraticCost, g),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn coarse_grid_divergence_is_reported() {
        let p = params(400.0, 0.1, 0.5, 0.3);
        let g = TimeGrid::new(5.0, 2).unwrap();
        let err = integrate_forward(&p, &ControlSignal::zeros(g), &QuadraticCost, g).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err:?}");
    }

    #[test]
    fn adjoint_is_trivial_without_dynamics() {
        let p = params(0.0, 0.1, 0.5, 0.01);
        let g = TimeGrid::new(5.0, 200).unwrap();
        let u = ControlSignal::zeros(g);
        let tr = integrate_forward(&p, &u, &QuadraticCost, g).unwrap();
        let tr = integrate_adjoint_backward(&p, &u, tr).unwrap();
        assert!(tr.lambda_i.as_ref().unwrap().iter().all(|&v| v == 1.0));
        assert!(tr.lambda_s.as_ref().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_decays_with_pure_recruitment() {
        // beta = gamma = alpha = 0: lambda_s stays 0 and lambda_i(t) = exp(-int_t^T u)
        let p = params(0.0, 0.0, 0.0, 0.01);
        let g = TimeGrid::new(5.0, 1000).unwrap();
        let vals: Vec<f64> = g.times().map(|t| 0.05 + 0.01 * t).collect();
        let u = ControlSignal::new(g, vals).unwrap();
        let tr = integrate_forward(&p, &u, &QuadraticCost, g).unwrap();
        let tr = integrate_adjoint_backward(&p, &u, tr).unwrap();
        let li = tr.lambda_i.as_ref().unwrap();
        for k in (0..g.len()).step_by(100) {
            let t = g.time(k);
            let integral = 0.05 * (5.0 - t) + 0.005 * (25.0 - t * t);
            assert_abs_diff_eq!(li[k], (-integral).exp(), epsilon = 1e-12);
        }
        assert!(tr.lambda_s.as_ref().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_terminal_data_and_forcing_stays_zero() {
        // lambda_i is forced by lambda_i(T) = 1, but with beta = 0 the lambda_s
        // equation is homogeneous with zero terminal value.
        let p = params(0.0, 3.0, 0.7, 0.2);
        let g = TimeGrid::new(5.0, 300).unwrap();
        let u = ControlSignal::constant(g, 0.05).unwrap();
        let tr = integrate_forward(&p, &u, &QuadraticCost, g).unwrap();
        let tr = integrate_adjoint_backward(&p, &u, tr).unwrap();
        assert!(tr.lambda_s.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sensitivity_requires_adjoints() {
        let p = params(1.0, 0.1, 0.5, 0.01);
        let g = TimeGrid::new(5.0, 10).unwrap();
        let tr = integrate_forward(&p, &ControlSignal::zeros(g), &QuadraticCost, g).unwrap();
        assert!(control_sensitivity(&tr, 0.5).is_err());
    }
}
