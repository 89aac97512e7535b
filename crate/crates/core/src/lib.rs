//! Optimal information-campaign control for the Maki-Thompson rumor model.
//!
//! A campaigner with a fixed budget pushes ignorants and stiflers back into
//! the spreader class at rate `u(t)` and pays `c(u(t))` for it. The solver in
//! [`sweep`] finds the control minimizing the terminal ignorant fraction via a
//! forward-backward sweep on the state and adjoint equations, with a bisection
//! on the (time-constant) budget multiplier. [`oracle`] checks it against a
//! derivative-free brute-force search, [`baselines`] provides the static and
//! no-control references, and [`experiments`] runs the parameter studies.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod model;
pub mod oracle;
pub mod output;
pub mod parallel;
pub mod sweep;

pub use control::{ControlBudget, ControlSignal, CostFunction, QuadraticCost};
pub use error::{Error, Result};
pub use integrator::{TimeGrid, Trajectory};
pub use model::{EpidemicParams, SpreadingProfile, State};
pub use sweep::{solve_optimal, SolveResult, SweepConfig};
