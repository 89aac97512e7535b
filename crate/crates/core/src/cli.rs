//! Command-line front end.
//!
//! Data go to the `--out` file; summaries and diagnostics go to stderr.
//! Exit status: 0 on success, 1 on invalid input, 2 on solver failure.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::warn;

use crate::baselines::{evaluate_strategy, no_control, static_control};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::experiments::run_parameter_sweep;
use crate::integrator::{integrate_adjoint_backward, integrate_forward};
use crate::oracle::oracle_search;
use crate::output::{format_sig, read_control_csv, write_sweep_csv, write_trajectory_csv};
use crate::sweep::solve_optimal;

#[derive(Debug, Parser)]
#[command(
    name = "rumor-control",
    version,
    about = "Budget-constrained optimal campaigns for Maki-Thompson rumors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the optimal control and write its trajectory CSV.
    Solve(CommonArgs),
    /// Integrate the model under the control in `control_file`.
    Simulate(CommonArgs),
    /// Evaluate the static and no-control strategies.
    Baseline(CommonArgs),
    /// Run a one-parameter sweep and write one CSV row per value.
    Sweep(CommonArgs),
    /// Compare the brute-force piecewise-constant search with the sweep solver.
    Oracle(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Scenario file (`key = value` lines); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; falls back to the `output` key.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set beta=1.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl CommonArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        let text = match &self.config {
            Some(path) => {
                fs::read_to_string(path).map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?
            }
            None => String::new(),
        };
        ScenarioConfig::parse_with_overrides(&text, &self.set)
    }

    fn out_path(&self, cfg: &ScenarioConfig) -> Result<PathBuf> {
        self.out
            .clone()
            .or_else(|| cfg.output.as_ref().map(PathBuf::from))
            .ok_or_else(|| Error::param("output", "no --out path given and no `output` key set"))
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", path.display())))
}

fn num(x: f64) -> String {
    format_sig(x, 12)
}

fn solve(args: &CommonArgs) -> Result<()> {
    let cfg = args.load()?;
    let out = args.out_path(&cfg)?;
    let sc = cfg.scenario()?;
    let result = solve_optimal(&sc.params, &sc.budget, &sc.solver)?;
    let grid = result.control.grid();
    let cost = sc.budget.cost.as_ref();
    let stat = static_control(&sc.budget, sc.params.horizon, grid)
        .and_then(|u| evaluate_strategy(&sc.params, &u, cost, grid))?;
    let none = evaluate_strategy(&sc.params, &no_control(grid), cost, grid)?;

    let mut w = create(&out)?;
    write_trajectory_csv(&mut w, &result.trajectory, &result.control)?;
    w.flush()?;
    eprintln!(
        "J_optimal = {} spend = {} B = {} lambda_b = {} bisection_iterations = {} J_static = {} J_nocontrol = {}",
        num(result.cost),
        num(result.spend),
        num(sc.budget.budget),
        num(result.lambda_b),
        result.diagnostics.bisection_iterations,
        num(stat.cost),
        num(none.cost),
    );
    if !result.diagnostics.inner_converged {
        warn!("final inner sweep did not settle; consider theta < 1");
    }
    Ok(())
}

fn simulate(args: &CommonArgs) -> Result<()> {
    let cfg = args.load()?;
    let out = args.out_path(&cfg)?;
    let sc = cfg.scenario()?;
    let path = cfg
        .control_file
        .as_ref()
        .ok_or_else(|| Error::param("control_file", "simulate needs a control_file"))?;
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("cannot read {path}: {e}")))?;
    let control = read_control_csv(&text, sc.params.horizon)?;
    if !control.is_within(sc.budget.u_max * (1.0 + 1e-12)) {
        return Err(Error::param(
            "control_file",
            format!(
                "control exceeds u_max = {} (max sample {})",
                sc.budget.u_max,
                control.max()
            ),
        ));
    }
    let traj = integrate_forward(&sc.params, &control, sc.budget.cost.as_ref(), control.grid())?;
    let traj = integrate_adjoint_backward(&sc.params, &control, traj)?;
    let mut w = create(&out)?;
    write_trajectory_csv(&mut w, &traj, &control)?;
    w.flush()?;
    eprintln!("J = {} spend = {}", num(traj.terminal_ignorants()), num(traj.spend()));
    Ok(())
}

fn baseline(args: &CommonArgs) -> Result<()> {
    let cfg = args.load()?;
    let out = args.out_path(&cfg)?;
    let sc = cfg.scenario()?;
    let grid = sc.grid()?;
    let cost = sc.budget.cost.as_ref();
    let stat_u = static_control(&sc.budget, sc.params.horizon, grid)?;
    let stat = evaluate_strategy(&sc.params, &stat_u, cost, grid)?;
    let none = evaluate_strategy(&sc.params, &no_control(grid), cost, grid)?;
    let mut w = create(&out)?;
    writeln!(w, "strategy,level,J,spend")?;
    writeln!(
        w,
        "static,{},{},{}",
        num(stat_u.values()[0]),
        num(stat.cost),
        num(stat.spend)
    )?;
    writeln!(w, "no_control,0,{},{}", num(none.cost), num(none.spend))?;
    w.flush()?;
    eprintln!("J_static = {} J_nocontrol = {}", num(stat.cost), num(none.cost));
    Ok(())
}

fn sweep(args: &CommonArgs) -> Result<()> {
    let cfg = args.load()?;
    let out = args.out_path(&cfg)?;
    let spec = cfg.sweep_spec()?;
    let rows = run_parameter_sweep(&spec)?;
    for r in rows.iter().filter(|r| !r.is_complete()) {
        warn!("{} = {}: {}", spec.parameter, r.value, r.error.as_deref().unwrap_or(""));
    }
    let mut w = create(&out)?;
    write_sweep_csv(&mut w, &rows)?;
    w.flush()?;
    eprintln!(
        "{} rows written ({} with failures)",
        rows.len(),
        rows.iter().filter(|r| !r.is_complete()).count()
    );
    Ok(())
}

fn oracle(args: &CommonArgs) -> Result<()> {
    let cfg = args.load()?;
    let out = args.out_path(&cfg)?;
    let sc = cfg.scenario()?;
    let found = oracle_search(
        &sc.params,
        &sc.budget,
        cfg.oracle_segments,
        cfg.oracle_levels,
        sc.solver.n_steps,
    )?;
    let optimal = solve_optimal(&sc.params, &sc.budget, &sc.solver)?;
    let grid = sc.grid()?;
    let stat = static_control(&sc.budget, sc.params.horizon, grid)
        .and_then(|u| evaluate_strategy(&sc.params, &u, sc.budget.cost.as_ref(), grid))?;
    let levels: Vec<String> = found.control.levels().iter().map(|&l| num(l)).collect();

    let mut w = create(&out)?;
    writeln!(w, "oracle_segments = {}", cfg.oracle_segments)?;
    writeln!(w, "oracle_levels = {}", cfg.oracle_levels)?;
    writeln!(w, "candidates = {}", found.candidates)?;
    writeln!(w, "best_levels = {}", levels.join(", "))?;
    writeln!(w, "J_oracle = {}", num(found.cost))?;
    writeln!(w, "J_sweep = {}", num(optimal.cost))?;
    writeln!(w, "J_static = {}", num(stat.cost))?;
    writeln!(w, "sweep_minus_oracle = {}", num(optimal.cost - found.cost))?;
    w.flush()?;
    eprintln!(
        "J_oracle = {} J_sweep = {} J_static = {}",
        num(found.cost),
        num(optimal.cost),
        num(stat.cost)
    );
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        1
    } else {
        2
    }
}

/// Parses `argv` (including the program name) and runs one subcommand.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Simulate(a) => simulate(a),
        Command::Baseline(a) => baseline(a),
        Command::Sweep(a) => sweep(a),
        Command::Oracle(a) => oracle(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
