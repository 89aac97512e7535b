//! CSV and report emission.

use std::io::{self, Write};

use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::experiments::SweepRow;
use crate::integrator::{TimeGrid, Trajectory};

pub const TRAJECTORY_HEADER: &str = "t,i,s,r,u,b,lambda_i,lambda_s";
pub const SWEEP_HEADER: &str = "param_value,J_optimal,J_static,J_nocontrol,spend_optimal,bisect_iters";

/// Formats `x` with `sig` significant digits, `%g` style.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn num(x: f64) -> String {
    format_sig(x, 12)
}

/// Writes one row per grid node. Adjoint columns are empty when absent.
pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory, control: &ControlSignal) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    let u = control.values();
    for k in 0..traj.grid.len() {
        let li = traj.lambda_i.as_ref().map_or(String::new(), |v| num(v[k]));
        let ls = traj.lambda_s.as_ref().map_or(String::new(), |v| num(v[k]));
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            num(traj.grid.time(k)),
            num(traj.i[k]),
            num(traj.s[k]),
            num(traj.r(k)),
            num(u[k]),
            num(traj.b[k]),
            li,
            ls
        )?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            num(r.value),
            num(r.j_optimal),
            num(r.j_static),
            num(r.j_nocontrol),
            num(r.spend_optimal),
            r.bisection_iterations
        )?;
    }
    Ok(())
}

/// A parsed numeric CSV: header names and rows of values (empty cells are NaN).
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

pub fn read_numeric_csv(text: &str) -> Result<NumericTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or_else(|| Error::Syntax {
        line: 1,
        reason: "empty CSV".into(),
    })?;
    let header: Vec<String> = head.split(',').map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (n, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(Error::Syntax {
                line: n + 1,
                reason: format!("expected {} fields, found {}", header.len(), cells.len()),
            });
        }
        let row = cells
            .iter()
            .map(|c| {
                if c.is_empty() {
                    Ok(f64::NAN)
                } else {
                    c.parse::<f64>().map_err(|_| Error::Syntax {
                        line: n + 1,
                        reason: format!("`{c}` is not a number"),
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(NumericTable { header, rows })
}

/// Reads a control from a CSV with a `u` column (and optionally `t`) sampled on
/// a uniform grid over `[0, horizon]`.
pub fn read_control_csv(text: &str, horizon: f64) -> Result<ControlSignal> {
    let table = read_numeric_csv(text)?;
    let u = table
        .column("u")
        .ok_or_else(|| Error::param("control_file", "CSV has no `u` column"))?;
    if u.len() < 2 {
        return Err(Error::param("control_file", "need at least two control samples"));
    }
    let grid = TimeGrid::new(horizon, u.len() - 1)?;
    if let Some(t) = table.column("t") {
        for (k, &tk) in t.iter().enumerate() {
            if (tk - grid.time(k)).abs() > 1e-9 * horizon.max(1.0) {
                return Err(Error::param(
                    "control_file",
                    format!("row {} has t = {tk}, expected uniform node {}", k + 1, grid.time(k)),
                ));
            }
        }
    }
    ControlSignal::new(grid, u)
}
