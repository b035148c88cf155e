//! CSV traces and plain-text run reports.

use std::fmt::Write as _;
use std::io::{self, Write};

use pipbc_core::sim::{AuditReport, Trajectory};
use pipbc_core::Vector;

/// `t,x_1..x_n,u_1..u_m,z_1..z_m,W,Q,e_norm,ea_norm`.
pub fn csv_header(n: usize, m: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x_{i}")));
    cols.extend((1..=m).map(|i| format!("u_{i}")));
    cols.extend((1..=m).map(|i| format!("z_{i}")));
    cols.extend(["W", "Q", "e_norm", "ea_norm"].map(String::from));
    cols.join(",")
}

/// Writes recorded grid points; oracle columns are `NaN` when the run had
/// no oracle.
pub fn write_trace_csv(out: &mut impl Write, traj: &Trajectory, n: usize, m: usize) -> io::Result<()> {
    writeln!(out, "{}", csv_header(n, m))?;
    let mut line = String::new();
    for k in 0..traj.len() {
        line.clear();
        let oracle = |pick: fn(&pipbc_core::sim::OracleTrace) -> &Vec<f64>| {
            traj.trace.as_ref().map_or(f64::NAN, |t| pick(t)[k])
        };
        let mut push = |v: f64| {
            if !line.is_empty() {
                line.push(',');
            }
            let _ = write!(line, "{v:.16e}");
        };
        push(traj.times[k]);
        traj.states[k].iter().for_each(|&v| push(v));
        traj.controls[k].iter().for_each(|&v| push(v));
        if traj.z_states[k].is_empty() {
            (0..m).for_each(|_| push(f64::NAN));
        } else {
            traj.z_states[k].iter().for_each(|&v| push(v));
        }
        push(oracle(|t| &t.w));
        push(oracle(|t| &t.q));
        push(oracle(|t| &t.e_norms));
        push(oracle(|t| &t.e_a_norms));
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn fmt_vector(v: &Vector) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.10e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Outcome of one simulated initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub index: usize,
    pub x0: Vector,
    pub final_state: Vector,
    pub final_time: f64,
    pub final_state_error: f64,
    pub e_a_final: Option<f64>,
    pub converged: bool,
    pub audit: Option<AuditReport>,
    /// Start time and last state of a blow-up.
    pub blow_up: Option<(f64, Vec<f64>)>,
}

pub fn simulation_report(runs: &[RunSummary], variant: &str, seed: u64) -> String {
    let mut s = String::new();
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
    for r in runs {
        let _ = writeln!(s, "[run {}]", r.index);
        let _ = writeln!(s, "  x0={}", fmt_vector(&r.x0));
        if let Some((t, state)) = &r.blow_up {
            let _ = writeln!(s, "  blow_up at t={t:.6e} last_state={state:?}");
            continue;
        }
        let _ = writeln!(s, "  final_time={:.6e} final_state={}", r.final_time, fmt_vector(&r.final_state));
        let _ = writeln!(s, "  final_error={:.6e} e_a_final={}", r.final_state_error, opt(r.e_a_final));
        if let Some(a) = &r.audit {
            let _ = writeln!(
                s,
                "  max_w_increase={:.6e} passivity_gap={:.6e} dotw_residual={} w_third={:.6e}",
                a.max_w_increase,
                a.passivity_gap,
                opt(a.dotw_identity_residual),
                a.w_third_derivative
            );
        }
        let _ = writeln!(s, "  converged={}", r.converged);
    }
    let converged = runs.iter().filter(|r| r.converged).count();
    let blow_ups = runs.iter().filter(|r| r.blow_up.is_some()).count();
    let worst = runs
        .iter()
        .filter(|r| r.blow_up.is_none())
        .map(|r| r.final_state_error)
        .fold(0.0f64, f64::max);
    let max_dw = runs
        .iter()
        .filter_map(|r| r.audit.as_ref().map(|a| a.max_w_increase))
        .fold(0.0f64, f64::max);
    let _ = writeln!(
        s,
        "SUMMARY runs={} converged={} blow_ups={} worst_final_error={:.6e} max_w_increase={:.6e} variant={} seed={}",
        runs.len(),
        converged,
        blow_ups,
        worst,
        max_dw,
        variant,
        seed
    );
    s
}
