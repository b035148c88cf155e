//! `pipbc` subcommands. Exit codes: 0 success, 1 certification or
//! convergence failure, 2 usage or config error, 3 numerical blow-up.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pipbc_core::model::assignable_residual;

use crate::config::{ScenarioConfig, Variant};
use crate::error::CliError;
use crate::report::{fmt_vector, simulation_report, write_trace_csv, RunSummary};
use crate::scenario::{PlantKind, Registry, Scenario};
use crate::sweep::{gain_sweep, gain_table, perturbation_sweep, CellHorizon};

#[derive(Debug, Parser)]
#[command(name = "pipbc", version, about = "Robust PI passivity-based control: certify, simulate, sweep")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the structural, equilibrium and storage assumptions.
    Certify(CommonArgs),
    /// Run the closed loop from each initial condition and audit it.
    Simulate(RunArgs),
    /// Run the gain grid and/or the perturbation sweep.
    Sweep(RunArgs),
    /// Print the open-loop equilibrium, x* and u*.
    Equilibrium(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Refuse to run unless certification passes.
    #[arg(long)]
    pub enforce_certification: bool,
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run_from_args<I, T>(args: I, registry: &Registry) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command, registry, &mut std::io::stdout()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(common: &CommonArgs, registry: &Registry) -> Result<(Scenario, PathBuf), CliError> {
    let mut cfg = ScenarioConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((Scenario::from_config(cfg, registry)?, out))
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

pub fn execute(cmd: &Command, registry: &Registry, stdout: &mut impl Write) -> Result<(), CliError> {
    match cmd {
        Command::Certify(a) => {
            let (scn, out) = load(a, registry)?;
            cmd_certify(&scn, &out, stdout)
        }
        Command::Simulate(a) => {
            let (scn, out) = load(&a.common, registry)?;
            if a.enforce_certification {
                enforce(&scn)?;
            }
            cmd_simulate(&scn, &out, stdout)
        }
        Command::Sweep(a) => {
            let (scn, out) = load(&a.common, registry)?;
            if a.enforce_certification {
                enforce(&scn)?;
            }
            cmd_sweep(&scn, &out, stdout)
        }
        Command::Equilibrium(a) => {
            let (scn, out) = load(a, registry)?;
            cmd_equilibrium(&scn, &out, stdout)
        }
    }
}

fn enforce(scn: &Scenario) -> Result<(), CliError> {
    let report = scn.certify()?;
    if report.overall {
        Ok(())
    } else {
        Err(CliError::Certification(report.summary_line()))
    }
}

pub fn cmd_certify(scn: &Scenario, out: &Path, stdout: &mut impl Write) -> Result<(), CliError> {
    let report = scn.certify()?;
    let text = report.to_string();
    let path = write_file(out, "certification.txt", &text)?;
    write!(stdout, "{text}")?;
    writeln!(stdout, "report: {}", path.display())?;
    if report.overall {
        Ok(())
    } else {
        Err(CliError::Certification(report.summary_line()))
    }
}

/// Runs every initial condition; traces go to `trace_<k>.csv`.
pub fn simulate_runs(scn: &Scenario, out: Option<&Path>) -> Result<Vec<RunSummary>, CliError> {
    let (gp, gi) = scn.gains();
    let law = scn.law(gp.clone(), gi.clone())?;
    let oracle = scn.oracle(&gp, &gi)?;
    let cfg = scn.integrator()?;
    let z0 = scn.z0()?;
    let tol = &scn.config.convergence;
    let mut runs = Vec::new();
    for (k, x0) in scn.initial_conditions()?.into_iter().enumerate() {
        match scn.simulate(law.as_ref(), &x0, &z0, &cfg, oracle.as_ref()) {
            Ok(tr) => {
                if let Some(dir) = out {
                    fs::create_dir_all(dir)?;
                    let mut w = BufWriter::new(fs::File::create(dir.join(format!("trace_{k}.csv")))?);
                    write_trace_csv(&mut w, &tr, scn.n(), scn.m())?;
                    w.flush()?;
                }
                let x = tr.final_state().expect("nonempty run").clone();
                let err = (&x - &scn.x_star).norm();
                let ea = scn.ea_norm(&x);
                runs.push(RunSummary {
                    index: k,
                    x0,
                    final_time: tr.final_time(),
                    final_state_error: err,
                    e_a_final: ea,
                    converged: err <= tol.state_tolerance && ea.is_none_or(|e| e <= tol.ea_tolerance),
                    final_state: x,
                    audit: tr.audit,
                    blow_up: None,
                });
            }
            Err(CliError::BlowUp { time, state }) => runs.push(RunSummary {
                index: k,
                final_state: x0.clone(),
                x0,
                final_time: time,
                final_state_error: f64::INFINITY,
                e_a_final: None,
                converged: false,
                audit: None,
                blow_up: Some((time, state)),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(runs)
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Robust => "robust",
        Variant::Ideal => "ideal",
        Variant::Perturbed => "perturbed",
    }
}

pub fn cmd_simulate(scn: &Scenario, out: &Path, stdout: &mut impl Write) -> Result<(), CliError> {
    let traces = scn.config.output.traces.then_some(out);
    let runs = simulate_runs(scn, traces)?;
    let variant = scn.config.controller.variant;
    let text = simulation_report(&runs, variant_name(variant), scn.seed());
    let path = write_file(out, "simulate.txt", &text)?;
    write!(stdout, "{text}")?;
    writeln!(stdout, "report: {}", path.display())?;
    if let Some(r) = runs.iter().find(|r| r.blow_up.is_some()) {
        let (time, state) = r.blow_up.clone().expect("checked");
        return Err(CliError::BlowUp { time, state });
    }
    let failed = runs.iter().filter(|r| !r.converged).count();
    if failed > 0 && variant != Variant::Perturbed {
        return Err(CliError::Convergence(format!("{failed} of {} runs did not converge", runs.len())));
    }
    Ok(())
}

pub fn cmd_sweep(scn: &Scenario, out: &Path, stdout: &mut impl Write) -> Result<(), CliError> {
    let sweep = scn
        .config
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("config has no [sweep] section".into()))?;
    if sweep.gamma_p.is_empty() && sweep.ratios.is_empty() {
        return Err(CliError::Config("sweep grid is empty".into()));
    }
    let mut failed = 0;
    if !sweep.gamma_p.is_empty() {
        let x0 = scn.initial_conditions()?.remove(0);
        let horizon = match sweep.settle_horizon {
            Some(cap) => CellHorizon::Settle {
                cap,
                dwell: sweep.dwell,
            },
            None => CellHorizon::Fixed,
        };
        let cells = gain_sweep(scn, &sweep.gamma_p, &sweep.gamma_i, &x0, &scn.z0()?, horizon)?;
        failed = cells.iter().filter(|c| !c.converged).count();
        let table = gain_table(&cells);
        let path = write_file(out, "sweep.csv", &table)?;
        write!(stdout, "{table}")?;
        writeln!(stdout, "table: {}", path.display())?;
    }
    if !sweep.ratios.is_empty() {
        let report = perturbation_sweep(scn, &sweep.ratios)?;
        let text = report.render(scn.seed());
        let path = write_file(out, "perturbation.csv", &text)?;
        write!(stdout, "{text}")?;
        writeln!(stdout, "report: {}", path.display())?;
    }
    if failed > 0 {
        return Err(CliError::Convergence(format!("{failed} gain cells did not converge")));
    }
    Ok(())
}

pub fn cmd_equilibrium(scn: &Scenario, out: &Path, stdout: &mut impl Write) -> Result<(), CliError> {
    let mut text = String::new();
    if let PlantKind::Thermal(m) = &scn.kind {
        text += &format!("t_bar = {}\n", fmt_vector(m.t_bar()));
        text += &format!("open_loop_residual = {:.6e}\n", m.equilibrium_residual());
    }
    text += &format!("x_star = {}\n", fmt_vector(&scn.x_star));
    let residual = assignable_residual(&scn.plant, &scn.x_star)?.norm();
    text += &format!("assignable_residual = {residual:.6e}\n");
    match &scn.u_star {
        Some(u) => {
            let r = scn.plant.rhs(&scn.x_star, u).norm();
            text += &format!("u_star = {}\n", fmt_vector(u));
            text += &format!("equilibrium_residual = {r:.6e}\n");
        }
        None => text += "u_star = none (target not assignable)\n",
    }
    let path = write_file(out, "equilibrium.txt", &text)?;
    write!(stdout, "{text}")?;
    writeln!(stdout, "report: {}", path.display())?;
    if scn.u_star.is_none() {
        return Err(CliError::Certification("target is not assignable".into()));
    }
    Ok(())
}
