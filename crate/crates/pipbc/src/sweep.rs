//! Gain-grid and perturbation sweeps, fanned out with rayon.

use std::fmt::Write as _;

use pipbc_core::controller::PiLaw;
use pipbc_core::sim::IntegratorConfig;
use pipbc_core::Vector;
use rayon::prelude::*;

use crate::error::CliError;
use crate::report::fmt_vector;
use crate::scenario::Scenario;

/// How long each gain cell runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellHorizon {
    /// The scenario's integrator horizon, as in `simulate`.
    Fixed,
    /// Until the settle criterion holds for `dwell`, capped at `cap`.
    Settle { cap: f64, dwell: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainCell {
    pub gamma_p: f64,
    pub gamma_i: f64,
    pub converged: bool,
    /// Start of the interval over which the settle criterion held.
    pub settled_at: Option<f64>,
    pub final_time: f64,
    pub final_state_error: f64,
    pub e_a_final: f64,
    pub max_w_increase: f64,
    pub dotw_identity_residual: Option<f64>,
    pub w_third_derivative: f64,
    pub blow_up: Option<f64>,
}

/// One robust-law run per `(γ_P, γ_I)` with `Γ = γ I`, in grid order.
pub fn gain_sweep(
    scn: &Scenario,
    gamma_p: &[f64],
    gamma_i: &[f64],
    x0: &Vector,
    z0: &Vector,
    horizon: CellHorizon,
) -> Result<Vec<GainCell>, CliError> {
    if gamma_p.is_empty() || gamma_i.is_empty() {
        return Err(CliError::Config("gain grid is empty".into()));
    }
    let base = scn.integrator()?;
    let cfg = match horizon {
        CellHorizon::Fixed => base,
        CellHorizon::Settle { cap, dwell } => {
            let mut c = IntegratorConfig::new(base.step, cap)?
                .with_method(base.method)
                .with_record_every(usize::MAX)
                .with_settle(scn.settle_criterion(dwell));
            c.blowup_bound = base.blowup_bound;
            c
        }
    };
    let cells: Vec<(f64, f64)> = gamma_p.iter().flat_map(|&p| gamma_i.iter().map(move |&i| (p, i))).collect();
    let m = scn.m();
    cells
        .par_iter()
        .map(|&(p, i)| {
            let gp = Vector::from_element(m, p);
            let gi = Vector::from_element(m, i);
            let law = scn.robust_law(gp.clone(), gi.clone())?;
            let oracle = scn
                .oracle(&gp, &gi)?
                .ok_or_else(|| CliError::Certification("sweep needs a storage function and u*".into()))?;
            run_cell(scn, &law, x0, z0, &cfg, &oracle, p, i, horizon)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    scn: &Scenario,
    law: &dyn PiLaw,
    x0: &Vector,
    z0: &Vector,
    cfg: &IntegratorConfig,
    oracle: &pipbc_core::sim::Oracle,
    p: f64,
    i: f64,
    horizon: CellHorizon,
) -> Result<GainCell, CliError> {
    let tol = &scn.config.convergence;
    match scn.simulate(law, x0, z0, cfg, Some(oracle)) {
        Ok(tr) => {
            let a = tr.audit.clone().expect("oracle attached");
            let converged = match horizon {
                CellHorizon::Fixed => a.final_state_error <= tol.state_tolerance && a.e_a_final <= tol.ea_tolerance,
                CellHorizon::Settle { .. } => tr.settled_at.is_some(),
            };
            Ok(GainCell {
                gamma_p: p,
                gamma_i: i,
                converged,
                settled_at: tr.settled_at,
                final_time: tr.final_time(),
                final_state_error: a.final_state_error,
                e_a_final: a.e_a_final,
                max_w_increase: a.max_w_increase,
                dotw_identity_residual: a.dotw_identity_residual,
                w_third_derivative: a.w_third_derivative,
                blow_up: None,
            })
        }
        Err(CliError::BlowUp { time, .. }) => Ok(GainCell {
            gamma_p: p,
            gamma_i: i,
            converged: false,
            settled_at: None,
            final_time: time,
            final_state_error: f64::INFINITY,
            e_a_final: f64::INFINITY,
            max_w_increase: f64::INFINITY,
            dotw_identity_residual: None,
            w_third_derivative: f64::NAN,
            blow_up: Some(time),
        }),
        Err(e) => Err(e),
    }
}

pub fn gain_table(cells: &[GainCell]) -> String {
    let mut s = String::from(
        "gamma_p,gamma_i,converged,settled_at,final_time,final_error,e_a_final,max_w_increase,dotw_residual\n",
    );
    for c in cells {
        let _ = writeln!(
            s,
            "{:e},{:e},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{}",
            c.gamma_p,
            c.gamma_i,
            c.converged,
            c.settled_at.map_or("none".into(), |t| format!("{t:.6e}")),
            c.final_time,
            c.final_state_error,
            c.e_a_final,
            c.max_w_increase,
            c.dotw_identity_residual.map_or("n/a".into(), |r| format!("{r:.6e}")),
        );
    }
    let converged = cells.iter().filter(|c| c.converged).count();
    let max_dw = cells.iter().map(|c| c.max_w_increase).fold(0.0f64, f64::max);
    let _ = writeln!(
        s,
        "# SUMMARY cells={} converged={} max_w_increase={:.6e}",
        cells.len(),
        converged,
        max_dw
    );
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationCell {
    pub ratio: f64,
    pub delta: Vector,
    pub converged: bool,
    pub final_state_error: f64,
    pub e_a_final: f64,
    /// Increase of the true-weight `W`, which need not be monotone here.
    pub max_w_increase: f64,
    pub blow_up: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub cells: Vec<PerturbationCell>,
    pub gamma_p: Vector,
    pub gamma_i: Vector,
    /// Whether the final error is non-decreasing in the ratio.
    pub error_monotone: bool,
    /// Largest ratio up to which every cell converged.
    pub robustness_margin: Option<f64>,
}

/// Runs the perturbed law at each ratio with the scenario gains, from the
/// first initial condition, over the integrator horizon. The sign pattern
/// of `δ` is the same for every ratio.
pub fn perturbation_sweep(scn: &Scenario, ratios: &[f64]) -> Result<PerturbationReport, CliError> {
    if ratios.is_empty() {
        return Err(CliError::Config("perturbation grid is empty".into()));
    }
    let mut sorted = ratios.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (gp, gi) = scn.gains();
    let cfg = scn.integrator()?.with_record_every(usize::MAX);
    let x0 = scn.initial_conditions()?.remove(0);
    let z0 = scn.z0()?;
    let oracle = scn.oracle(&gp, &gi)?;
    let tol = &scn.config.convergence;
    let cells: Vec<PerturbationCell> = sorted
        .par_iter()
        .map(|&r| {
            let est = scn.estimate(Some(r))?;
            let delta = est.delta().clone();
            let law = scn.perturbed_law(gp.clone(), gi.clone(), est)?;
            match scn.simulate(&law, &x0, &z0, &cfg, oracle.as_ref()) {
                Ok(tr) => {
                    let x = tr.final_state().expect("nonempty run");
                    let err = (x - &scn.x_star).norm();
                    let ea = scn.ea_norm(x).unwrap_or(f64::NAN);
                    Ok(PerturbationCell {
                        ratio: r,
                        delta,
                        converged: err <= tol.state_tolerance && ea <= tol.ea_tolerance,
                        final_state_error: err,
                        e_a_final: ea,
                        max_w_increase: tr.audit.map_or(f64::NAN, |a| a.max_w_increase),
                        blow_up: None,
                    })
                }
                Err(CliError::BlowUp { time, .. }) => Ok(PerturbationCell {
                    ratio: r,
                    delta,
                    converged: false,
                    final_state_error: f64::INFINITY,
                    e_a_final: f64::INFINITY,
                    max_w_increase: f64::INFINITY,
                    blow_up: Some(time),
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, _>>()?;
    let error_monotone = cells.windows(2).all(|w| w[1].final_state_error >= w[0].final_state_error);
    let robustness_margin = cells.iter().take_while(|c| c.converged).last().map(|c| c.ratio);
    Ok(PerturbationReport {
        cells,
        gamma_p: gp,
        gamma_i: gi,
        error_monotone,
        robustness_margin,
    })
}

impl PerturbationReport {
    pub fn render(&self, seed: u64) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# perturbed weights D0 = D - diag(delta), gains matched to D");
        let _ = writeln!(s, "# gamma_p={} gamma_i={}", fmt_vector(&self.gamma_p), fmt_vector(&self.gamma_i));
        let _ = writeln!(s, "ratio,converged,final_error,e_a_final,max_w_increase,blow_up,delta");
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{:.4},{},{:.6e},{:.6e},{:.6e},{},{}",
                c.ratio,
                c.converged,
                c.final_state_error,
                c.e_a_final,
                c.max_w_increase,
                c.blow_up.map_or("none".into(), |t| format!("{t:.6e}")),
                fmt_vector(&c.delta).replace(',', ";"),
            );
        }
        let _ = writeln!(
            s,
            "# SUMMARY cells={} converged={} error_monotone={} robustness_margin={} seed={}",
            self.cells.len(),
            self.cells.iter().filter(|c| c.converged).count(),
            self.error_monotone,
            self.robustness_margin.map_or("none".into(), |r| format!("{r:.4}")),
            seed
        );
        s
    }
}
