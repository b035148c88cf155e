//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p pipbc --test acceptance`.

use std::path::Path;
use std::time::Instant;

use pipbc::cli::simulate_runs;
use pipbc::report::RunSummary;
use pipbc::sweep::{gain_sweep, perturbation_sweep, CellHorizon, GainCell};
use pipbc::{Registry, Scenario, ScenarioConfig};
use pipbc_core::controller::{lambda_i, lambda_p, matched_ideal_gains, IdealPiPbc, PiLaw, RobustGains};
use pipbc_core::instances;
use pipbc_core::linalg::min_symmetric_eigenvalue;
use pipbc_core::model::{solve_ustar, InputMatrix, PlantModel};
use pipbc_core::sampling::BoxSampler;
use pipbc_core::sim::{simulate_open_loop, IntegratorConfig, Oracle, PiecewiseConstant};
use pipbc_core::storage::{DiagonalWeights, SeparableStorage};
use pipbc_core::thermal::{self, ThermalModel};
use pipbc_core::verify::{certify, Subject};
use pipbc_core::{Matrix, Vector};

const STEP: f64 = 1e-3;
const HORIZON: f64 = 50.0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn config(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ScenarioConfig::load(&path).expect("bundled config")
}

fn scenario(cfg: ScenarioConfig) -> Scenario {
    Scenario::from_config(cfg, &Registry::with_builtins()).expect("bundled scenario")
}

fn with_step(mut cfg: ScenarioConfig, step: f64) -> ScenarioConfig {
    cfg.integrator.step = step;
    cfg.integrator.record_every = usize::MAX;
    cfg
}

/// Closed-loop runs shared by the regulation, decrease-identity and e_a
/// criteria.
struct RunSet {
    name: &'static str,
    runs: Vec<RunSummary>,
    halved: Vec<RunSummary>,
    seconds: f64,
}

fn run_set(name: &'static str, file: &str) -> RunSet {
    let base = config(file);
    let clock = Instant::now();
    let runs = simulate_runs(&scenario(with_step(base.clone(), STEP)), None).expect("simulation");
    let seconds = clock.elapsed().as_secs_f64();
    let halved = simulate_runs(&scenario(with_step(base, STEP / 2.0)), None).expect("simulation");
    RunSet {
        name,
        runs,
        halved,
        seconds,
    }
}

fn regulation(sets: &[RunSet]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut seconds = 0.0;
    for s in sets.iter().filter(|s| s.name != "PH-1") {
        seconds += s.seconds;
        let worst = s.runs.iter().map(|r| r.final_state_error).fold(0.0f64, f64::max);
        let reached = s
            .runs
            .iter()
            .filter(|r| r.final_state_error <= 1e-3 && r.final_time <= HORIZON + 1e-9)
            .count();
        ok &= s.runs.len() == 20 && reached == 20;
        parts.push(format!("{} {reached}/{} worst={worst:.2e}", s.name, s.runs.len()));
    }
    outcome(ok, format!("{}; simulated in {seconds:.1}s", parts.join(", ")))
}

fn gain_universality(cells: &[GainCell], seconds: f64) -> Outcome {
    let converged = cells.iter().filter(|c| c.converged).count();
    let max_dw = cells.iter().map(|c| c.max_w_increase).fold(0.0f64, f64::max);
    let slowest = cells
        .iter()
        .filter_map(|c| c.settled_at.map(|t| (t, c.gamma_p, c.gamma_i)))
        .fold((0.0, 0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    outcome(
        cells.len() == 25 && converged == 25 && max_dw <= 1e-6,
        format!(
            "{converged}/{} cells settled, max dW={max_dw:.2e}, slowest settle t={:.0} at gamma=({}, {}); {seconds:.1}s",
            cells.len(),
            slowest.0,
            slowest.1,
            slowest.2
        ),
    )
}

/// Residual bound `C h²` with `C = max(100, W'''/4)`; the central
/// difference alone contributes `W''' h² / 6`.
fn residual_bound(w_third: f64, h: f64) -> f64 {
    100.0f64.max(0.25 * w_third) * h * h
}

struct ResidualPair {
    residual: f64,
    halved: f64,
    w_third: f64,
}

fn decrease_identity(pairs: &[(String, ResidualPair)], settle_cells: &[GainCell]) -> Outcome {
    let mut ok = true;
    let mut worst_ratio = f64::INFINITY;
    let mut worst_margin = 0.0f64;
    let mut tightest = String::new();
    let mut failures = Vec::new();
    for (name, p) in pairs {
        let bound = residual_bound(p.w_third, STEP);
        let ratio = p.residual / p.halved;
        worst_ratio = worst_ratio.min(ratio);
        if p.residual / bound > worst_margin {
            worst_margin = p.residual / bound;
            tightest = name.clone();
        }
        if p.residual.is_nan() || p.residual > bound || ratio.is_nan() || ratio < 3.0 {
            ok = false;
            failures.push(format!("{name}: residual={:.2e} bound={bound:.2e} ratio={ratio:.2}", p.residual));
        }
    }
    for c in settle_cells.iter().filter(|c| c.converged) {
        let r = c.dotw_identity_residual.unwrap_or(f64::INFINITY);
        let bound = residual_bound(c.w_third_derivative, STEP);
        if r / bound > worst_margin {
            worst_margin = r / bound;
            tightest = format!("settled cell ({}, {})", c.gamma_p, c.gamma_i);
        }
        if r.is_nan() || r > bound {
            ok = false;
            failures.push(format!("settled cell ({}, {}): residual={r:.2e} bound={bound:.2e}", c.gamma_p, c.gamma_i));
        }
    }
    let mut detail = format!(
        "{} halving pairs + {} settled cells, worst residual/bound={worst_margin:.2} ({tightest}), worst halving ratio={worst_ratio:.2}",
        pairs.len(),
        settle_cells.len()
    );
    if !failures.is_empty() {
        detail += &format!("; {}", failures.join("; "));
    }
    outcome(ok, detail)
}

fn run_pairs(sets: &[RunSet]) -> Vec<(String, ResidualPair)> {
    let mut pairs = Vec::new();
    for s in sets {
        for (a, b) in s.runs.iter().zip(&s.halved).filter(|(a, _)| a.converged) {
            let (Some(ra), Some(rb)) = (&a.audit, &b.audit) else {
                continue;
            };
            pairs.push((
                format!("{} run {}", s.name, a.index),
                ResidualPair {
                    residual: ra.dotw_identity_residual.unwrap_or(f64::INFINITY),
                    halved: rb.dotw_identity_residual.unwrap_or(0.0),
                    w_third: ra.w_third_derivative,
                },
            ));
        }
    }
    pairs
}

/// The sweep grid over the fixed horizon, at `h` and `h / 2`.
fn truncated_sweep_pairs() -> Vec<(String, ResidualPair)> {
    let cells = |step: f64| {
        let cfg = with_step(config("tp1_sweep.toml"), step);
        let scn = scenario(cfg);
        let sweep = scn.config.sweep.clone().expect("sweep section");
        let x0 = scn.initial_conditions().expect("initial condition").remove(0);
        gain_sweep(&scn, &sweep.gamma_p, &sweep.gamma_i, &x0, &scn.z0().unwrap(), CellHorizon::Fixed).expect("sweep")
    };
    let full = cells(STEP);
    let half = cells(STEP / 2.0);
    full.iter()
        .zip(&half)
        .filter(|(c, _)| c.blow_up.is_none())
        .map(|(c, d)| {
            (
                format!("sweep cell ({}, {}) to t={HORIZON}", c.gamma_p, c.gamma_i),
                ResidualPair {
                    residual: c.dotw_identity_residual.unwrap_or(f64::INFINITY),
                    halved: d.dotw_identity_residual.unwrap_or(0.0),
                    w_third: c.w_third_derivative,
                },
            )
        })
        .collect()
}

fn incremental_passivity() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, file, amplitude) in [("TP-1", "tp1.toml", 1.0), ("PH-1", "ph1.toml", 1.0)] {
        let scn = scenario(config(file));
        let storage = scn.storage.clone().expect("storage");
        let u_star = scn.u_star.clone().expect("u*");
        let oracle = Oracle::new(storage, u_star.clone()).expect("oracle");
        let cfg = IntegratorConfig::new(STEP, 10.0).unwrap().with_record_every(usize::MAX);
        let starts = scn.initial_conditions().expect("initial conditions");
        let mut worst = 0.0f64;
        for (k, x0) in starts.iter().take(10).enumerate() {
            let signal = PiecewiseConstant::random(scn.m(), 10, 1.0, amplitude, 1000 + k as u64);
            let tr = simulate_open_loop(&scn.plant, &u_star, &signal, x0, &cfg, Some(&oracle)).expect("open loop");
            worst = worst.max(tr.audit.expect("oracle attached").passivity_gap);
        }
        ok &= worst <= 1e-5;
        parts.push(format!("{name} max gap={worst:.2e}"));
    }
    outcome(ok, format!("10 signals each, {}", parts.join(", ")))
}

fn relative(a: &Vector, b: &Vector, scale: f64) -> f64 {
    if scale == 0.0 {
        (a - b).norm()
    } else {
        (a - b).norm() / scale
    }
}

/// Worst relative disagreement over 100 seeded states and integrator values.
fn equivalence_on(
    robust: &dyn PiLaw,
    ideal: &dyn PiLaw,
    input: &InputMatrix,
    lower: Vector,
    upper: Vector,
    seed: u64,
) -> f64 {
    let m = input.dims().m();
    let states = BoxSampler::new(lower, upper, 100, seed).unwrap().points().unwrap();
    let zs = BoxSampler::new(Vector::from_element(m, -5.0), Vector::from_element(m, 5.0), 100, seed + 1)
        .unwrap()
        .points()
        .unwrap();
    let mut worst = 0.0f64;
    for (x, z) in states.iter().zip(&zs) {
        let x_a = input.actuated_part(x.as_slice());
        let r = robust.step(&x_a, z);
        let i = ideal.step(&x_a, z);
        // Relative to the proportional term, which is where the two forms differ.
        let prop = (&r.u - z).norm();
        worst = worst.max(relative(&r.u, &i.u, prop.max(r.u.norm())));
        worst = worst.max(relative(&r.z_dot, &i.z_dot, r.z_dot.norm()));
    }
    worst
}

fn ideal_law(storage: &SeparableStorage, gains: &RobustGains) -> IdealPiPbc {
    let matched = matched_ideal_gains(gains, storage.weights()).unwrap();
    IdealPiPbc::new(matched, storage.clone(), gains.g2().clone()).unwrap()
}

fn lambda_draws() -> (usize, f64) {
    let mut draws = 0;
    let mut worst = f64::INFINITY;
    let mut seed = 77;
    while draws < 100 {
        let m = 1 + draws % 3;
        let v = BoxSampler::new(
            Vector::from_element(m * m + 3 * m, -1.0),
            Vector::from_element(m * m + 3 * m, 1.0),
            1,
            seed,
        )
        .unwrap()
        .points()
        .unwrap()
        .remove(0);
        seed += 1;
        let g2 = Matrix::from_column_slice(m, m, &v.as_slice()[..m * m]);
        if g2.determinant().abs() < 1e-3 {
            continue;
        }
        let log = |k: usize| Vector::from_fn(m, |i, _| 10f64.powf(2.0 * v[m * m + k * m + i]));
        let Ok(gains) = RobustGains::new(log(0), log(1), g2) else {
            continue;
        };
        let weights = DiagonalWeights::new(log(2)).unwrap();
        let lp = lambda_p(&gains, &weights).unwrap();
        let li = lambda_i(&gains, &weights).unwrap();
        worst = worst.min(min_symmetric_eigenvalue(&lp)).min(min_symmetric_eigenvalue(&li));
        draws += 1;
    }
    (draws, worst)
}

fn equivalence() -> Outcome {
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for (name, file) in [("TP-1", "tp1.toml"), ("TP-2", "tp2.toml"), ("PH-1", "ph1.toml")] {
        let scn = scenario(config(file));
        let (gp, gi) = scn.gains();
        let robust = scn.robust_law(gp.clone(), gi.clone()).unwrap();
        let ideal = ideal_law(scn.storage.as_ref().unwrap(), &scn.robust_gains(gp, gi).unwrap());
        let (lo, hi) = match &scn.kind {
            pipbc::scenario::PlantKind::Thermal(m) => m.default_box(Some(&scn.x_star)),
            _ => (scn.x_star.add_scalar(-2.0), scn.x_star.add_scalar(2.0)),
        };
        let e = equivalence_on(&robust, &ideal, scn.plant.input(), lo, hi, 31);
        worst = worst.max(e);
        parts.push(format!("{name} {e:.1e}"));
    }
    let (draws, min_eig) = lambda_draws();
    outcome(
        worst <= 1e-12 && draws == 100 && min_eig > 0.0,
        format!(
            "max relative gap {} over 100 states each; min eig(Lambda_P, Lambda_I)={min_eig:.2e} over {draws} draws",
            parts.join(", ")
        ),
    )
}

fn ea_convergence(sets: &[RunSet], cells: &[GainCell]) -> Outcome {
    let mut count = 0;
    let mut worst = 0.0f64;
    for s in sets {
        for r in s.runs.iter().filter(|r| r.final_state_error <= 1e-3) {
            count += 1;
            worst = worst.max(r.e_a_final.unwrap_or(f64::INFINITY));
        }
    }
    for c in cells.iter().filter(|c| c.converged) {
        count += 1;
        worst = worst.max(c.e_a_final);
    }
    outcome(worst <= 1e-5, format!("{count} convergent runs, max |e_a(T_f)|={worst:.2e}"))
}

fn thermal_sampler(model: &ThermalModel, t: &Vector) -> BoxSampler {
    thermal::default_sampler(model, Some(t), 10_000, 11).unwrap()
}

fn certification() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    let (tp1, t1) = instances::tp1_with_target();
    let r = certify(Subject::Thermal(&tp1), &t1, &thermal_sampler(&tp1, &t1));
    ok &= r.overall;
    parts.push(format!("TP-1 overall={}", r.overall));

    let mut expect = |name: &str, failed: Vec<&'static str>, item: &'static str| {
        let hit = failed == vec![item];
        ok &= hit;
        parts.push(format!("{name} failed={}", failed.join("+")));
    };
    let nds = instances::non_diagonally_stable();
    let t_bar = nds.t_bar().clone();
    let r = certify(Subject::Thermal(&nds), &t_bar, &thermal_sampler(&nds, &t_bar));
    expect("non-diagonally-stable", r.failed_items(), "assumption4.diagonal");

    let c = instances::concave_storage();
    let sampler = BoxSampler::new(c.x_star.add_scalar(-2.0), c.x_star.add_scalar(2.0), 10_000, 11).unwrap();
    let r = certify(
        Subject::Custom {
            g: &c.g,
            field: c.field.clone(),
            storage: Some(&c.storage),
        },
        &c.x_star,
        &sampler,
    );
    expect("concave", r.failed_items(), "assumption3.iv");

    let (m, t) = instances::tp1_non_assignable_target();
    let r = certify(Subject::Thermal(&m), &t, &thermal_sampler(&m, &t));
    expect("non-assignable", r.failed_items(), "assumption2");
    outcome(ok, parts.join(", "))
}

/// Worst `‖∇H - ∇_FD H‖ / ‖∇H‖` with central differences.
fn gradient_gap(storage: &SeparableStorage, sampler: &BoxSampler) -> f64 {
    let mut worst = 0.0f64;
    for x in sampler.points().unwrap() {
        let g = storage.gradient(&x);
        let fd = Vector::from_fn(x.len(), |i, _| {
            let h = 1e-6 * x[i].abs().max(1.0);
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += h;
            b[i] -= h;
            (storage.value(&a) - storage.value(&b)) / (2.0 * h)
        });
        worst = worst.max((g - fd).norm() / storage.gradient(&x).norm());
    }
    worst
}

fn hygiene() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, (model, t)) in [("TP-1", instances::tp1_with_target()), ("TP-2", instances::tp2_with_target())] {
        let cert = thermal::diagonal_stability_solve(model.a1()).unwrap();
        let sampler = thermal::default_sampler(&model, Some(&t), 100, 21).unwrap();
        let g = gradient_gap(&thermal::temperature_storage(&model, &cert.p, t.clone()).unwrap(), &sampler);
        let shifted = BoxSampler::new(
            sampler.lower() - model.t_bar(),
            sampler.upper() - model.t_bar(),
            100,
            21,
        )
        .unwrap();
        let x_star = &t - model.t_bar();
        let gs = gradient_gap(&thermal::storage_from_certificate(&model, &cert.p, x_star).unwrap(), &shifted);
        let bar = model.equilibrium_residual();
        let plant = model.temperature_plant();
        let eq = plant.rhs(&t, &model.u_star(&t).unwrap()).norm();
        ok &= g <= 1e-5 && gs <= 1e-5 && bar <= 1e-10 && eq <= 1e-8;
        parts.push(format!("{name} grad={:.1e} T_bar={bar:.1e} eq={eq:.1e}", g.max(gs)));
    }
    let nds = instances::non_diagonally_stable();
    let bar = nds.equilibrium_residual();
    let eq = nds.temperature_plant().rhs(nds.t_bar(), &nds.u_star(nds.t_bar()).unwrap()).norm();
    ok &= bar <= 1e-10 && eq <= 1e-8;
    parts.push(format!("non-diagonally-stable T_bar={bar:.1e} eq={eq:.1e}"));

    let ph = instances::ph1();
    let plant = ph.plant();
    let x_star = pipbc_core::model::complete_assignable(
        &plant,
        &Vector::from_row_slice(&instances::PH1_TARGET),
        &Vector::zeros(1),
        1e-12,
    )
    .unwrap();
    let sampler = BoxSampler::new(Vector::from_vec(vec![-1.0, -2.0]), Vector::from_vec(vec![5.0, 2.0]), 100, 21).unwrap();
    let g = gradient_gap(ph.hamiltonian(), &sampler);
    let eq = plant.rhs(&x_star, &solve_ustar(&plant, &x_star, 1e-8).unwrap()).norm();
    ok &= g <= 1e-5 && eq <= 1e-8;
    parts.push(format!("PH-1 grad={g:.1e} eq={eq:.1e}"));

    let c = instances::concave_storage();
    let plant = PlantModel::new(c.field.clone(), InputMatrix::new(c.g.clone()).unwrap()).unwrap();
    let eq = plant.rhs(&c.x_star, &solve_ustar(&plant, &c.x_star, 1e-8).unwrap()).norm();
    ok &= eq <= 1e-8;
    parts.push(format!("concave eq={eq:.1e}"));
    outcome(ok, parts.join(", "))
}

fn perturbation_report() -> Outcome {
    let render = || {
        let scn = scenario(config("tp1_perturbation.toml"));
        let ratios = scn.config.sweep.clone().expect("sweep section").ratios;
        let report = perturbation_sweep(&scn, &ratios).expect("perturbation sweep");
        (report.render(scn.seed()), report, ratios)
    };
    let (a, report, ratios) = render();
    let (b, _, _) = render();
    let covers = ratios.first() == Some(&0.0) && ratios.last() == Some(&0.5);
    outcome(
        a == b && covers && report.cells.len() == ratios.len(),
        format!(
            "{} ratios in [0, 0.5], deterministic={}, error_monotone={}, robustness_margin={}",
            report.cells.len(),
            a == b,
            report.error_monotone,
            report.robustness_margin.map_or("none".into(), |r| format!("{r:.2}"))
        ),
    )
}

fn main() {
    let sets = vec![
        run_set("TP-1", "tp1.toml"),
        run_set("TP-2", "tp2.toml"),
        run_set("PH-1", "ph1.toml"),
    ];

    let clock = Instant::now();
    let scn = scenario(config("tp1_sweep.toml"));
    let sweep = scn.config.sweep.clone().expect("sweep section");
    let x0 = scn.initial_conditions().expect("initial condition").remove(0);
    let horizon = CellHorizon::Settle {
        cap: sweep.settle_horizon.expect("settle horizon"),
        dwell: sweep.dwell,
    };
    let cells = gain_sweep(&scn, &sweep.gamma_p, &sweep.gamma_i, &x0, &scn.z0().unwrap(), horizon).expect("sweep");
    let sweep_seconds = clock.elapsed().as_secs_f64();

    let mut pairs = run_pairs(&sets);
    pairs.extend(truncated_sweep_pairs());

    let results: Vec<(&str, Outcome)> = vec![
        ("regulation", regulation(&sets)),
        ("gain universality", gain_universality(&cells, sweep_seconds)),
        ("Lyapunov decrease identity", decrease_identity(&pairs, &cells)),
        ("incremental passivity", incremental_passivity()),
        ("robust/ideal equivalence", equivalence()),
        ("e_a convergence", ea_convergence(&sets, &cells)),
        ("certification soundness", certification()),
        ("numerical hygiene", hygiene()),
        ("perturbation report", perturbation_report()),
    ];
    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        if !o.passed {
            failed += 1;
        }
        println!("{} criterion {} ({name}): {}", if o.passed { "PASS" } else { "FAIL" }, k + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
