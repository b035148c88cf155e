use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pipbc::cli::simulate_runs;
use pipbc::sweep::{gain_sweep, CellHorizon};
use pipbc::{Registry, Scenario, ScenarioConfig};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn pipbc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pipbc")).args(args).output().unwrap()
}

fn run_config(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    pipbc(&args)
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn tp1_text() -> String {
    std::fs::read_to_string(configs().join("tp1.toml")).unwrap()
}

fn scenario(text: &str) -> Scenario {
    Scenario::from_config(ScenarioConfig::from_toml(text).unwrap(), &Registry::with_builtins()).unwrap()
}

#[test]
fn certify_tp1_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("certify", &configs().join("tp1.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("certification.txt")).unwrap();
    assert!(report.contains("[assumption1] pass"));
    assert!(report.lines().last().unwrap().starts_with("SUMMARY overall=pass"));
}

#[test]
fn certify_is_deterministic_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("tp1.toml");
    let read = |sub: &str, seed: &str| {
        let d = dir.path().join(sub);
        run_config("certify", &cfg, &d, &["--seed", seed]);
        std::fs::read_to_string(d.join("certification.txt")).unwrap()
    };
    let a = read("a", "5");
    let b = read("b", "5");
    let c = read("c", "6");
    assert_eq!(a, b);
    assert_ne!(a.lines().last(), c.lines().last());
}

#[test]
fn zero_gain_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &tp1_text().replace("gamma_p = [1.0]", "gamma_p = [0.0]"));
    let out = run_config("certify", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gains must be strictly positive"));
}

#[test]
fn non_hurwitz_a1_fails_certification() {
    let dir = tempfile::tempdir().unwrap();
    let text = tp1_text().replace("a1 = [[-2.0, 1.0], [0.5, -3.0]]", "a1 = [[1.0, 0.0], [0.0, -1.0]]");
    let cfg = write_config(dir.path(), "nh.toml", &text);
    assert_eq!(run_config("certify", &cfg, dir.path(), &[]).status.code(), Some(1));
}

#[test]
fn counterexamples_fail_certification() {
    for (name, item) in [("non_diagonally_stable", "assumption4.diagonal"), ("concave", "assumption3.iv")] {
        let dir = tempfile::tempdir().unwrap();
        let out = run_config("certify", &configs().join(format!("{name}.toml")), dir.path(), &[]);
        assert_eq!(out.status.code(), Some(1), "{name}");
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(stdout.contains(&format!("failed={item}")), "{name}: {stdout}");
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(pipbc(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(pipbc(&["certify", "--config", "/nonexistent.toml"]).status.code(), Some(2));
}

#[test]
fn simulate_writes_traces_and_converges() {
    let dir = tempfile::tempdir().unwrap();
    let text = tp1_text().replace("random = 20", "random = 2");
    let cfg = write_config(dir.path(), "tp1.toml", &text);
    let out = run_config("simulate", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/trace_1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x_1,x_2,u_1,z_1,W,Q,e_norm,ea_norm"));
    // 50 / (100 * 1e-3) intervals plus the initial row.
    assert_eq!(lines.count(), 501);
    let report = std::fs::read_to_string(dir.path().join("o/simulate.txt")).unwrap();
    assert!(report.contains("SUMMARY runs=2 converged=2"));
}

#[test]
fn enforce_certification_blocks_uncertified_plants() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(
        "simulate",
        &configs().join("non_diagonally_stable.toml"),
        dir.path(),
        &["--enforce-certification"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn blow_up_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = tp1_text()
        .replace("gamma_p = [1.0]", "gamma_p = [100.0]")
        .replace("step = 1e-3", "step = 0.05");
    let cfg = write_config(dir.path(), "fast.toml", &text);
    let out = run_config("simulate", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stderr).contains("last state"));
}

#[test]
fn equilibrium_prints_targets() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("equilibrium", &configs().join("tp1.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let s = String::from_utf8_lossy(&out.stdout);
    assert!(s.contains("t_bar = [1.0000000000e0, 1.0000000000e0]"), "{s}");
    assert!(s.contains("u_star = [3.17"), "{s}");
}

#[test]
fn equilibrium_start_has_no_audit_gap() {
    let base = scenario(&tp1_text());
    let x = base.x_star.clone();
    let u = base.u_star.clone().unwrap();
    let text = tp1_text().replace(
        "random = 20",
        &format!("states = [[{:e}, {:e}]]\nz0 = [{:e}]", x[0], x[1], u[0]),
    );
    let scn = scenario(&text);
    let runs = simulate_runs(&scn, None).unwrap();
    let a = runs[0].audit.as_ref().unwrap();
    assert!(a.max_w_increase <= 1e-12 && a.passivity_gap <= 1e-12, "{a:?}");
    assert!(runs[0].final_state_error <= 1e-12);
}

#[test]
fn perturbed_simulation_reports_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let text = tp1_text()
        .replace("random = 20", "random = 1")
        .replace("[integrator]", "[controller]\nvariant = \"perturbed\"\nratio = 0.1\n\n[integrator]")
        .replace("horizon = 50.0", "horizon = 5.0");
    let cfg = write_config(dir.path(), "pert.toml", &text);
    let out = run_config("simulate", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("variant=perturbed"));
}

#[test]
fn single_cell_sweep_matches_simulate() {
    let text = tp1_text().replace("random = 20", "random = 1");
    let scn = scenario(&text);
    let runs = simulate_runs(&scn, None).unwrap();
    let x0 = scn.initial_conditions().unwrap().remove(0);
    let cells = gain_sweep(&scn, &[1.0], &[1.0], &x0, &scn.z0().unwrap(), CellHorizon::Fixed).unwrap();
    let a = runs[0].audit.as_ref().unwrap();
    assert_eq!(cells.len(), 1);
    assert_eq!(cells[0].final_state_error, a.final_state_error);
    assert_eq!(cells[0].max_w_increase, a.max_w_increase);
    assert_eq!(cells[0].dotw_identity_residual, a.dotw_identity_residual);
    assert_eq!(cells[0].converged, runs[0].converged);
}

#[test]
fn perturbation_sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("tp1_perturbation.toml"))
        .unwrap()
        .replace("[output]", "[integrator]\nhorizon = 5.0\n\n[output]");
    let cfg = write_config(dir.path(), "p.toml", &text);
    let read = |sub: &str| {
        let d = dir.path().join(sub);
        assert_eq!(run_config("sweep", &cfg, &d, &[]).status.code(), Some(0));
        std::fs::read_to_string(d.join("perturbation.csv")).unwrap()
    };
    let a = read("a");
    assert_eq!(a, read("b"));
    assert_eq!(a.lines().filter(|l| l.starts_with("0.")).count(), 11);
    assert!(a.contains("# SUMMARY cells=11"));
}

#[test]
fn custom_plant_simulates() {
    let text = r#"
[plant]
kind = "custom"
name = "linear_damped"

[target]
actuated = [0.5]

[gains]
gamma_p = [1.0]
gamma_i = [1.0]
"#;
    let scn = scenario(text);
    assert!((scn.x_star[0] - 0.5).abs() < 1e-12);
    let runs = simulate_runs(&scn, None).unwrap();
    assert!(runs[0].converged, "{:?}", runs[0]);
    assert!(scn.certify().unwrap().overall);
}
