use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn vpdirac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vpdirac")).args(args).env_remove("VPDIRAC_THREADS").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

/// Data lines of a CSV artifact with the provenance comment checked and removed.
fn table(path: &Path, hash: &str) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let first = lines.next().unwrap();
    assert!(first.starts_with("# vpdirac ") && first.ends_with(&format!("config {hash}")), "{first}");
    lines.map(str::to_string).collect()
}

const SMALL: &[&str] = &["--particles", "256", "--set", "diagnostics.density_grid.nodes=13"];

fn args<'a>(head: &[&'a str], dir: &'a str) -> Vec<&'a str> {
    let mut v = head.to_vec();
    v.extend_from_slice(SMALL);
    v.extend_from_slice(&["--output", dir]);
    v
}

#[test]
fn simulate_at_zero_horizon_reports_the_initial_state_only() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("t0");
    let out = vpdirac(&args(&["simulate", "--horizon", "0"], dir.to_str().unwrap()));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir);
    let hash = s["config_hash"].as_str().unwrap();
    assert_eq!(s["status"], "pass");
    assert_eq!(s["stored_times"], 1);
    let rows = table(&dir.join("series.csv"), hash);
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("t,mass,"));
    assert!(rows[1].starts_with("0,"));
    assert!(table(&dir.join("scenario.toml"), hash).iter().any(|l| l.contains("horizon = 0")));
    assert!(dir.join("flow.bin").is_file());
}

#[test]
fn converge_row_against_itself_is_exactly_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("conv");
    let mut a = args(&["converge", "--horizon", "0.2"], dir.to_str().unwrap());
    a.extend_from_slice(&["--set", "converge.ladder=[4, 8]", "--set", "converge.reference=8"]);
    let out = vpdirac(&a);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir);
    let rows = table(&dir.join("convergence.csv"), s["config_hash"].as_str().unwrap());
    assert_eq!(rows[0], "n,reference,gamma,radius,measure_sup,measure_final");
    assert_eq!(rows.len(), 3);
    assert!(rows[2].starts_with("8,8,"));
    assert!(rows[2].ends_with(",0,0"), "{}", rows[2]);
    assert_eq!(s["rows"][1]["measure_sup"], 0.0);
}

#[test]
fn identical_configuration_gives_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("det");
    let a = args(&["simulate", "--horizon", "0.1"], dir.to_str().unwrap());
    let read = |name: &str| std::fs::read(dir.join(name)).unwrap();
    let names = ["series.csv", "charge.csv", "flow.bin", "summary.json", "scenario.toml"];
    assert_eq!(code(&vpdirac(&a)), 0);
    let first: Vec<Vec<u8>> = names.iter().map(|n| read(n)).collect();
    assert_eq!(code(&vpdirac(&a)), 0);
    for (n, bytes) in names.iter().zip(&first) {
        assert_eq!(&read(n), bytes, "{n} differs between runs");
    }
}

#[test]
fn diagnose_reproduces_the_simulate_series() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    let diag = tmp.path().join("diag");
    assert_eq!(code(&vpdirac(&args(&["simulate", "--horizon", "0.1"], sim.to_str().unwrap()))), 0);
    let flow = format!("diagnose.flow={:?}", sim.join("flow.bin").to_str().unwrap());
    let out = vpdirac(&args(&["diagnose", "--set", &flow], diag.to_str().unwrap()));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (ss, sd) = (summary(&sim), summary(&diag));
    assert_eq!(
        table(&sim.join("series.csv"), ss["config_hash"].as_str().unwrap()),
        table(&diag.join("series.csv"), sd["config_hash"].as_str().unwrap())
    );
    assert_eq!(ss["diagnostics"], sd["diagnostics"]);
}

#[test]
fn stability_writes_phi_and_superlevel_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("stab");
    let mut a = args(&["stability", "--horizon", "0.2"], dir.to_str().unwrap());
    a.extend_from_slice(&["--set", "stability.pairs=[[4, 8]]"]);
    let out = vpdirac(&a);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir);
    let hash = s["config_hash"].as_str().unwrap();
    assert_eq!(s["verdicts"]["chebyshev_consistency"], true);
    // one row per stored time for the single parameter set
    assert_eq!(table(&dir.join("chebyshev.csv"), hash).len(), 1 + 5);
    assert_eq!(table(&dir.join("superlevels.csv"), hash).len(), 1 + 2 * 4);
}

#[test]
fn norms_suite_reports_its_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("norms");
    let out = vpdirac(&[
        "norms",
        "--set",
        "norms.nodes=[34, 50]",
        "--set",
        "norms.pairs=200",
        "--output",
        dir.to_str().unwrap(),
    ]);
    assert!(matches!(code(&out), 0 | 1), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir);
    for key in ["kernel_symmetric", "kernel_trace_free", "weak_norm_of_f_within_1pct"] {
        assert_eq!(s["verdicts"][key], true, "{key}");
    }
    assert_eq!(table(&dir.join("norms.csv"), s["config_hash"].as_str().unwrap()).len(), 3);
}

#[test]
fn config_command_echoes_the_canonical_form() {
    let out = vpdirac(&["config", "--set", "simulation.n=16"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("n = 16"));
    let s = vpdirac_cli::scenario::parse_str(&text, "echo", None, &[]).unwrap();
    assert_eq!(s.simulation.n, 16);
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path();

    // configuration errors
    let bad = base.join("bad.toml");
    std::fs::write(&bad, "[simulation]\nn = 0\n").unwrap();
    let out = vpdirac(&["simulate", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("simulation.n"));
    assert_eq!(code(&vpdirac(&["simulate", "--set", "simulation.colour=1"])), 2);
    assert_eq!(code(&vpdirac(&["diagnose", "--set", "diagnose.flow=\"/no/such/flow.bin\""])), 2);
    let threads = Command::new(env!("CARGO_BIN_EXE_vpdirac"))
        .args(["config"])
        .env("VPDIRAC_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&threads), 2);

    // a failing verdict: identical pairs cannot show a decreasing Φ
    let dir = base.join("verdict");
    let mut a = args(&["stability", "--horizon", "0.1"], dir.to_str().unwrap());
    a.extend_from_slice(&["--set", "stability.pairs=[[4, 8], [4, 8]]"]);
    assert_eq!(code(&vpdirac(&a)), 1);
    assert_eq!(summary(&dir)["status"], "fail");

    // a runtime failure leaves a flagged partial summary
    let junk = base.join("junk.bin");
    std::fs::write(&junk, b"not a flow").unwrap();
    let dir = base.join("runtime");
    let flow = format!("diagnose.flow={:?}", junk.to_str().unwrap());
    let out = vpdirac(&["diagnose", "--set", &flow, "--output", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let s = summary(&dir);
    assert_eq!(s["status"], "error");
    assert_eq!(s["partial"], true);
    assert_eq!(s["artifacts"][0], "scenario.toml");
}

#[test]
fn thread_variable_gives_reproducible_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("threads");
    let a = args(&["simulate", "--horizon", "0.05"], dir.to_str().unwrap());
    let out = Command::new(env!("CARGO_BIN_EXE_vpdirac")).args(&a).env("VPDIRAC_THREADS", "1").output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read(dir.join("series.csv")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_vpdirac")).args(&a).env("VPDIRAC_THREADS", "1").output().unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read(dir.join("series.csv")).unwrap(), first);
}

#[test]
fn shipped_acceptance_scenario_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("acceptance");
    let file = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/acceptance.toml");
    let out = vpdirac(&["run", file.to_str().unwrap(), "--output", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir);
    assert_eq!(s["status"], "pass");
    let verdicts = s["verdicts"].as_object().unwrap();
    for key in ["mass_bitwise_constant", "energy_drift_le_1e-3", "energy_components_nonnegative", "charge_bounds"] {
        assert_eq!(verdicts[key], true, "{key}");
    }
}
