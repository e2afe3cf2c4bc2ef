use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fraccons"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().expect("binary runs");
    (
        status.code().unwrap_or(-1),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

#[test]
fn verify_linear_scenario_passes() {
    let (code, out, err) = run(bin().arg("verify").arg("--config").arg(scenario("linear_caputo.toml")));
    assert_eq!(code, 0, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("provenance_id,kind,alpha,n_steps"));
    assert_eq!(lines.len(), 1 + 3 * 4);
}

#[test]
fn verify_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for p in &paths {
        let (code, _, err) = run(bin()
            .arg("verify")
            .arg("--config")
            .arg(scenario("linear_caputo.toml"))
            .arg("--out")
            .arg(p));
        assert_eq!(code, 0, "{err}");
    }
    let a = std::fs::read(&paths[0]).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, std::fs::read(&paths[1]).unwrap());
}

#[test]
fn impossible_threshold_exits_with_check_code() {
    let (code, out, err) = run(bin()
        .arg("verify")
        .arg("--config")
        .arg(scenario("linear_caputo.toml"))
        .arg("--threshold")
        .arg("100"));
    assert_eq!(code, 4);
    assert!(!out.is_empty());
    assert!(err.contains("Trivial_Caputo"), "{err}");
}

#[test]
fn missing_config_exits_with_validation_code() {
    let (code, _, err) = run(bin().args(["verify", "--config", "/no/such/file.toml"]));
    assert_eq!(code, 2);
    assert!(err.starts_with("fraccons:"));
}

#[test]
fn invalid_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(scenario("linear_caputo.toml")).unwrap();
    std::fs::write(&p, text.replace("\"Table3_v1\"", "\"Table9_v1\"")).unwrap();
    let (code, _, err) = run(bin().arg("verify").arg("--config").arg(&p));
    assert_eq!(code, 2);
    assert!(err.contains("vectors[1]"), "{err}");
}

#[test]
fn solve_writes_grid_csv() {
    let (code, out, err) = run(bin()
        .arg("solve")
        .arg("--config")
        .arg(scenario("linear_caputo.toml"))
        .args(["--grids", "8"]));
    assert_eq!(code, 0, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 1 + 9);
    assert!(lines[0].starts_with("t\\x,"));
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
}

#[test]
fn catalog_from_flags() {
    let (code, out, err) = run(bin().args(["catalog", "--kind", "RL", "--alpha", "0.5", "--diffusivity", "power:2"]));
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("symmetries:"));
    assert!(out.contains("X1"));
}

#[test]
fn catalog_needs_kind() {
    let (code, _, err) = run(bin().args(["catalog", "--alpha", "0.5", "--diffusivity", "exponential"]));
    assert_eq!(code, 2);
    assert!(err.contains("--kind"), "{err}");
}

#[test]
fn selftest_single_criterion() {
    let (code, out, err) = run(bin().args(["selftest", "--criterion", "1"]));
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("[PASS]  1."), "{out}");
}
