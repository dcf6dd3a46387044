use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caloric-lab")).current_dir(dir).args(args).output().expect("binary runs")
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn certify_hardy_writes_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--out", "out", "certify", "hardy", "--oracle", "const1", "--a", "0.25"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&dir.path().join("out/hardy.json"));
    assert_eq!(r["pass"], true);
    assert_eq!(r["provenance"]["source"], "const1");
    assert!(dir.path().join("out/summary.txt").exists());
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for o in ["a", "b"] {
        let out = run(dir.path(), &["--out", o, "certify", "hardy", "--oracle", "heat3"]);
        assert_eq!(out.status.code(), Some(0));
    }
    let a = std::fs::read(dir.path().join("a/hardy.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/hardy.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn radius_above_one_half_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[field]\noracle = \"heat2\"\n[certify.doubling]\nradii = [0.75]\n").unwrap();
    let out = run(dir.path(), &["certify", "doubling", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0.75"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[field]\noracle = \"heat2\"\nradius = 3\n").unwrap();
    let out = run(dir.path(), &["trace", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn trace_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[field]\noracle = \"heat2\"\n[trace]\ntimes = [0.0, 0.5]\n").unwrap();
    let out = run(dir.path(), &["--out", "o", "trace", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/trace.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("o/trace.json").exists());
}

#[test]
fn oracle_list_names_the_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["oracles", "list"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("heat2\t")));
}

#[test]
fn bad_subcommand_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["certify", "nosuch"]).status.code(), Some(1));
}
