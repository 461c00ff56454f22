use std::process::{Command, Output};

fn htsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_htsp")).args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

#[test]
fn generated_instances_validate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k5.txt");
    let path = path.to_str().unwrap();
    assert!(htsp(&["generate", "k5-gadget:1", "--out", path]).status.success());
    let check = htsp(&["validate", path]);
    assert!(check.status.success(), "{}", String::from_utf8_lossy(&check.stderr));
    let hierarchy = htsp(&["hierarchy", path]);
    assert!(hierarchy.status.success());
    assert!(!stdout(&hierarchy).is_empty());
}

#[test]
fn malformed_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "htsp 3 2\n0 1 1\n1 2 x\n").unwrap();
    assert!(!htsp(&["validate", path.to_str().unwrap()]).status.success());
}

#[test]
fn optimiser_prints_the_mixing_probability() {
    let out = htsp(&["optimize-params", "--format", "json"]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let lambda = value["lambda"]["value"].as_f64().unwrap();
    assert!((lambda - 0.4715).abs() < 1e-4);
    assert_eq!(value["beta"]["exact"], "1/12");
}

#[test]
fn stats_runs_are_reproducible_from_the_command_line() {
    let args = ["stats", "--family", "double-cycle:6", "--suite", "marginals", "--trials", "2000", "--seed", "9"];
    let first = htsp(&args);
    assert!(first.status.success());
    assert_eq!(stdout(&first), stdout(&htsp(&args)));
    assert!(stdout(&first).lines().count() > 1);
}
