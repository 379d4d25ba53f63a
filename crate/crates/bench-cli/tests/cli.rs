use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_metalevel-bench"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("metalevel-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_BANDIT: &[&str] = &["train", "--domain", "bandit", "--k", "3", "--cost", "0.01", "--iterations", "12"];

#[test]
fn train_writes_weights_and_trace_and_is_deterministic() {
    let a = scratch("train-a");
    let b = scratch("train-b");
    for dir in [&a, &b] {
        let o = run(SMALL_BANDIT, dir);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let wa = std::fs::read(a.join("weights.toml")).unwrap();
    let wb = std::fs::read(b.join("weights.toml")).unwrap();
    assert_eq!(wa, wb);
    let trace = std::fs::read_to_string(a.join("trace_bandit_3_1e-2.csv")).unwrap();
    assert!(trace.starts_with("# metalevel-trace v1"));
    assert_eq!(trace.lines().count(), 2 + 12);

    let o = run(&["evaluate", "--domain", "bandit", "--k", "3", "--cost", "0.01", "--episodes", "300"], &a);
    assert!(o.status.success(), "{}", stderr(&o));
    let results = std::fs::read_to_string(a.join("results_bandit.csv")).unwrap();
    // metadata, header and one row per policy
    assert_eq!(results.lines().count(), 2 + 5);
    assert!(std::fs::read_to_string(a.join("comparisons_bandit.csv")).unwrap().contains("bmps,blinkered"));
    for dir in [a, b] {
        std::fs::remove_dir_all(dir).unwrap();
    }
}

#[test]
fn evaluate_without_weights_names_the_cell() {
    let out = scratch("missing");
    let o = run(&["evaluate", "--domain", "bandit", "--k", "2", "--cost", "0.01"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[missing-artifact]"), "{}", stderr(&o));

    let o = run(SMALL_BANDIT, &out);
    assert!(o.status.success());
    let o = run(&["evaluate", "--domain", "bandit", "--k", "2", "--cost", "0.01"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bandit size=2 cost=0.01"), "{}", stderr(&o));
    std::fs::remove_dir_all(out).unwrap();
}

#[test]
fn solve_refuses_large_trees_and_dumps_small_ones() {
    let out = scratch("solve");
    let o = run(&["solve", "--domain", "tree", "--height", "6", "--cost", "0.125"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[resource-limit]"), "{}", stderr(&o));

    let o = run(&["solve", "--domain", "stopping", "--cost", "1"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("V*(b0) = 0.000000, optimal first action Terminate"), "{text}");
    std::fs::remove_dir_all(out).unwrap();
}

#[test]
fn regress_writes_table_and_scatter() {
    let out = scratch("regress");
    let o = run(&["regress", "--cost", "0.01", "--cost", "0.1"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(out.join("regression.csv")).unwrap();
    assert_eq!(table.lines().count(), 2 + 2);
    assert!(out.join("regression_scatter_2e-2.csv").exists());
    std::fs::remove_dir_all(out).unwrap();
}

#[test]
fn config_errors_are_reported() {
    let out = scratch("config");
    let o = run(&["train", "--domain", "chess"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[config]"), "{}", stderr(&o));

    let cfg = out.join("bad.toml");
    std::fs::write(&cfg, "domain = \"bandit\"\nunknown_field = 1\n").unwrap();
    let o = bin().args(["train", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[parse]"), "{}", stderr(&o));
    std::fs::remove_dir_all(out).unwrap();
}
