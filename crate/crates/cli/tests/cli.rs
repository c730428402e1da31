//! End-to-end runs of the command-line binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smoothppl")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, src: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, src).unwrap();
    p.to_string_lossy().into_owned()
}

const NCONV: &str = "(program (params (theta real)) (body (if (transform normal (lam s (add s theta))) 0 1)))";
const EX0G: &str =
    "(program (params (theta real)) (body (if 0 (add (mul theta theta) 1) (mul (add theta -1) (add theta -1)))))";

#[test]
fn typecheck_reports_trace_and_type() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "m.sp",
        "(program (params (x real)) (body (if x (sample normal) (add (sample exponential) (sample exponential)))))",
    );
    let o = run(&["typecheck", "--system", "basic", &f]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "trace: [normal, exponential, exponential]\ntype: real\n");
    let o = run(&["typecheck", "--system", "sgd", &f]);
    assert_eq!(stdout(&o), "trace: [normal, exponential, exponential]\ntype: real@{e=0}\n");
}

#[test]
fn typecheck_failure_names_rule_and_path() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "g.sp", EX0G);
    let o = run(&["typecheck", "--system", "unif", &f]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("rejected: guard not guard-safe"));
    assert!(out.contains("rule: if"));
    assert!(out.contains("path: body/if.guard"));
}

#[test]
fn eval_prints_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "g.sp", EX0G);
    assert_eq!(stdout(&run(&["eval", &f, "--theta", "0.5"])), "2.5000000000000000e-1\n");
    assert_eq!(stdout(&run(&["eval", &f, "--theta", "0.5", "--eta", "0.1"])), "7.5000000000000000e-1\n");
    let n = write(dir.path(), "n.sp", NCONV);
    let o = stdout(&run(&["eval", &n, "--theta", "1", "--trace", "-2", "--weights"]));
    assert!(o.starts_with("value: 0.0000000000000000e0\nlog_weight: "));
    let o = run(&["eval", &n, "--theta", "1", "--trace", "-2,3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
}

#[test]
fn grad_with_check() {
    let dir = tempfile::tempdir().unwrap();
    let n = write(dir.path(), "n.sp", NCONV);
    let out = stdout(&run(&["grad", &n, "--theta", "0.3", "--trace", "0.1", "--eta", "0.1", "--check", "1e-5"]));
    let g: f64 = out.lines().find_map(|l| l.strip_prefix("gradient: ")).unwrap().parse().unwrap();
    assert!((g - 0.176_627).abs() < 1e-5);
    let dev: f64 = out.lines().find_map(|l| l.strip_prefix("max_relative_deviation: ")).unwrap().parse().unwrap();
    assert!(dev < 1e-5);
}

#[test]
fn smooth_then_eval_internal() {
    let dir = tempfile::tempdir().unwrap();
    let n = write(dir.path(), "n.sp", NCONV);
    let out = dir.path().join("n_smooth.sp");
    assert!(run(&["smooth", &n, "-o", out.to_str().unwrap()]).status.success());
    let compiled = fs::read_to_string(&out).unwrap();
    assert!(compiled.contains("(sigma"));
    assert!(!run(&["eval", out.to_str().unwrap(), "--theta", "0.3", "--trace", "0.1", "--eta", "0.1"])
        .status
        .success());
    let a = stdout(&run(&[
        "eval",
        out.to_str().unwrap(),
        "--internal",
        "--theta",
        "0.3",
        "--trace",
        "0.1",
        "--eta",
        "0.1",
    ]));
    let b = stdout(&run(&["eval", &n, "--theta", "0.3", "--trace", "0.1", "--eta", "0.1"]));
    assert_eq!(a, b);
}

#[test]
fn optimize_writes_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "g.sp", EX0G);
    let csv = dir.path().join("traj.csv");
    let o = run(&[
        "optimize",
        &f,
        "--estimator",
        "smooth",
        "--optimizer",
        "sgd",
        "--eta",
        "0.1",
        "--iters",
        "2000",
        "--schedule",
        "rm:0.5",
        "--seed",
        "3",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,theta_1,grad_norm,elapsed_ns"));
    assert_eq!(text.lines().count(), 2002);
    let last: f64 = text.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((last - 0.5).abs() < 0.01);
}

#[test]
fn bench_writes_deterministic_csvs() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let o = run(&[
            "bench",
            "--model",
            "example1",
            "--estimators",
            "smooth:0.15,reparam,score",
            "--iters",
            "300",
            "--seed",
            "7",
            "--objective-samples",
            "20",
            "--variance-samples",
            "20",
            "--budget",
            "0.05",
            "--out",
            d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["elbo.csv", "variance.csv"] {
        let a = fs::read(dirs[0].path().join(file)).unwrap();
        assert_eq!(a, fs::read(dirs[1].path().join(file)).unwrap(), "{file}");
    }
    let elbo = fs::read_to_string(dirs[0].path().join("elbo.csv")).unwrap();
    assert_eq!(elbo.lines().count(), 1 + 3 * 4);
    let wnv = fs::read_to_string(dirs[0].path().join("wnv.csv")).unwrap();
    assert!(wnv.starts_with("estimator,iterations,cost_ratio,"));
}

#[test]
fn oracle_and_builtins() {
    let o = stdout(&run(&["oracle", "builtin:nconv", "--theta", "1"]));
    let v: f64 = o.lines().next().unwrap().strip_prefix("expectation: ").unwrap().parse().unwrap();
    assert!((v - 0.841_344_746_068_542_9).abs() < 1e-9);
    let src = stdout(&run(&["show-model", "ex0g"]));
    assert!(src.starts_with("(program (params (theta real))"));
    assert_eq!(run(&["show-model", "nope"]).status.code(), Some(2));
}
