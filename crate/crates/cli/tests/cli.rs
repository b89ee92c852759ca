use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn octvox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_octvox")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_run_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = dir.path().join("out");
    let g = octvox(&["gen-data", "--duration", "3", "--seed", "4", "--out", p(&data)]);
    assert!(g.status.success(), "{}", String::from_utf8_lossy(&g.stderr));
    assert!(data.join("scans").join("index.csv").exists());

    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# test config\nk = 5\nradius = 0.875\ntiming = true\n").unwrap();
    let r = octvox(&["run", "--config", p(&cfg), "--data", p(&data), "--out", p(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(stdout(&r).contains("frames: 30"));
    let traj = fs::read_to_string(out.join("trajectory.tum")).unwrap();
    assert_eq!(traj.lines().count(), 30);
    assert_eq!(traj.lines().next().unwrap().split(' ').count(), 8);

    let e = octvox(&[
        "eval",
        "--est",
        p(&out.join("trajectory.tum")),
        "--gt",
        p(&data.join("gt.tum")),
        "--metrics",
        p(&out.join("metrics.csv")),
        "--util",
        p(&out.join("util.csv")),
    ]);
    assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
    let text = stdout(&e);
    let ate: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("ATE RMSE (aligned): "))
        .and_then(|v| v.trim_end_matches(" m").parse().ok())
        .unwrap();
    assert!(ate < 0.05, "{text}");
    assert!(text.contains("eta: "));
}

#[test]
fn eval_of_identical_trajectories_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(octvox(&["gen-data", "--duration", "1", "--rays", "100", "--out", p(&data)]).status.success());
    let gt = data.join("gt.tum");
    let e = octvox(&["eval", "--est", p(&gt), "--gt", p(&gt)]);
    assert!(e.status.success());
    assert!(stdout(&e).contains("ATE RMSE (aligned): 0.000000 m"));
}

#[test]
fn bench_knn_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let b = octvox(&["bench-knn", "--points", "5000", "--queries", "100", "--extent", "8", "--out", p(&csv)]);
    assert!(b.status.success(), "{}", String::from_utf8_lossy(&b.stderr));
    assert!(stdout(&b).contains("oracle match rate: 1.0000"));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("query,candidates,candidates_full,match,time_us\n"));
    assert_eq!(text.lines().count(), 101);
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing");
    let r = octvox(&["run", "--data", p(&missing), "--out", p(&dir.path().join("o"))]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("error"));

    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "bogus_key = 1\n").unwrap();
    let r = octvox(&["run", "--config", p(&cfg), "--data", p(&missing), "--out", p(&dir.path().join("o"))]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("unknown key"));

    assert!(!octvox(&["gen-data", "--traj", "spiral", "--out", p(&missing)]).status.success());
    assert!(!octvox(&["eval", "--est", p(&missing), "--gt", p(&missing)]).status.success());
}
