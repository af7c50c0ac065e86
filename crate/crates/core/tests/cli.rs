use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn noisectl(dir: &Path, args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_noisectl"));
    cmd.current_dir(dir).args(args).env_remove("NOISECTL_SEED");
    if let Some(seed) = seed_env {
        cmd.env("NOISECTL_SEED", seed);
    }
    cmd.output().expect("binary runs")
}

const RICKER: &[&str] = &[
    "--map", "ricker", "--r", "0.94", "--noise", "poly", "--s", "3", "--sigma", "1", "--runs", "4", "--steps", "300",
];

fn with(extra: &[&'static str]) -> Vec<&'static str> {
    let mut v = vec!["simulate"];
    v.extend_from_slice(RICKER);
    v.extend_from_slice(extra);
    v
}

#[test]
fn dump_config_round_trips_to_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let first = noisectl(dir, &with(&["--out", "a", "--x0", "0.2,0.7"]), None);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let dump = noisectl(dir, &with(&["--out", "b", "--x0", "0.2,0.7", "--dump-config"]), None);
    assert!(dump.status.success());
    fs::write(dir.join("c.json"), &dump.stdout).unwrap();
    let second = noisectl(dir, &["simulate", "--config", "c.json"], None);
    assert!(second.status.success(), "{}", String::from_utf8_lossy(&second.stderr));
    for name in ["trajectories.csv", "summary.csv", "report.txt"] {
        let a = fs::read(dir.join("a").join(name)).unwrap();
        let b = fs::read(dir.join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn outputs_are_lf_csv_with_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = noisectl(tmp.path(), &with(&["--out", "o"]), None);
    assert!(out.status.success());
    let traj = fs::read_to_string(tmp.path().join("o/trajectories.csv")).unwrap();
    assert!(traj.starts_with("run_id,n,x\n"));
    assert!(!traj.contains('\r'));
    assert_eq!(traj.lines().count(), 1 + 4 * 301);
    let summary = fs::read_to_string(tmp.path().join("o/summary.csv")).unwrap();
    assert!(!summary.contains('\r'));
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    let report = fs::read_to_string(tmp.path().join("o/report.txt")).unwrap();
    assert!(report.contains("verdict: satisfied"));
}

#[test]
fn seed_precedence_is_file_then_env_then_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let dump = |env: Option<&str>, extra: &[&'static str]| {
        let mut args = with(&["--dump-config"]);
        args.extend_from_slice(extra);
        let out = noisectl(tmp.path(), &args, env);
        assert!(out.status.success());
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["master_seed"].as_u64().unwrap()
    };
    assert_eq!(dump(None, &[]), 1);
    assert_eq!(dump(Some("99"), &[]), 99);
    assert_eq!(dump(Some("99"), &["--seed", "7"]), 7);

    let a = noisectl(tmp.path(), &with(&["--out", "e1"]), Some("99"));
    let b = noisectl(tmp.path(), &with(&["--out", "e2", "--seed", "99"]), None);
    assert!(a.status.success() && b.status.success());
    assert_eq!(
        fs::read(tmp.path().join("e1/trajectories.csv")).unwrap(),
        fs::read(tmp.path().join("e2/trajectories.csv")).unwrap()
    );
    let bad = noisectl(tmp.path(), &with(&["--out", "e3"]), Some("not-a-seed"));
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn validation_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = noisectl(
        tmp.path(),
        &["simulate", "--map", "logistic", "--r", "2", "--noise", "discrete", "--l", "1", "--sigma", "1"],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma < 1"));

    let not_eq = noisectl(
        tmp.path(),
        &["threshold", "--map", "ricker", "--r", "2.2", "--noise", "poly", "--sigma", "1", "--equilibrium", "2"],
        None,
    );
    assert_eq!(not_eq.status.code(), Some(2));

    fs::write(tmp.path().join("bad.json"), "{\"map\": 3}").unwrap();
    assert_eq!(noisectl(tmp.path(), &["simulate", "--config", "bad.json"], None).status.code(), Some(2));
    assert_eq!(noisectl(tmp.path(), &["frobnicate"], None).status.code(), Some(2));
}

#[test]
fn threshold_prints_the_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let out = noisectl(
        tmp.path(),
        &["threshold", "--map", "ricker", "--r", "2.2", "--noise", "poly", "--s", "0", "--sigma", "1", "--equilibrium", "1"],
        None,
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("verdict: satisfied, η=0.3069, ln ℋ < η"), "{text}");
    assert!(!tmp.path().join("noisectl-out").exists());
}

#[test]
fn sweep_writes_one_row_per_grid_point() {
    let tmp = tempfile::tempdir().unwrap();
    let out = noisectl(
        tmp.path(),
        &[
            "sweep", "--map", "logistic", "--r", "3", "--noise", "poly", "--sigma", "1", "--equilibrium", "0.6666666666666666",
            "--runs", "5", "--steps", "200", "--param", "r", "--values", "3.3,3.4", "--param2", "sigma", "--values2",
            "0.5,1", "--out", "sw",
        ],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("sw/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("param,value,param2,value2,"));
    assert!(lines[1].starts_with("r,3.3,sigma,0.5,"));
}
