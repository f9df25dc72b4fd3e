use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use plsim::checkpoint::Checkpoint;
use plsim::output::{read_diagnostics, LOCK_NAME};

fn plsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const RANDOM_CGPE: &str = r#"{"model": "cgpe", "grid": {"n_points": 64},
    "params": {"xi": 1, "sigma": 1},
    "initial": {"u": {"kind": "random", "seed": 1, "band": 6, "mass": 3}},
    "dt": 1e-3, "t_end": 0.5, "sample_every": 5, "checkpoint_every": 10,
    "checks": ["f1", "abs_set"]}"#;

const EP: &str = r#"{"model": "ep", "grid": {"n_points": 64, "length": 20},
    "params": {"g": 1, "lambda": 0.5, "r": 2, "alpha": 0.5, "beta": 2,
               "pump": {"kind": "bump", "center": 10, "width": 2.5, "height": 3}},
    "initial": {"u": {"kind": "random", "seed": 5, "band": 4, "mass": 1},
                "n": {"kind": "constant", "value": 0.3}},
    "dt": 2e-3, "t_end": 1, "sample_every": 5,
    "checks": ["lyapunov", "reservoir"]}"#;

fn run_to(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    plsim(&args)
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", RANDOM_CGPE);
    for name in ["a", "b"] {
        let o = run_to(&cfg, &dir.path().join(name), &["--seed", "42"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["diagnostics.csv", "reports.json", "final.plsim", "checkpoint_000010.plsim"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let report = fs::read_to_string(dir.path().join("a/reports.json")).unwrap();
    assert!(report.contains("\"seed\": 42"), "{report}");

    let o = run_to(&cfg, &dir.path().join("c"), &["--seed", "43"]);
    assert!(o.status.success());
    assert_ne!(
        fs::read(dir.path().join("a/diagnostics.csv")).unwrap(),
        fs::read(dir.path().join("c/diagnostics.csv")).unwrap()
    );
}

#[test]
fn invalid_configs_list_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let bad = RANDOM_CGPE
        .replace("\"sigma\": 1", "\"sigma\": -1")
        .replace("\"dt\"", "\"dtt\": 1, \"dt\"");
    let cfg = write_config(dir.path(), "bad.json", &bad);
    let o = run_to(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("params.sigma: must be positive"), "{err}");
    assert!(err.contains("dtt: unknown key"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn wide_pump_warns_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ep.json", &EP.replace("\"width\": 2.5", "\"width\": 30"));
    let o = run_to(&cfg, &dir.path().join("out"), &[]);
    assert!(stderr(&o).contains("compact-support assumption violated"), "{}", stderr(&o));
}

#[test]
fn builtin_runs_pass_and_fault_injection_fails() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dir.path().join("ok");
    let o = plsim(&["run", "--builtin", "flat-cgpe", "--out", ok.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(ok.join("reports.json")).unwrap();
    assert!(report.contains("\"name\": \"abs_set\""));

    let bad = dir.path().join("bad");
    let o = plsim(&["run", "--builtin", "fault-injection", "--out", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("FAIL"));
}

#[test]
fn ep_run_passes_its_checks_and_check_command_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ep.json", EP);
    let out = dir.path().join("out");
    let o = run_to(&cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let header = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(header.starts_with("t,mass,l4_fourth,n_integral,n_sq_integral,n_min\n"));

    let o = plsim(&["check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let stored: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("reports.json")).unwrap()).unwrap();
    let rerun: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(stored["checks"], rerun["checks"]);
}

#[test]
fn checkpoints_round_trip_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ep.json", &EP.replace("\"sample_every\": 5", "\"sample_every\": 5, \"checkpoint_every\": 20"));
    let out = dir.path().join("out");
    assert!(run_to(&cfg, &out, &[]).status.success());
    let path = out.join("checkpoint_000020.plsim");
    let bytes = fs::read(&path).unwrap();
    assert_eq!(&bytes[..6], b"PLSIM1");
    let cp = Checkpoint::load(&path).unwrap();
    assert!(cp.n.is_some());
    assert!((cp.header.time - 0.2).abs() < 1e-12);
    assert_eq!(cp.to_bytes(), bytes);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("reports.json")).unwrap()).unwrap();
    assert_eq!(report["config_hash"].as_str().unwrap(), cp.header.config_hash);
}

#[test]
fn busy_output_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", RANDOM_CGPE);
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(LOCK_NAME), "").unwrap();
    let o = run_to(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("in use"), "{}", stderr(&o));
    assert!(!out.join("diagnostics.csv").exists());
}

fn picard_json(cfg: &Path, extra: &[&str]) -> (Output, serde_json::Value) {
    let mut args = vec!["picard", "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = plsim(&args);
    let v = serde_json::from_slice(&o.stdout).unwrap_or(serde_json::Value::Null);
    (o, v)
}

#[test]
fn picard_zero_and_small_data() {
    let dir = tempfile::tempdir().unwrap();
    let zero = write_config(
        dir.path(),
        "zero.json",
        r#"{"model": "cgpe", "grid": {"n_points": 32}, "params": {"xi": 1, "sigma": 1},
            "initial": {"u": {"kind": "flat", "rho0": 0}}, "t_end": 1}"#,
    );
    let (o, v) = picard_json(&zero, &["--assert"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(v["report"]["converged"], true);
    assert_eq!(v["report"]["final_residual"], 0.0);

    let small = write_config(dir.path(), "small.json", &RANDOM_CGPE.replace("\"mass\": 3", "\"mass\": 0.5"));
    let (o, v) = picard_json(&small, &["--assert"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(v["report"]["converged"], true);
    assert!(v["report"]["measured_ratio"].as_f64().unwrap() < 0.9);
}

#[test]
fn picard_bisection_brackets_within_factor_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", RANDOM_CGPE);
    let (o, v) = picard_json(&cfg, &["--bisect", "--nodes", "33", "--max-iter", "40"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ok = v["bracket"]["delta_ok"].as_f64().unwrap();
    let fail = v["bracket"]["delta_fail"].as_f64().unwrap();
    assert!(ok < fail && fail / ok <= 2.0 + 1e-12, "{ok} {fail}");
}

#[test]
fn picard_divergence_fails_only_in_assert_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &RANDOM_CGPE.replace("\"mass\": 3", "\"mass\": 300"));
    let (o, v) = picard_json(&cfg, &["--delta", "1", "--nodes", "17"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(v["report"]["converged"], false);
    let (o, _) = picard_json(&cfg, &["--delta", "1", "--nodes", "17", "--assert"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn single_checkpoint_norm_matches_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", RANDOM_CGPE);
    let run = dir.path().join("run");
    assert!(run_to(&cfg, &run, &[]).status.success());
    let norms = dir.path().join("norms");
    let o = plsim(&[
        "norms",
        "--checkpoint",
        run.join("final.plsim").to_str().unwrap(),
        "--s",
        "0",
        "--b",
        "0",
        "--out",
        norms.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(norms.join("norms.csv")).unwrap();
    let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    let d = read_diagnostics(&run.join("diagnostics.csv")).unwrap();
    let l2 = d.mass.last().unwrap().sqrt();
    assert_eq!(row[0], *d.times.last().unwrap());
    assert!((row[1] - l2).abs() <= 1e-12 * l2, "{} vs {l2}", row[1]);
    assert!((row[2] - l2).abs() <= 1e-12 * l2, "{} vs {l2}", row[2]);
}

#[test]
fn checkpoint_sequence_gives_spacetime_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &RANDOM_CGPE.replace("\"checkpoint_every\": 10", "\"checkpoint_every\": 1"));
    let run = dir.path().join("run");
    assert!(run_to(&cfg, &run, &[]).status.success());
    let mut args: Vec<String> = vec!["norms".into(), "--checkpoint".into()];
    for i in 1..=16 {
        args.push(run.join(format!("checkpoint_{i:06}.plsim")).to_string_lossy().into_owned());
    }
    args.extend(["--s".into(), "1".into(), "--b".into(), "0.375".into(), "--out".into()]);
    args.push(dir.path().join("norms").to_string_lossy().into_owned());
    let o = plsim(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(o.status.success(), "{}", stderr(&o));
    let st = fs::read_to_string(dir.path().join("norms/norms_spacetime.csv")).unwrap();
    assert!(st.starts_with("n_time,t_span,s,b,xsb,ys,l4_ratio\n16,"), "{st}");
}

#[test]
fn malformed_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("bogus.plsim");
    fs::write(&bogus, b"PLSIM1\x05\x00\x00\x00{}").unwrap();
    let o = plsim(&["norms", "--checkpoint", bogus.to_str().unwrap(), "--out", dir.path().join("n").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("header"), "{}", stderr(&o));
}

#[test]
fn ensemble_scans_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = plsim(&[
            "norms", "--ensemble", "l4", "--sizes", "32:64,64:128", "--samples", "20", "--seed", "7",
            "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(fs::read(out.join("l4_scan.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.pop().unwrap()).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");

    let out = dir.path().join("tri");
    let o = plsim(&["norms", "--ensemble", "trilinear", "--sizes", "4,8", "--samples", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("trilinear_scan.csv")).unwrap();
    assert!(text.starts_with("size,samples,seed,max_ratio,admissible\n4,3,7,"), "{text}");
}

#[test]
fn selftest_subset_runs() {
    let o = plsim(&["selftest", "--only", "3,10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("[PASS] C3") && text.contains("[PASS] C10"), "{text}");
    assert!(text.contains("2/2 criteria passed"));
}
