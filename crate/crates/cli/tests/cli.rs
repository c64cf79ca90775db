use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn crpred(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_crpred"));
    c.args(args);
    match seed_env {
        Some(s) => c.env("CRPRED_SEED", s),
        None => c.env_remove("CRPRED_SEED"),
    };
    c.output().expect("binary runs")
}

fn run_to(cmd: &str, config: &Path, out: &Path, extra: &[&str], seed_env: Option<&str>) -> (i32, Value) {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = crpred(&args, seed_env);
    let code = o.status.code().unwrap();
    let v = std::fs::read_to_string(out)
        .ok()
        .map(|s| serde_json::from_str(&s).unwrap())
        .unwrap_or(Value::Null);
    (code, v)
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn scalar(rec: &Value, key: &str) -> f64 {
    rec["values"][key]["data"][0].as_f64().unwrap()
}

#[test]
fn bound_example_gives_one_tenth_on_every_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let (code, rep) = run_to("bound", &configs().join("bound.json"), &out, &[], None);
    assert_eq!(code, 0);
    let recs = rep["records"].as_array().unwrap();
    assert_eq!(recs.len(), 3);
    for (i, r) in recs.iter().enumerate() {
        assert_eq!(r["index"], i);
        assert!((scalar(r, "bound") - 0.1).abs() < 1e-9, "{r}");
        assert_eq!(r["values"]["bound"]["shape"], serde_json::json!([1, 1]));
    }
}

#[test]
fn reconstruct_example_recovers_a() {
    let dir = tempfile::tempdir().unwrap();
    let (code, rep) = run_to("reconstruct", &configs().join("reconstruct.json"), &dir.path().join("r.json"), &[], None);
    assert_eq!(code, 0);
    let r = &rep["records"][0];
    assert!((scalar(r, "a") - 1.0).abs() <= 1e-6);
    assert!(rep["summary"]["all_pass"].as_bool().unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let (code, _) = run_to("bound", &configs().join("bad_grid.json"), &out, &[], None);
    assert_eq!(code, 2);

    let unknown = write_config(dir.path(), "u.json", r#"{"model": "bernoulli", "thetas": [0.5]}"#);
    assert_eq!(run_to("fisher", &unknown, &out, &[], None).0, 2);

    let no_model = write_config(dir.path(), "m.json", r#"{"model": "cauchy"}"#);
    assert_eq!(run_to("fisher", &no_model, &out, &[], None).0, 2);

    let outside = write_config(dir.path(), "o.json", r#"{"model": "bernoulli", "theta_grid": [1.0]}"#);
    assert_eq!(run_to("fisher", &outside, &out, &[], None).0, 2);

    // A constant family has zero Fisher information.
    let singular = write_config(
        dir.path(),
        "s.json",
        r#"{"model": "exp_family_constant", "predictor": "efficient", "theta_grid": [0.5]}"#,
    );
    let o = crpred(&["bound", "--config", singular.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("0.5") && msg.contains("bound"), "{msg}");

    let (code, rep) = run_to("check-assumptions", &configs().join("check_assumptions_uniform.json"), &out, &[], None);
    assert_eq!(code, 4);
    assert!(rep["summary"]["assumption_violations"].as_u64().unwrap() > 0);

    assert_eq!(crpred(&["nonsense", "--config", "x.json"], None).status.code(), Some(2));
}

#[test]
fn seed_precedence_is_flag_then_environment_then_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("bound.json");
    let out = dir.path().join("r.json");
    let seed_of = |v: &Value| v["config"]["seed"].as_u64().unwrap();
    assert_eq!(seed_of(&run_to("qep", &cfg, &out, &[], None).1), 7);
    assert_eq!(seed_of(&run_to("qep", &cfg, &out, &[], Some("21")).1), 21);
    assert_eq!(seed_of(&run_to("qep", &cfg, &out, &["--seed", "5"], Some("21")).1), 5);

    let a = run_to("qep", &cfg, &out, &["--seed", "5"], None).1;
    let b = run_to("qep", &cfg, &out, &[], Some("5")).1;
    assert_eq!(a, b);
    let c = run_to("qep", &cfg, &out, &[], None).1;
    assert_ne!(a["records"], c["records"]);
}

#[test]
fn echoed_config_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    run_to("bound", &configs().join("bound.json"), &first, &["--seed", "99"], None);
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(&first).unwrap()).unwrap();
    let echo = write_config(dir.path(), "echo.json", &rep["config"].to_string());
    let second = dir.path().join("second.json");
    run_to("bound", &echo, &second, &[], None);
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

#[test]
fn csv_matches_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let csv_path = dir.path().join("r.csv");
    let (code, rep) = run_to("fisher", &configs().join("fisher.json"), &out, &["--csv", csv_path.to_str().unwrap()], None);
    assert_eq!(code, 0);
    let mut rd = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    let rows: Vec<Vec<String>> = rd.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    let recs = rep["records"].as_array().unwrap();
    assert_eq!(rows.len(), recs.len());
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for (row, rec) in rows.iter().zip(recs) {
        assert_eq!(row[col("values.fisher[0,0]")], rec["values"]["fisher"]["data"][0].to_string());
        assert_eq!(row[col("values.condition_number")], rec["values"]["condition_number"].to_string());
        assert_eq!(row[col("theta[0]")], rec["theta"][0].to_string());
    }
}

#[test]
fn report_goes_to_stdout_without_out() {
    let o = crpred(&["lemma1", "--config", configs().join("lemma1.json").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["records"].as_array().unwrap().len(), 50);
    assert!(v.get("timings_ms").is_none());
}

#[test]
fn timings_are_opt_in() {
    let o = crpred(&["lemma1", "--config", configs().join("lemma1.json").to_str().unwrap(), "--timings"], None);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["timings_ms"]["run"].is_number());
}
