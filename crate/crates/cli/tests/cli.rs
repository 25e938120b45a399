use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_str()
        .unwrap()
        .to_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_margquant"))
        .args(args)
        .output()
        .unwrap()
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let p: PathBuf = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p.to_str().unwrap().to_owned()
}

const UNIFORM: &str = r#"{"margin":{"kind":"uniform","params":{"low":0,"high":1}}}"#;

#[test]
fn estimate_three_rows() {
    let v = json(&[
        "estimate",
        "--data",
        &fixture("three_rows.csv"),
        "--function",
        "product",
    ]);
    assert!((v["value"].as_f64().unwrap() - 0.56 / 3.0).abs() < 1e-15);
    assert!(v["gamma_bar"].is_null());
    let v = json(&[
        "estimate",
        "--data",
        &fixture("three_rows.csv"),
        "--function",
        "x*y",
    ]);
    assert!((v["value"].as_f64().unwrap() - 0.56 / 3.0).abs() < 1e-15);
}

#[test]
fn estimate_with_margins_reports_gamma_bar() {
    let v = json(&["estimate", "--config", &fixture("estimate.json")]);
    let gb = v["gamma_bar"].as_f64().unwrap();
    // int_0^1 x^2 dx
    assert!((gb - 1.0 / 3.0).abs() < 1e-12);
    let cs = v["centered_scaled"].as_f64().unwrap();
    assert!((cs - 3f64.sqrt() * (0.56 / 3.0 - gb)).abs() < 1e-12);
}

#[test]
fn estimate_csv_format() {
    let out = run(&[
        "estimate",
        "--data",
        &fixture("three_rows.csv"),
        "--function",
        "sum",
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("value,n,gamma_bar,centered_scaled"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!((row[0].parse::<f64>().unwrap() - 0.8).abs() < 1e-15);
    assert_eq!(row[1], "3");
}

#[test]
fn missing_column_is_a_config_error() {
    let out = run(&[
        "estimate",
        "--data",
        &fixture("one_column.csv"),
        "--function",
        "product",
        "--margins",
        &format!("[{UNIFORM},{UNIFORM}]"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));
}

#[test]
fn bad_csv_cells_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("nan.csv", "x,y\n0.1,NaN\n"),
        ("inf.csv", "x,y\n0.1,inf\n"),
        ("comma.csv", "x\n\"0,5\"\n"),
        ("ragged.csv", "x,y\n0.1,0.2\n0.3\n"),
        ("noheader.csv", "0.1,0.2\n0.3,0.4\n"),
        ("empty.csv", "x,y\n"),
    ] {
        let p = write(dir.path(), name, body);
        assert_eq!(
            code(&["estimate", "--data", &p, "--function", "sum"]),
            2,
            "{name}"
        );
    }
    let p = write(dir.path(), "ok.csv", "a , b\n 1e-1 , 2\n");
    assert_eq!(code(&["estimate", "--data", &p, "--function", "sum"]), 0);
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(
        code(&["variance", "--config", &fixture("unknown_key.json")]),
        2
    );
    assert_eq!(code(&["variance"]), 2);
    assert_eq!(code(&["variance", "--config", "/nonexistent/cfg.json"]), 2);
    assert_eq!(
        code(&[
            "estimate",
            "--data",
            "/nonexistent.csv",
            "--function",
            "sum"
        ]),
        2
    );
    assert_eq!(code(&["counterexample", "c9"]), 2);
    assert_eq!(code(&["bogus-command"]), 2);

    let dir = tempfile::tempdir().unwrap();
    let cfgs = [
        r#"{"function":"x1","margins":[{"margin":{"kind":"cauchy","params":{}}}]}"#.to_string(),
        r#"{"function":"x1","margins":[{"margin":{"kind":"uniform","params":{"lo":0}}}]}"#
            .to_string(),
        format!(
            r#"{{"function":"x1","margins":[{UNIFORM}],"copula":{{"copula":{{"kind":"comonotone","rho":0.3}}}}}}"#
        ),
        format!(r#"{{"function":"x1 +","margins":[{UNIFORM}]}}"#),
        format!(
            r#"{{"function":{{"kind":"monomial","alpha":[1],"extra":2}},"margins":[{UNIFORM}]}}"#
        ),
        format!(r#"{{"function":"x1","functions":["x1"],"margins":[{UNIFORM}]}}"#),
        r#"{"function":"x1","margins":[{"margin":{"kind":"normal","params":{"sd":-1}}}]}"#
            .to_string(),
    ];
    for (i, c) in cfgs.iter().enumerate() {
        let p = write(dir.path(), &format!("c{i}.json"), c);
        assert_eq!(code(&["variance", "--config", &p]), 2, "{c}");
    }
}

#[test]
fn evaluation_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "neg.csv", "x\n-1\n2\n");
    let out = run(&["estimate", "--data", &p, "--function", "ln(x1)"]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn variance_examples() {
    let v = json(&["variance", "--config", &fixture("variance_monomial.json")]);
    assert!((v["sigma2"].as_f64().unwrap() - 2.0 / 45.0).abs() < 1e-10);
    assert!(v["finite_n_check"]["gap"].as_f64().unwrap().abs() <= 5e-3);
    assert!(v["conditions"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["verdict"] == "converged"));

    let v = json(&["variance", "--config", &fixture("variance_identity.json")]);
    assert!((v["sigma2"].as_f64().unwrap() - 1.0 / 12.0).abs() < 1e-10);

    let out = run(&[
        "variance",
        "--config",
        &fixture("variance_midpoint_03.json"),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("divergence"));
    assert_eq!(
        code(&[
            "variance",
            "--config",
            &fixture("variance_midpoint_02.json")
        ]),
        0
    );
}

#[test]
fn covariance_example() {
    let v = json(&["variance", "--config", &fixture("covariance.json")]);
    let m = &v["matrix"];
    let at = |r: usize, s: usize| m[r][s].as_f64().unwrap();
    // Var, Cov of the linear terms: 1/12, 1/12, 4/45
    assert!((at(0, 0) - 1.0 / 12.0).abs() < 1e-10);
    assert!((at(0, 1) - 1.0 / 12.0).abs() < 1e-10);
    assert!((at(1, 1) - 4.0 / 45.0).abs() < 1e-10);
    assert_eq!(at(0, 1), at(1, 0));
}

#[test]
fn probe_examples() {
    let v = json(&["probe", "--config", &fixture("probe_c3_02.json")]);
    assert_eq!(v["gradient"]["verdict"], "converged");
    assert_eq!(v["gradient"]["condition"], "C3-grad");
    let v = json(&["probe", "--config", &fixture("probe_c3_03.json")]);
    assert_eq!(v["gradient"]["verdict"], "diverging");
    assert_eq!(v["gradient"]["values"].as_array().unwrap().len(), 6);
    let v = json(&["probe", "--config", &fixture("probe_c2_bounded.json")]);
    assert_eq!(v["verdict"], "converged");
    let v = json(&["probe", "--config", &fixture("probe_c2_spike.json")]);
    assert_eq!(v["verdict"], "diverging");
}

#[test]
fn counterexamples() {
    let v = json(&[
        "counterexample",
        "c1",
        "--n",
        "10",
        "--n",
        "1000",
        "--seeds",
        "5",
    ]);
    assert_eq!(v["max_statistic"].as_f64().unwrap(), 0.0);
    for row in v["rows"].as_array().unwrap() {
        assert!((row["gamma_bar"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
    let v = json(&[
        "counterexample",
        "--config",
        &fixture("counterexample_c2.json"),
    ]);
    for row in v["table"].as_array().unwrap() {
        assert!(row["median_over_sqrt_n"].as_f64().unwrap() >= 0.8);
    }
    assert_eq!(v["probe"]["verdict"], "diverging");
}

#[test]
fn bounds_command() {
    let v = json(&["bounds", "--config", &fixture("bounds.json")]);
    // x sorted (-1, 0, 0.3, 1.5, 2.2), y sorted (-0.4, 0.2, 0.7, 1.1, 2.0)
    let up = (0.4 + 0.0 + 0.21 + 1.65 + 4.4) / 5.0;
    let lo = (-2.0 + 0.0 + 0.21 + 0.3 - 0.88) / 5.0;
    assert!((v["upper"].as_f64().unwrap() - up).abs() < 1e-12);
    assert!((v["lower"].as_f64().unwrap() - lo).abs() < 1e-12);
    assert_eq!(code(&["bounds", "--data", &fixture("three_rows.csv")]), 0);
    assert_eq!(code(&["bounds", "--data", &fixture("one_column.csv")]), 2);
}

#[test]
fn mc_writes_replications_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "mc.json",
        &format!(
            r#"{{"function":"product","margins":[{UNIFORM},{UNIFORM}],"n":256,"reps":50,"seed":1,"output":"results"}}"#
        ),
    );
    let v = json(&["mc", "--config", &cfg]);
    assert_eq!(v["reps"], 50);
    let out = dir.path().join("results");
    let csv = std::fs::read_to_string(out.join("replications.csv")).unwrap();
    assert_eq!(csv.lines().count(), 51);
    assert!(csv.starts_with("replication,centered_scaled\n"));
    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary, v);
    assert!(out.join("meta.json").exists());

    // --seed overrides the config and changes the draws
    let other = json(&[
        "mc",
        "--config",
        &cfg,
        "--seed",
        "2",
        "--out",
        dir.path().join("b").to_str().unwrap(),
    ]);
    assert_ne!(other["emp_var"], v["emp_var"]);
}

#[test]
fn mc_slln_trajectory() {
    let v = json(&["mc", "--config", &fixture("mc_slln.json")]);
    assert_eq!(v["n_grid"].as_array().unwrap().len(), 5);
    assert!(v["final_deviation"].as_f64().unwrap() <= 0.01);
}

#[test]
fn mc_linearization_exports_z() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "lin.json",
        &format!(
            r#"{{"function":"product","margins":[{UNIFORM},{UNIFORM}],"n":1024,"seed":3,"mode":"linearization"}}"#
        ),
    );
    let out = dir.path().join("out");
    let v = json(&["mc", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let z: Vec<f64> = v["z"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert_eq!(z.len(), 1024);
    let lhs = v["lhs"].as_f64().unwrap();
    let rhs = v["rhs"].as_f64().unwrap();
    assert_eq!(v["residual"].as_f64().unwrap(), lhs - rhs);
    assert!((rhs + z.iter().sum::<f64>() / 32.0).abs() < 1e-12);
    let csv = std::fs::read_to_string(out.join("z.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1025);
}
