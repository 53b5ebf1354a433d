use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

use renyi_core::asymptotics::are;
use renyi_core::ModelKind;
use robust_renyi::cli::run;
use robust_renyi::io::json_number;
use robust_renyi::montecarlo::{run_study, Execution, StudyConfig};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = vec![];
    let mut err = vec![];
    let code = run(std::iter::once("robust-renyi").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = call(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    out
}

fn data_file(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn header(csv: &str) -> &str {
    csv.lines().next().unwrap()
}

#[test]
fn are_table_golden() {
    let out = ok(&["are-table", "--models", "all", "--alphas", "0,0.02,0.05,0.1,0.2,0.25,0.5,1"]);
    assert_eq!(out, golden("are_table.csv"));
    assert_eq!(ok(&["are-table"]), out);
}

#[test]
fn estimate_golden() {
    let dir = tempfile::tempdir().unwrap();
    let input = data_file(&dir, "x.csv", "1\n-1\n");
    let out = ok(&["estimate", "--model", "normal-scale", "--m", "0", "--alpha", "0", "--input", &input]);
    assert_eq!(out, golden("estimate_scale.csv"));
}

#[test]
fn json_output_reparses_to_the_same_values() {
    let v: Value = serde_json::from_str(&ok(&["--format", "json", "are-table", "--models", "normal-scale,exponential"])).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 16);
    for r in rows {
        let kind = match r["model"].as_str().unwrap() {
            "normal-scale" => ModelKind::NormalScale,
            _ => ModelKind::Exponential,
        };
        let a = json_number(&r["alpha"]).unwrap();
        assert_eq!(json_number(&r["are"]).unwrap(), are(kind, a, 1).unwrap());
    }

    let cfg_path = root().join("configs/table2_outliers10.json");
    let cfg_path = cfg_path.to_str().unwrap();
    let v: Value =
        serde_json::from_str(&ok(&["--format", "json", "simulate", "--config", cfg_path, "--replicates", "40"])).unwrap();
    let mut cfg = StudyConfig::from_json(&std::fs::read_to_string(cfg_path).unwrap()).unwrap();
    cfg.n_replicates = 40;
    let report = run_study(&cfg, Execution::Serial).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), report.rows.len());
    for (j, r) in rows.iter().zip(&report.rows) {
        assert_eq!(j["estimator"], r.estimator.as_str());
        assert_eq!(json_number(&j["alpha"]).unwrap(), r.alpha);
        assert_eq!(json_number(&j["mean_estimate"]).unwrap(), r.mean_estimate[0]);
        assert_eq!(json_number(&j["mse_hat"]).unwrap(), r.mse_hat);
        assert_eq!(j["n_converged"].as_u64().unwrap() as usize, r.n_converged);
    }

    let v: Value = serde_json::from_str(&ok(&[
        "--format",
        "json",
        "ges-curve",
        "--model",
        "normal-scale",
        "--theta",
        "1",
        "--alpha-from",
        "0",
        "--alpha-to",
        "1",
        "--points",
        "3",
    ]))
    .unwrap();
    assert_eq!(v[0]["ges"], "inf");
    assert_eq!(json_number(&v[0]["ges"]), Some(f64::INFINITY));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let cfg = root().join("configs/table2.json");
    let args = ["simulate", "--config", cfg.to_str().unwrap(), "--seed", "42", "--replicates", "300"];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    assert_eq!(a, ok(&[&args[..], &["--serial"]].concat()));
    assert_ne!(a, ok(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "43", "--replicates", "300"]));
    assert_eq!(header(&a), "estimator,alpha,component,mean_estimate,se_mean,mse_hat,se_mse,n_converged,n_failed");
    assert_eq!(a.lines().count(), 16);
}

#[test]
fn column_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let reg = data_file(&dir, "r.csv", "x1,x2,y\n1,0,0.1\n1,1,1.2\n1,2,1.9\n1,3,3.2\n1,4,3.9\n1,5,5.1\n");
    let out = ok(&["regress", "--input", &reg, "--alpha", "0,0.5"]);
    assert_eq!(header(&out), "alpha,parameter,estimate,converged,iterations");
    assert_eq!(out.lines().count(), 1 + 2 * 3);
    assert!(out.lines().nth(1).unwrap().starts_with("0,x1,"));

    let out = ok(&["influence", "--model", "normal-location", "--theta", "0", "--alpha", "0.5", "--points", "5"]);
    assert_eq!(header(&out), "alpha,x,component,influence");
    assert_eq!(out.lines().nth(3).unwrap(), "0.5,0,1,0");

    let out = ok(&["influence", "--model", "mvn-mean", "--cov", "2,0,0,1", "--theta", "0,0", "--alpha", "1", "--points", "3"]);
    assert_eq!(out.lines().count(), 1 + 3 * 2);

    let out = ok(&["ges-curve", "--model", "exponential", "--theta", "1", "--optimum"]);
    assert_eq!(header(&out), "alpha_star,ges");

    let out = ok(&["asympt", "--model", "normal-location", "--sigma", "1", "--theta", "0", "--alpha", "0.5"]);
    assert_eq!(header(&out), "matrix,row,col,value");
    assert!(out.contains("V,1,1,1.19324"), "{out}");
}

#[test]
fn output_file_option() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let out = ok(&["-o", path.to_str().unwrap(), "are-table", "--models", "normal-location", "--alphas", "0.5"]);
    assert!(out.is_empty());
    assert_eq!(std::fs::read_to_string(path).unwrap(), "model,alpha,are\nnormal-location,0.5,0.83805\n");
}

#[test]
fn errors_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = data_file(&dir, "bad.csv", "1\nfoo\n");

    let (code, out, err) = call(&["estimate", "--model", "normal-scale", "--input", &bad]);
    assert_eq!(code, 1);
    assert!(out.is_empty() && err.starts_with("error:"), "{err}");

    let (code, out, _) = call(&["--format", "json", "estimate", "--model", "normal-scale", "--input", &bad]);
    assert_eq!(code, 1);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["error"]["kind"], "parse");
    assert!(v["error"]["message"].as_str().unwrap().contains("foo"));

    assert_eq!(call(&["estimate", "--model", "cauchy", "--input", &bad]).0, 2);
    assert_eq!(call(&["no-such-command"]).0, 2);
    assert_eq!(call(&["simulate"]).0, 2);
    assert_eq!(call(&["--help"]).0, 0);

    let (code, out, _) = call(&["--format", "json", "asympt", "--model", "normal-location", "--theta", "0", "--alpha", "0"]);
    assert_eq!(code, 1);
    assert!(serde_json::from_str::<Value>(&out).unwrap()["error"]["kind"].is_string());

    let missing = dir.path().join("missing.json");
    assert_eq!(call(&["simulate", "--config", missing.to_str().unwrap()]).0, 1);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_robust-renyi");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let o = status(&["are-table", "--models", "exponential", "--alphas", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "model,alpha,are\nexponential,1,0.33750\n");
    assert_eq!(status(&["are-table", "--bogus"]).status.code(), Some(2));
    let o = status(&["estimate", "--model", "normal-scale", "--input", "/nonexistent/x.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}
