use bqt_core::analytic::gadc_twirled_error;
use bqt_core::random::{density, rng};
use serde_json::Value;
use std::process::{Command, Output};

fn bqt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bqt")).args(args).env_remove("BQT_SOLVER_OPTS").output().expect("runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

/// Rows of a sweep CSV as maps from column name to text.
fn rows(csv: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut lines = csv.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines.map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect()).collect()
}

fn num(row: &std::collections::HashMap<String, String>, k: &str) -> f64 {
    row[k].parse().unwrap()
}

#[test]
fn compute_no_resource_analytic() {
    let o = bqt(&["compute", "--resource", "none", "--d", "2", "--method", "analytic"]);
    assert!(o.status.success());
    let j = json(&o);
    assert_eq!(j["value"], 0.75);
    assert_eq!(j["method"], "analytic");
    assert_eq!(j["status"], "optimal");
}

#[test]
fn compute_isotropic_sdp() {
    let o = bqt(&["compute", "--resource", "isotropic", "--F", "0.9", "--dA", "2", "--d", "2", "--method", "sdp"]);
    assert!(o.status.success());
    let j = json(&o);
    assert!((j["value"].as_f64().unwrap() - 0.55).abs() < 1e-5, "{j}");
    assert_eq!(j["method"], "sdp-primal");
    assert!(j["certificate"]["K"]["re"].is_array());
    assert!(j["residuals"]["max_eq"].as_f64().unwrap() < 1e-7);
}

#[test]
fn compute_all_methods_agree() {
    let o = bqt(&["compute", "--resource", "werner", "--p", "0.8", "--dA", "3"]);
    assert!(o.status.success());
    let j = json(&o);
    let vals: Vec<f64> = j.as_array().unwrap().iter().map(|r| r["value"].as_f64().unwrap()).collect();
    assert_eq!(vals.len(), 3);
    assert!(vals.iter().all(|v| (v - vals[0]).abs() < 1e-5), "{vals:?}");
}

#[test]
fn compute_custom_state_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.json");
    let rho = density(&mut rng(3), &[2, 2]);
    std::fs::write(&path, rho.to_json_value().to_string()).unwrap();
    let out = dir.path().join("report.json");
    let o = bqt(&["compute", "--resource", "custom", "--file", path.to_str().unwrap(), "--d", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j = json(&o);
    let v = j["value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&v));
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(saved, j);
}

#[test]
fn compute_exit_codes() {
    let code = |args: &[&str]| bqt(args).status.code().unwrap();
    assert_eq!(code(&["compute", "--resource", "isotropic", "--F", "1.5", "--dA", "2"]), 2);
    assert_eq!(code(&["compute", "--resource", "isotropic", "--dA", "2"]), 2);
    assert_eq!(code(&["compute", "--resource", "gadc", "--gamma", "0.5", "--N", "0.5", "--method", "lp"]), 2);
    assert_eq!(code(&["compute", "--resource", "custom", "--file", "/nonexistent/state.json"]), 2);
    assert_eq!(code(&["compute", "--resource", "bogus"]), 2);
    assert_eq!(code(&["compute", "--resource", "none", "--method", "sdp", "--feas-tol", "0"]), 2);
    // an instance above the size cap is refused, not attempted
    assert_eq!(code(&["compute", "--resource", "isotropic", "--F", "0.5", "--dA", "9", "--method", "sdp"]), 2);
}

#[test]
fn solver_failure_exits_3() {
    let o = Command::new(env!("CARGO_BIN_EXE_bqt"))
        .args(["compute", "--resource", "isotropic", "--F", "0.9", "--dA", "2", "--method", "sdp"])
        .env("BQT_SOLVER_OPTS", r#"{"max_iters": 2}"#)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    // the report is still printed
    assert_eq!(json(&o)["status"], "inaccurate");
}

#[test]
fn no_resource_sweep() {
    let o = bqt(&["sweep", "--resource", "none", "--d", "2:6:5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("d,method,value,gap\n"));
    let rs = rows(&text);
    assert_eq!(rs.len(), 15);
    for r in &rs {
        let d: f64 = num(r, "d");
        let want = 1.0 - 1.0 / (d * d);
        let tol = if r["method"] == "analytic" { 1e-12 } else { 1e-6 };
        assert!((num(r, "value") - want).abs() < tol, "{r:?}");
    }
    assert_eq!(rs[0]["method"], "analytic");
    assert_eq!(rs[1]["method"], "lp");
    assert_eq!(rs[2]["method"], "sdp");
}

#[test]
fn sweep_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = vec![];
    for jobs in ["1", "3", "3"] {
        let path = dir.path().join(format!("s{}.csv", outputs.len()));
        let o = bqt(&[
            "sweep", "--resource", "isotropic", "--F", "0:1:5", "--dA", "2:3:2", "--jobs", jobs, "--out",
            path.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        outputs.push(std::fs::read(path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert!(text.starts_with("F,dA,d,method,value,gap\n"));
    assert_eq!(rows(&text).len(), 5 * 2 * 3);
}

#[test]
fn kpf16_sweep_minimum_at_corners() {
    let o = bqt(&["sweep", "--resource", "kpf16", "--p1", "0:1:5", "--p2", "0:1:5", "--method", "sdp"]);
    assert!(o.status.success());
    let rs = rows(&stdout(&o));
    assert_eq!(rs.len(), 25);
    let min = rs.iter().map(|r| num(r, "value")).fold(f64::INFINITY, f64::min);
    assert!((min - 0.75).abs() < 1e-4, "{min}");
    for r in &rs {
        let v = num(r, "value");
        assert!((0.0..=1.0 + 1e-7).contains(&v));
        let corner = matches!((r["p1"].as_str(), r["p2"].as_str()), ("1", "0") | ("0", "1"));
        if corner {
            assert!((v - min).abs() < 1e-4, "{r:?}");
        } else {
            assert!(v > min + 1e-3, "{r:?}");
        }
    }
}

/// The SDP column follows the isotropic formula applied to the twirled
/// resource at every point, and the quoted GADC closed form wherever that
/// form does not exceed the separable value 3/4.
#[test]
fn gadc_sweep_against_closed_forms() {
    let o = bqt(&["sweep", "--resource", "gadc", "--gamma", "0:1:5", "--N", "0:1:5"]);
    assert!(o.status.success());
    let rs = rows(&stdout(&o));
    assert_eq!(rs.len(), 50);
    let mut above_floor = 0;
    for pair in rs.chunks(2) {
        let (a, s) = (&pair[0], &pair[1]);
        assert_eq!((a["method"].as_str(), s["method"].as_str()), ("analytic", "sdp"));
        let (gamma, n) = (num(s, "gamma"), num(s, "N"));
        let sdp = num(s, "value");
        assert!((sdp - gadc_twirled_error(gamma, n).unwrap()).abs() < 1e-4, "{s:?}");
        let closed = num(a, "value");
        if closed <= 0.75 {
            assert!((sdp - closed).abs() < 1e-4, "{a:?} vs {s:?}");
        } else {
            above_floor += 1;
            assert!(sdp < closed);
        }
    }
    assert_eq!(above_floor, 6);
}

#[test]
fn sweep_usage_errors() {
    let code = |args: &[&str]| bqt(args).status.code().unwrap();
    assert_eq!(code(&["sweep", "--resource", "none", "--d", "2", "--out", "/nonexistent/dir/x.csv"]), 2);
    assert_eq!(code(&["sweep", "--resource", "isotropic", "--F", "0:2:3", "--dA", "2"]), 2);
    assert_eq!(code(&["sweep", "--resource", "isotropic", "--F", "0:1:0", "--dA", "2"]), 2);
    assert_eq!(code(&["sweep", "--resource", "custom"]), 2);
    assert_eq!(code(&["sweep", "--resource", "gadc", "--gamma", "0", "--N", "0", "--method", "lp"]), 2);
}

#[test]
fn verify_only_filters() {
    let o = bqt(&["verify", "--only", "lp-feasible-points"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("PASS lp-feasible-points"), "{text}");
    assert!(text.contains("1 of 1 checks passed"));
    assert!(!text.contains("no-resource"));

    let o = bqt(&["verify", "--only", "no-resource,infrastructure", "--json"]);
    assert!(o.status.success());
    let j = json(&o);
    assert_eq!(j["passed"], true);
    let ids: Vec<&str> = j["checks"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["no-resource", "infrastructure"]);

    assert_eq!(bqt(&["verify", "--only", "nonsense"]).status.code(), Some(2));
}

#[test]
fn corrupted_tolerance_fails_with_residuals() {
    let o = bqt(&["verify", "--only", "no-resource", "--feas-tol", "1e-20"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.starts_with("FAIL no-resource"), "{text}");
    assert!(text.contains("status inaccurate"), "{text}");
    assert!(text.contains("max equality residual"), "{text}");
    assert!(text.contains("0 of 1 checks passed"));
}
