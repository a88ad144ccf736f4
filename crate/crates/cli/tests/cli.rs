use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn cclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cclab"))
        .args(args)
        .env("CCLAB_WORKERS", "4")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn read_report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn zero_set_config(out: &str) -> Value {
    json!({
        "geometry": { "n": 3, "t_max": 20.0, "m": 400 },
        "problem": { "psc": { "target_scal": "scal * (1 - plateau(2, 2 + $width, 0.5, 1))" } },
        "output": { "dir": out },
        "params": { "width": 2.0 }
    })
}

#[test]
fn trivial_target_is_solved_with_self_describing_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "geometry": { "n": 3, "t_max": 20.0, "m": 400 },
        "problem": { "psc": { "target_scal": "scal" } },
        "output": { "dir": "out" }
    });
    let p = write_config(tmp.path(), "c.json", &cfg);
    let o = cclab(&["run", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_report(&tmp.path().join("out"));
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["result"]["verdict"]["status"], "Solved");
    assert_eq!(r["metadata"]["conventions"]["window_r"], 1.0);
    assert_eq!(r["metadata"]["tolerances"]["tol"], 1e-10);
    assert!(r["metadata"]["conventions"]["angular_normalization"].is_string());

    let csv = fs::read_to_string(tmp.path().join("out/solution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,value"));
    assert_eq!(lines.count(), 401);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",1.0000000000000000e0")));
}

#[test]
fn certified_nonexistence_exits_two_with_witness() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "geometry": {
            "n": 3, "t_max": 20.0, "m": 400,
            "scal_perturbation": "plateau(3, 9, 0.5, -100)"
        },
        "problem": { "psc": { "target_scal": "scal * (1 - plateau(3, 9, 0.5, 1))" } },
        "output": { "dir": "out" }
    });
    let p = write_config(tmp.path(), "c.json", &cfg);
    assert_eq!(cclab(&["run", p.to_str().unwrap()]).status.code(), Some(2));
    let r = read_report(&tmp.path().join("out"));
    let v = &r["result"]["verdict"];
    assert_eq!(v["status"], "NoSolution");
    let cert = &v["certificate"];
    assert!(cert["lambda"].as_f64().unwrap() < 0.0);
    let f: Vec<f64> = cert["f_values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(f.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn config_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{ \"geometry\": { \"n\": 3, ").unwrap();
    let o = cclab(&["run", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));

    let mut cfg = zero_set_config("out");
    cfg["geometry"]["m"] = json!(50);
    let p = write_config(tmp.path(), "m.json", &cfg);
    let o = cclab(&["run", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("geometry.m"));

    let mut cfg = zero_set_config("out");
    cfg["problem"]["yamabe"] = json!({ "regions": [[[1.0, 2.0]]] });
    let p = write_config(tmp.path(), "two.json", &cfg);
    assert_eq!(cclab(&["run", p.to_str().unwrap()]).status.code(), Some(1));

    let mut cfg = zero_set_config("out");
    cfg["problem"]["psc"]["target_scal"] = json!("bump(5, 1, 2)");
    let p = write_config(tmp.path(), "pos.json", &cfg);
    assert_eq!(cclab(&["run", p.to_str().unwrap()]).status.code(), Some(1));

    assert_eq!(cclab(&["run", "/nonexistent/c.json"]).status.code(), Some(1));
    assert_eq!(cclab(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn sweep_rejects_empty_values_and_non_scalar_paths() {
    let tmp = TempDir::new().unwrap();
    let p = write_config(tmp.path(), "c.json", &zero_set_config("out"));
    let p = p.to_str().unwrap();
    assert_eq!(cclab(&["sweep", p, "--param", "params.width", "--values", ""]).status.code(), Some(1));
    assert_eq!(cclab(&["sweep", p, "--param", "geometry", "--values", "1"]).status.code(), Some(1));
    assert_eq!(
        cclab(&["sweep", p, "--param", "problem.psc.target_scal", "--values", "1"]).status.code(),
        Some(1)
    );
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn width_sweep_is_monotone_ordered_and_deterministic() {
    let tmp = TempDir::new().unwrap();
    let p = write_config(tmp.path(), "c.json", &zero_set_config("out"));
    let p = p.to_str().unwrap();
    // unsorted input: the index must follow it
    let values = "3,1,5,2,4";
    let o = cclab(&["sweep", p, "--param", "params.width", "--values", values]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let index = fs::read_to_string(tmp.path().join("out/sweep_index.csv")).unwrap();
    let mut lines = index.lines();
    assert_eq!(lines.next(), Some("value,verdict,residual,decay,lambda_z"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            assert_eq!(c[1], "Solved");
            (c[0].parse().unwrap(), c[4].parse().unwrap())
        })
        .collect();
    let order: Vec<f64> = rows.iter().map(|r| r.0).collect();
    assert_eq!(order, vec![3.0, 1.0, 5.0, 2.0, 4.0]);
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert!(sorted.windows(2).all(|w| w[1].1 < w[0].1), "{sorted:?}");

    let first_report = fs::read(tmp.path().join("out/sweep/002/report.json")).unwrap();
    let first_csv = fs::read(tmp.path().join("out/sweep/002/solution.csv")).unwrap();
    let again = Command::new(env!("CARGO_BIN_EXE_cclab"))
        .args(["sweep", p, "--param", "params.width", "--values", values])
        .env("CCLAB_WORKERS", "1")
        .output()
        .unwrap();
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(fs::read_to_string(tmp.path().join("out/sweep_index.csv")).unwrap(), index);
    assert_eq!(fs::read(tmp.path().join("out/sweep/002/report.json")).unwrap(), first_report);
    assert_eq!(fs::read(tmp.path().join("out/sweep/002/solution.csv")).unwrap(), first_csv);
    let r: Value = serde_json::from_slice(&first_report).unwrap();
    assert_eq!(r["sweep"]["value"], 5.0);
}

#[test]
fn yamabe_command_agrees_in_sign() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "geometry": { "n": 3, "t_max": 20.0, "m": 400 },
        "problem": { "yamabe": { "regions": [[[12.0, 13.0]], [[2.0, 4.0], [6.0, 8.0]]] } },
        "output": { "dir": "out" }
    });
    let p = write_config(tmp.path(), "c.json", &cfg);
    assert_eq!(cclab(&["yamabe", p.to_str().unwrap()]).status.code(), Some(0));
    let r = read_report(&tmp.path().join("out"));
    let regions = r["result"]["regions"].as_array().unwrap();
    assert_eq!(regions.len(), 2);
    for reg in regions {
        assert_eq!(reg["agree"], true);
        assert_eq!(reg["sign_lambda"], 1);
    }
    assert!(tmp.path().join("out/minimizer_1.csv").exists());

    // zero set of a psc target
    let p = write_config(tmp.path(), "z.json", &zero_set_config("zout"));
    assert_eq!(cclab(&["yamabe", p.to_str().unwrap()]).status.code(), Some(0));
    let r = read_report(&tmp.path().join("zout"));
    assert_eq!(r["result"]["regions"].as_array().unwrap().len(), 1);

    let p = write_config(tmp.path(), "t.json", &json!({
        "geometry": { "n": 3, "t_max": 20.0, "m": 400 },
        "problem": { "psc": { "target_scal": "scal" } }
    }));
    assert_eq!(cclab(&["yamabe", p.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn lichnerowicz_and_tables() {
    let tmp = TempDir::new().unwrap();
    let mut table = String::from("t,value\n");
    for k in 0..=200 {
        let t = k as f64 * 0.1;
        table.push_str(&format!("{t},{}\n", 0.5 * (-(t - 4.0) * (t - 4.0)).exp()));
    }
    fs::write(tmp.path().join("a.csv"), table).unwrap();
    let cfg = json!({
        "geometry": { "n": 3, "t_max": 20.0, "m": 400 },
        "problem": { "lichnerowicz": { "tau": 3, "a": "table:a.csv" } },
        "output": { "dir": "out" }
    });
    let p = write_config(tmp.path(), "c.json", &cfg);
    let o = cclab(&["run", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_report(&tmp.path().join("out"));
    assert_eq!(r["problem"], "lichnerowicz");
    assert!(r["result"]["sandwich_violation"].as_f64().unwrap() <= 1e-8);
    assert!(tmp.path().join("out/supersolution.csv").exists());

    // a table that stops short of t_max is rejected
    fs::write(tmp.path().join("short.csv"), "t,value\n0,0\n5,0\n").unwrap();
    let mut cfg = cfg;
    cfg["problem"]["lichnerowicz"]["a"] = json!("table:short.csv");
    let p = write_config(tmp.path(), "s.json", &cfg);
    assert_eq!(cclab(&["run", p.to_str().unwrap()]).status.code(), Some(1));

    // tau(T) must equal n
    let mut cfg = cfg;
    cfg["problem"]["lichnerowicz"] = json!({ "tau": 2.5, "a": 0 });
    let p = write_config(tmp.path(), "tau.json", &cfg);
    assert_eq!(cclab(&["run", p.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn explicit_methods_agree() {
    let tmp = TempDir::new().unwrap();
    let mut sols = Vec::new();
    for method in ["monotone", "newton", "variational"] {
        let cfg = json!({
            "geometry": { "n": 3, "t_max": 20.0, "m": 400 },
            "problem": { "psc": { "target_scal": "scal - bump(3, 1.5, 4)" } },
            "solver": { "method": method },
            "output": { "dir": method }
        });
        let p = write_config(tmp.path(), &format!("{method}.json"), &cfg);
        let o = cclab(&["run", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{method}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(read_report(&tmp.path().join(method))["result"]["method"], method);
        let csv = fs::read_to_string(tmp.path().join(method).join("solution.csv")).unwrap();
        let v: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        sols.push(v);
    }
    for s in &sols[1..] {
        let d = s.iter().zip(&sols[0]).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(d < 1e-8, "{d}");
    }
}
