use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn swipt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swipt")).args(args).current_dir(dir).output().unwrap()
}

fn bundled(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes a bundled scenario shrunk to 8 states and 16 amplitudes, with
/// `edit` applied, and returns its path.
fn scenario(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v = bundled(name);
    v["mdp"]["states"] = 8.into();
    v["transmitter"]["constellation_size"] = 16.into();
    edit(&mut v);
    let path = dir.join(format!("{}.json", v["name"].as_str().unwrap()));
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

fn summary(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "stdout should be one summary line: {text}");
    serde_json::from_str(lines[0]).unwrap()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_scenario_exits_2_without_artifacts() {
    let tmp = TempDir::new().unwrap();
    let out = swipt(&["solve", "--scenario", "nope.json", "--scheme", "i", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(summary(&out)["status"], "error");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn invalid_fields_exit_2_with_their_path() {
    let tmp = TempDir::new().unwrap();
    let cases: [(&str, fn(&mut Value)); 3] = [
        ("solver.eps_shrink", |v| v["solver"]["eps_shrink"] = 1.5.into()),
        ("channel.eh.distance", |v| v["channel"]["eh"]["distance"] = 0.5.into()),
        ("transmitter.r_max", |v| v["transmitter"]["r_max"] = 3.0.into()),
    ];
    for (field, edit) in cases {
        let path = scenario(tmp.path(), "mp_hw_m13", edit);
        let out = swipt(&["validate", "--scenario", path.to_str().unwrap(), "--out", "o"], tmp.path());
        assert_eq!(out.status.code(), Some(2), "{field}");
        let err = summary(&out)["error"].as_str().unwrap().to_string();
        assert!(err.contains(field), "{field}: {err}");
    }
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn unknown_flags_and_bad_worker_counts_exit_2() {
    let tmp = TempDir::new().unwrap();
    let path = scenario(tmp.path(), "lp_hw_m13", |_| {});
    let out = swipt(&["sweep", "--scenario", path.to_str().unwrap(), "--scheme", "iv"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_swipt"))
        .args(["build-mdp", "--scenario", path.to_str().unwrap()])
        .env("SWIPT_WORKERS", "zero")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_a_monotone_csv_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let path = scenario(tmp.path(), "lp_hw_m13", |_| {});
    let args = ["sweep", "--scenario", path.to_str().unwrap(), "--scheme", "iii", "--points", "12", "--out", "a"];
    let out = swipt(&args, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out);
    assert_eq!(s["points"], 12);
    assert_eq!(s["power_nonincreasing"], true);

    let csv = std::fs::read_to_string(tmp.path().join("a/sweep_iii.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "i_req_bits,achieved_mi_bits,power_watts,bitrate_bps,scheme,status");
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 12);
    let power: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    for w in power.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9), "{power:?}");
    }
    for r in &rows {
        let mi: f64 = r[1].parse().unwrap();
        let rate: f64 = r[3].parse().unwrap();
        assert!((rate - mi / 10e-6).abs() <= 1e-6 * rate.max(1.0));
        assert_eq!(r[4], "iii");
    }
    let meta = json_file(&tmp.path().join("a/sweep_iii.meta.json"));
    assert_eq!(meta["provenance"]["scenario_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(meta["provenance"]["version"], env!("CARGO_PKG_VERSION"));
    assert!(tmp.path().join("a/plot_sweep.py").is_file());

    let again = swipt(&["sweep", "--scenario", path.to_str().unwrap(), "--scheme", "iii", "--points", "12", "--out", "b"], tmp.path());
    assert!(again.status.success());
    for f in ["sweep_iii.csv", "sweep_iii.meta.json", "plot_sweep.py"] {
        assert_eq!(std::fs::read(tmp.path().join("a").join(f)).unwrap(), std::fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn scheme2_solve_reports_a_monotone_inner_loop() {
    let tmp = TempDir::new().unwrap();
    let path = scenario(tmp.path(), "mp_hw_m13", |_| {});
    let out = swipt(&["solve", "--scenario", path.to_str().unwrap(), "--scheme", "ii", "--i-req", "6.5", "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json_file(&tmp.path().join("o/solve_ii.json"));
    let result = &doc["result"];
    assert!(["limit_point", "optimal"].contains(&result["status"].as_str().unwrap()));
    assert!(result["achieved_mi"].as_f64().unwrap() >= 6.5 - 1e-6);
    let mut last: Option<(u64, f64)> = None;
    let mut inner = 0;
    for e in result["trace"].as_array().unwrap() {
        if e["kind"] == "inner" {
            inner += 1;
            let (outer, p) = (e["outer"].as_u64().unwrap(), e["relaxed_power_watts"].as_f64().unwrap());
            if let Some((o, prev)) = last {
                if o == outer {
                    assert!(p >= prev - 1e-12 * prev.abs(), "inner objective fell from {prev} to {p}");
                }
            }
            last = Some((outer, p));
        }
    }
    assert!(inner > 0);
    assert_eq!(doc["provenance"]["command"], "solve");
}

#[test]
fn unattainable_requirement_exits_3_without_artifacts() {
    let tmp = TempDir::new().unwrap();
    let path = scenario(tmp.path(), "mp_hw_m13", |_| {});
    let out = swipt(&["solve", "--scenario", path.to_str().unwrap(), "--scheme", "iii", "--i-req", "9", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn validate_passes_on_the_reference_scenario() {
    let tmp = TempDir::new().unwrap();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/mp_hw_m13.json");
    let out = swipt(&["validate", "--scenario", path.to_str().unwrap(), "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    for check in ["row_stochasticity", "steady_state_fixed_point", "mi_density_normalization", "scheme_ordering", "sweep_power_nonincreasing"] {
        assert!(stderr.contains(&format!("PASS {check}")), "{stderr}");
    }
    let doc = json_file(&tmp.path().join("o/validate.json"));
    assert!(doc["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn simulate_single_symbol_and_grid() {
    let tmp = TempDir::new().unwrap();
    let path = scenario(tmp.path(), "mp_hw_m13", |_| {});
    let out = swipt(&["simulate", "--scenario", path.to_str().unwrap(), "--v0", "0.3", "--r-e", "0", "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json_file(&tmp.path().join("o/symbol.json"));
    // pure RC discharge over one time constant
    let v = doc["response"]["v_final"].as_f64().unwrap();
    assert!((v - 0.3 * (-1.0f64).exp()).abs() < 0.01 * v);

    let out = swipt(&["simulate", "--scenario", path.to_str().unwrap(), "--out", "o"], tmp.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(tmp.path().join("o/simulate.csv")).unwrap();
    assert!(csv.starts_with("v_init,r_E,v_final,p_avg\n"));
    assert_eq!(csv.lines().count(), 1 + 8 * 16);
}

#[test]
fn dataset_train_and_surrogate_backend_pipeline() {
    let tmp = TempDir::new().unwrap();
    let path = scenario(tmp.path(), "mp_hw_m13", |v| {
        v["dataset"] = serde_json::json!({ "train": 300, "validation": 60, "test": 60 });
        v["train"]["epochs"] = 40.into();
        v["surrogate"] = serde_json::json!({ "voltage_model": "o/voltage_model.json", "power_model": "o/power_model.json" });
    });
    let p = path.to_str().unwrap();
    // the surrogate files do not exist yet, so the scenario is rejected
    let out = swipt(&["dataset", "--scenario", p, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    let plain = scenario(tmp.path(), "mp_hw_m13", |v| {
        v["name"] = "pipeline".into();
        v["dataset"] = serde_json::json!({ "train": 300, "validation": 60, "test": 60 });
        v["train"]["epochs"] = 40.into();
    });
    let q = plain.to_str().unwrap();
    let out = swipt(&["dataset", "--scenario", q, "--out", "o", "--seed", "3"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("o/dataset.csv")).unwrap();
    assert!(csv.starts_with("v_init,r_E,v_final,p_avg\n"));
    assert_eq!(csv.lines().count(), 421);

    let out = swipt(&["train", "--scenario", q, "--out", "o", "--seed", "3"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json_file(&tmp.path().join("o/train_report.json"));
    assert_eq!(report["reports"].as_array().unwrap().len(), 2);

    let out = swipt(&["build-mdp", "--scenario", p, "--backend", "surrogate", "--out", "m"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out);
    assert_eq!(s["backend"], "surrogate");
    let doc = json_file(&tmp.path().join("m/mdp.json"));
    assert_eq!(doc["model"]["dims"], serde_json::json!([8, 8, 16]));
}

#[test]
fn table_backend_builds_a_model() {
    let tmp = TempDir::new().unwrap();
    let path = scenario(tmp.path(), "hp_fw_0dbm", |v| {
        v["table"] = serde_json::json!({ "voltage_nodes": 17, "amplitude_nodes": 17 });
    });
    let out = swipt(&["build-mdp", "--scenario", path.to_str().unwrap(), "--backend", "table", "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json_file(&tmp.path().join("o/mdp.json"));
    let rho: Vec<f64> = doc["model"]["rho"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(rho.len(), 8 * 8 * 16);
    for i in 0..8 {
        for k in 0..16 {
            let total: f64 = (0..8).map(|j| rho[(i * 8 + j) * 16 + k]).sum();
            assert!((total - 1.0).abs() <= 1e-9);
        }
    }
}
