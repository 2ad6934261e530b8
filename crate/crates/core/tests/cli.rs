use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pwe::Scenario;
use tempfile::TempDir;

fn pwe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwe")).args(args).env_remove("PWE_LOG").output().unwrap()
}

fn default_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/default.json")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_scenario(dir: &TempDir, name: &str, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(default_path()).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.path().join(name);
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_default_is_clean() {
    let o = pwe(&["validate", p(&default_path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("layers [5, 5, 5]"));
}

#[test]
fn validate_missing_file() {
    let o = pwe(&["validate", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("scenario not found"));
}

#[test]
fn validate_reports_parse_position() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{\n  \"walls\": [\n    {\"a\": [0, 0],, }\n  ]\n}\n").unwrap();
    let o = pwe(&["validate", p(&path)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("line 3"), "{}", stdout(&o));
}

#[test]
fn validate_fraction_sum() {
    let dir = TempDir::new().unwrap();
    let path = write_scenario(&dir, "s.json", |v| {
        v["train"]["input_fractions"] = serde_json::json!([0.2, 0.2, 0.2, 0.2, 0.1]);
    });
    let o = pwe(&["validate", p(&path)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("virtual_input_fractions must sum to 1"));
}

#[test]
fn validate_occluded_layer() {
    let dir = TempDir::new().unwrap();
    let path = write_scenario(&dir, "s.json", |v| {
        v["walls"].as_array_mut().unwrap().push(serde_json::json!({
            "a": [1.0, 0.2], "b": [9.0, 0.2], "normal_side": "left"
        }));
    });
    let o = pwe(&["validate", p(&path)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("disconnected layer"), "{}", stdout(&o));
}

#[test]
fn train_writes_three_artifacts() {
    let out = TempDir::new().unwrap();
    let o = pwe(&["train", p(&default_path()), "--out", p(out.path()), "--seed", "42"]);
    let names = ["rmse_curve.csv", "omegas.json", "network.svg"];
    for n in names {
        assert!(out.path().join(n).is_file(), "{n} missing");
    }
    let curve = fs::read_to_string(out.path().join("rmse_curve.csv")).unwrap();
    let last_rmse: f64 = curve.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    let converged = last_rmse < 1e-3;
    assert_eq!(o.status.code(), Some(if converged { 0 } else { 2 }));
    let omegas: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(out.path().join("omegas.json")).unwrap()).unwrap();
    assert_eq!(omegas.len(), 15);
    assert!(omegas.contains_key("(1,4)"));
    let svg = fs::read_to_string(out.path().join("network.svg")).unwrap();
    assert!(svg.contains("untrained") && svg.contains("trained"));
}

#[test]
fn train_zero_cycles_is_non_convergence() {
    let dir = TempDir::new().unwrap();
    let path = write_scenario(&dir, "s.json", |v| v["train"]["max_cycles"] = 0.into());
    let out = dir.path().join("out");
    let o = pwe(&["train", p(&path), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(fs::read_to_string(out.join("rmse_curve.csv")).unwrap(), "cycle,rmse,deviation\n");
}

#[test]
fn train_missing_scenario_is_input_error() {
    let out = TempDir::new().unwrap();
    let o = pwe(&["train", "/nonexistent.json", "--out", p(out.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scenario not found"));
}

#[test]
fn compare_then_trace_a_saved_config() {
    let out = TempDir::new().unwrap();
    let o = pwe(&["compare", p(&default_path()), "--out", p(out.path()), "--seeds", "2"]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", stderr(&o));
    let csv = fs::read_to_string(out.path().join("results.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.iter().map(|r| r.split(',').next().unwrap()).collect::<Vec<_>>(), ["regular", "kpconfig", "nnconfig"]);
    for scheme in ["regular", "kpconfig", "nnconfig"] {
        assert!(out.path().join(format!("rays_{scheme}.svg")).is_file());
        assert!(out.path().join(format!("config_{scheme}.json")).is_file());
    }

    let kp_dbm = rows[1].split(',').nth(1).unwrap();
    let traced = out.path().join("trace");
    let o = pwe(&[
        "trace",
        p(&default_path()),
        "--config",
        p(&out.path().join("config_kpconfig.json")),
        "--out",
        p(&traced),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(traced.join("trace.json")).unwrap()).unwrap();
    assert_eq!(summary["received_dbm"].as_f64().unwrap().to_string(), kp_dbm);
    let segments = fs::read_to_string(traced.join("segments.csv")).unwrap();
    assert!(segments.starts_with("ray_id,x1,y1,x2,y2,power_w\n"));
    assert!(traced.join("trace.svg").is_file());
}

#[test]
fn trace_rejects_a_config_with_missing_tiles() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"scheme_name": "partial", "tiles": {"0:0": {"function": "ABSORB", "active": false}}}"#).unwrap();
    let o = pwe(&["trace", p(&default_path()), "--config", p(&cfg), "--out", p(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no configuration for coated tile"));
}

#[test]
fn transmitter_facing_an_absorber_gives_no_signal_anywhere() {
    let dir = TempDir::new().unwrap();
    let path = write_scenario(&dir, "s.json", |v| {
        let users = v["users"].as_array_mut().unwrap();
        let tx = users.iter_mut().find(|u| u["role"] == "transmitter").unwrap();
        tx["boresight_deg"] = 180.0.into();
    });
    let out = dir.path().join("out");
    let o = pwe(&["compare", p(&path), "--out", p(&out), "--seeds", "1"]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    for row in csv.lines().skip(1) {
        assert_eq!(row.split(',').nth(1), Some("no signal"), "{row}");
    }
}

#[test]
fn parallel_compare_matches_sequential() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    pwe(&["compare", p(&default_path()), "--out", p(a.path()), "--seeds", "3"]);
    pwe(&["compare", p(&default_path()), "--out", p(b.path()), "--seeds", "3", "--parallel"]);
    for name in ["results.csv", "omegas.json", "rmse_curve.csv", "config_nnconfig.json", "segments_kpconfig.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn log_level_comes_from_the_environment() {
    let out = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_pwe"))
        .args(["compare", p(&default_path()), "--out", p(out.path()), "--seeds", "1"])
        .env("PWE_LOG", "info")
        .output()
        .unwrap();
    assert!(stderr(&o).contains("wrote"), "{}", stderr(&o));
    let quiet = pwe(&["validate", p(&default_path())]);
    assert!(stderr(&quiet).is_empty());
}

#[test]
fn bundled_scenario_matches_the_library_default() {
    let on_disk = Scenario::load(&default_path()).unwrap();
    assert_eq!(on_disk, Scenario::default_scenario());
}
