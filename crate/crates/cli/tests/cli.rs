use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn rentropy(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rentropy"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("RENTROPY_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_gaussian_entropies_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("euclidean.json");
    let o = rentropy(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("euclidean");
    for i in 0..2 {
        let csv = fs::read_to_string(dir.join(format!("entropy_{i}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("T,W,W_err,N,N_err"));
        let mut rows = 0;
        for line in lines {
            let w: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!(w.abs() <= 1e-8, "{line}");
            rows += 1;
        }
        assert_eq!(rows, 15);
        assert!(dir.join(format!("kernel_{i}.csv")).exists());
    }
    let m = json(&dir.join("manifest.json"));
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["configs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["configs"][0]["materialized"]["grid"]["nodes"], 512);
    let suite = json(&dir.join("suite.json"));
    assert_eq!(suite["pass"], true);
    let artifact = suite["reports"][0]["artifacts"][0]["name"].as_str().unwrap();
    assert!(dir.join(artifact).exists(), "{artifact}");
}

#[test]
fn missing_or_invalid_input_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&rentropy(tmp.path(), &["run", "no/such/file.json"])), 3);
    assert_eq!(code(&rentropy(tmp.path(), &["verify", "nosuch"])), 3);
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"name": "x", "flow": {"kind": "cigar_soliton"}, "checks": ["nope"]}"#).unwrap();
    assert_eq!(code(&rentropy(tmp.path(), &["run", bad.to_str().unwrap()])), 3);
    fs::write(&bad, r#"{"name": "x", "flow": {"kind": "flat_torus", "torus": {"lattice": [[1.0]]}}, "base_time": 1.0}"#)
        .unwrap();
    assert_eq!(code(&rentropy(tmp.path(), &["run", bad.to_str().unwrap()])), 3);
}

#[test]
fn solver_breakdown_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("leaky.json");
    fs::write(
        &cfg,
        r#"{"name": "leaky", "flow": {"kind": "cigar_soliton"}, "schedule": {"times": [-1, -2, -512]}, "grid": {"truncation": 60.0}}"#,
    )
    .unwrap();
    let o = rentropy(tmp.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&tmp.path().join("leaky/manifest.json"))["exit_code"], 2);
}

#[test]
fn verify_writes_a_suite_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rentropy(tmp.path(), &["verify", "identities", "--zoo", "euclidean,torus"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("torus-nash-divergence") && stdout.contains("PASS"));
    let suite = json(&tmp.path().join("verify-identities-euclidean+torus/suite.json"));
    assert_eq!(suite["failed"], 0);
}

#[test]
fn schema_describes_scenarios() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rentropy(tmp.path(), &["schema"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["title"], "ScenarioConfig");
    assert!(v["properties"]["flow"].is_object());
}

#[test]
fn node_sweep_shows_second_order() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("torus_pde.json");
    let o = rentropy(
        tmp.path(),
        &["sweep", cfg.to_str().unwrap(), "--axis", "nodes", "--values", "128,256,512"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("sweep-torus-pde-nodes/sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows[1..] {
        let order: f64 = row[9].parse().unwrap();
        assert!((order - 2.0).abs() < 0.1, "{row:?}");
    }
}

#[test]
fn tau_sweep_shifts_nash_by_the_flat_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("euclidean.json");
    let o = rentropy(
        tmp.path(),
        &["sweep", cfg.to_str().unwrap(), "--axis", "tau", "--values", "1,10", "--ratios"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("sweep-euclidean-tau/sweep.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for line in csv.lines().skip(1) {
        let row: Vec<&str> = line.split(',').collect();
        let tau: f64 = row[0].parse().unwrap();
        let shifted: f64 = row[col("N_shifted")].parse().unwrap();
        let expect = 1.5 * (4.0 * std::f64::consts::PI * tau).ln() + 1.5;
        assert!((shifted - expect).abs() < 1e-8, "{line}");
        let ratio: f64 = row[col("min_ratio")].parse().unwrap();
        assert!((ratio - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-6, "{line}");
    }
}
