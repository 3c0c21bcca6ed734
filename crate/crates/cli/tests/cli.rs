use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn csd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csd")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").canonicalize().unwrap()
}

fn data_lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn oracle_dump_writes_the_full_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = csd(&["oracle-dump", "-o", "out"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/catalog.json")).unwrap()).unwrap();
    let entries = json["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 45);
    assert!((entries[0]["value"].as_f64().unwrap() - 0.918912).abs() < 1e-5);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 46);
}

#[test]
fn campaign_rows_match_the_seed_count_and_progress_stream() {
    let dir = tempfile::tempdir().unwrap();
    let out = csd(&["lep-all-index", "--ks", "0-2", "--pooled", "--seeds", "9", "--eta", "25", "-o", "out"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let result = dir.path().join("out/result.csv");
    assert_eq!(data_lines(&result), 9);
    let mut a: Vec<String> = std::fs::read_to_string(&result).unwrap().lines().map(String::from).collect();
    let mut b: Vec<String> = std::fs::read_to_string(dir.path().join("out/progress.csv")).unwrap().lines().map(String::from).collect();
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "experiment = \"lep-all-index\"\nks = [1]\nseeds = 4\neta_x = 25.0\neta_p = 25.0\n").unwrap();
    let out = csd(&["lep-all-index", "--config", "c.toml", "--seeds", "6", "--format", "json", "-o", "out"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/result.json")).unwrap()).unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r["k"] == 1));
    assert_eq!(json["aggregates"][0]["runs"], 6);
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    for (threads, name) in [("1", "a"), ("3", "b")] {
        let out = csd(&["lep-all-index", "--ks", "0-3", "--seeds", "5", "--eta", "25", "--threads", threads, "-o", name], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("a/result.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/result.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "no_such_key = 1\n").unwrap();
    let out = csd(&["lep-all-index", "--config", "bad.toml"], dir.path());
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad.toml") && stderr.contains("no_such_key"));
    assert!(!csd(&["lep-perturb", "--seeds", "0"], dir.path()).status.success());
    assert!(!csd(&["lep-perturb", "--betas=-1"], dir.path()).status.success());
    assert!(!csd(&["rhf-scan"], dir.path()).status.success());
    assert!(!csd(&["lep-all-index", "--ks", "4-2"], dir.path()).status.success());
}

#[test]
fn rhf_scan_series_reproduces_the_ground_state() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = fixtures().join("h2_631g_1.4.fcidump");
    let out = csd(
        &["rhf-scan", "--fcidump", fixture.to_str().unwrap(), "--ks", "0", "--seeds", "3", "--eta", "0.1", "--tol", "1e-10", "--compute-spectrum", "-o", "out"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fixtures().join("h2_631g_1.4.json")).unwrap()).unwrap();
    let reference = sidecar["rhf_total_energy"].as_f64().unwrap();
    let series = std::fs::read_to_string(dir.path().join("out/series.csv")).unwrap();
    let lines: Vec<&str> = series.lines().collect();
    assert_eq!(lines[0], "fixture,bond_length,index,energy,count");
    assert_eq!(lines.len(), 2);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[2], "0");
    assert!((fields[3].parse::<f64>().unwrap() - reference).abs() <= 1e-6);
    assert_eq!(fields[4], "3");
}

#[test]
fn check_passes_and_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = csd(&["check", "--trials", "10", "--fixtures", fixtures().to_str().unwrap(), "-o", "checks.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("checks.json")).unwrap()).unwrap();
    let outcomes = json.as_array().unwrap();
    assert!(outcomes.iter().all(|o| o["pass"] == true));
    assert!(outcomes.iter().any(|o| o["suite"] == "objectives"));
    assert!(!csd(&["check", "--trials", "0"], dir.path()).status.success());
}
