use std::path::PathBuf;
use std::process::Command;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn adc(feeder: &PathBuf, out: &std::path::Path, extra: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_adc"))
        .arg("run")
        .arg("--feeder")
        .arg(feeder)
        .arg("--scenario")
        .arg(data("ieee13_scenario.json"))
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn small_monte_carlo_run_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = adc(&data("ieee13_feeder.json"), dir.path(), &["--method", "mcs", "--samples", "20", "--workers", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("mcs   solves     20"));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn infeasible_base_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("ieee13_feeder.json")).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["limits"]["v_min_pu"] = 0.999.into();
    let feeder = dir.path().join("tight.json");
    std::fs::write(&feeder, doc.to_string()).unwrap();
    let out = adc(&feeder, &dir.path().join("out"), &["--method", "mcs", "--samples", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("voltage"));
}

#[test]
fn missing_feeder_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = adc(&dir.path().join("absent.json"), dir.path(), &["--method", "mcs"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_sparse_term_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = adc(&data("ieee13_feeder.json"), dir.path(), &["--sparse-terms", "zero"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("auto"));
}
