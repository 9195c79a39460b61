use std::path::Path;
use std::process::{Command, Output};

fn winding(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_winding"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn find_reports_both_pendulum_equilibria() {
    let dir = tempfile::tempdir().unwrap();
    let out = winding(&["find", "--potential", "pendulum", "--seeds", "8"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let orbits = json(&dir.path().join("orbits.json"));
    let orbits = orbits.as_array().unwrap();
    assert_eq!(orbits.len(), 2);
    let mut indices: Vec<u64> = orbits.iter().map(|o| o["morse_index"].as_u64().unwrap()).collect();
    indices.sort();
    assert_eq!(indices, [0, 1]);
    let csv = std::fs::read_to_string(dir.path().join("orbit_0.csv")).unwrap();
    assert!(csv.starts_with("t,x,v\n"));
}

#[test]
fn missing_potential_file_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = winding(&["find", "--potential", "/nonexistent/potential.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn composite_p_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = winding(&["predict", "--potential", "pendulum", "--p", "4"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nonpositive_tolerance_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = winding(&["find", "--potential", "pendulum", "--tol-residual", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_potential_rotation_class_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let out = winding(&["find", "--potential", "zero", "--k1", "1", "--k2", "1", "--seeds", "4"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("degenerate"));
    let orbits = json(&dir.path().join("orbits.json"));
    assert!(orbits.as_array().unwrap().iter().all(|o| o["degenerate"] == true));
}

#[test]
fn synthetic_properties_pass() {
    for a in ["10", "-1"] {
        let dir = tempfile::tempdir().unwrap();
        let out = winding(&["properties", "--synthetic", &format!("a={a}")], dir.path());
        assert_eq!(out.status.code(), Some(0), "a = {a}: {}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(dir.path().join("properties.json")).unwrap();
        assert!(text.contains("\"sum\"") && text.contains("\"conjugation\""));
    }
}

#[test]
fn index_reuses_a_saved_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let found = winding(&["find", "--potential", "pendulum", "--seeds", "8"], dir.path());
    assert_eq!(found.status.code(), Some(0));
    let catalog = dir.path().join("orbits.json");
    let out = winding(
        &["index", "--potential", "pendulum", "--catalog", catalog.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let indices = json(&dir.path().join("indices.json"));
    assert_eq!(indices.as_array().unwrap().len(), 2);
}
