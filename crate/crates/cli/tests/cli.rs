use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rosfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rosfit")).args(args).output().expect("spawn rosfit")
}

fn fixture(dir: &Path, name: &str) -> PathBuf {
    let out = dir.join(name);
    let o = rosfit(&["fixture", name, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn inputs(fx: &Path) -> Vec<String> {
    ["fuels", "fuel-table", "weather", "ignition"]
        .iter()
        .zip(["fuels.asc", "fuels.csv", "weather.csv", "ignition.csv"])
        .flat_map(|(flag, file)| [format!("--{flag}"), fx.join(file).display().to_string()])
        .collect()
}

fn scars(fx: &Path) -> Vec<String> {
    let mut v = vec!["--scars".to_string()];
    v.extend((1..=7).map(|h| fx.join(format!("scar_{:04}.asc", 60 * h)).display().to_string()));
    v
}

fn run_ok(args: Vec<String>) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = rosfit(&refs);
    assert!(o.status.success(), "{:?}: {}", args, String::from_utf8_lossy(&o.stderr));
    o
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_one_grid_per_report_and_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixture(tmp.path(), "circle-5x5");
    let out = tmp.path().join("sim");
    let mut args = vec!["simulate".to_string()];
    args.extend(inputs(&fx));
    args.extend(["--out".into(), out.display().to_string()]);
    run_ok(args);
    let asc = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "asc"))
        .count();
    assert_eq!(asc, 7);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(std::fs::read(out.join("scar_0420.asc")).unwrap(), std::fs::read(fx.join("scar_0420.asc")).unwrap());
}

#[test]
fn compare_a_grid_with_itself() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixture(tmp.path(), "homogeneous-20x20");
    let grid = fx.join("scar_0180.asc").display().to_string();
    let o = run_ok(vec!["compare".into(), grid.clone(), grid, "--format".into(), "json".into()]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["mse"], 0.0);
    assert_eq!(v["ssim"], 1.0);
    assert_eq!(v["hamming"], 0);
}

#[test]
fn fms_calibration_reports_32_factors() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixture(tmp.path(), "striped-8");
    let out = tmp.path().join("fit");
    let mut args = vec!["calibrate".to_string()];
    args.extend(inputs(&fx));
    args.extend(scars(&fx));
    args.extend(["--mode", "fms", "--max-evals", "70", "--out"].map(String::from));
    args.push(out.display().to_string());
    run_ok(args);
    let result = read_json(&out.join("result.json"));
    assert_eq!(result["x"].as_array().unwrap().len(), 32);
    assert!(result["final_error"].as_f64().unwrap() <= result["initial_error"].as_f64().unwrap());
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.lines().count() >= 2);
}

#[test]
fn benchmark_table_lists_each_algorithm() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixture(tmp.path(), "homogeneous-20x20");
    let out = tmp.path().join("bench");
    let mut args = vec!["benchmark".to_string()];
    args.extend(inputs(&fx));
    args.extend(scars(&fx));
    args.extend(["--algorithms", "bobyqa,nelder-mead,pattern-search", "--max-evals", "30", "--out"].map(String::from));
    args.push(out.display().to_string());
    run_ok(args);
    let csv = std::fs::read_to_string(out.join("benchmark.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "algorithm,NEVAL,RUNTIME,MinValue");
    assert_eq!(lines.len(), 4);
}

#[test]
fn realtime_writes_one_row_per_scar() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = fixture(tmp.path(), "homogeneous-20x20");
    let out = tmp.path().join("rt");
    let mut args = vec!["realtime".to_string()];
    args.extend(inputs(&fx));
    args.extend(scars(&fx));
    args.extend(["--max-evals", "20", "--out"].map(String::from));
    args.push(out.display().to_string());
    run_ok(args);
    let rows = read_json(&out.join("realtime.json"));
    assert_eq!(rows.as_array().unwrap().len(), 7);
}

#[test]
fn missing_input_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.asc").display().to_string();
    let o = rosfit(&["compare", &missing, &missing]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn bad_flags_exit_with_one() {
    assert_eq!(rosfit(&["simulate", "--bogus"]).status.code(), Some(1));
    assert_eq!(rosfit(&["fixture", "no-such-fixture", "--out", "x"]).status.code(), Some(1));
    assert_eq!(rosfit(&["--help"]).status.code(), Some(0));
}
