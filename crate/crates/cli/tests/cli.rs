use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use medml::json::to_canonical_string;
use medml::simulation::{generate_dgp, SimulationDesign};
use serde_json::Value;
use tempfile::TempDir;

fn medml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_medml")).args(args).output().expect("binary runs")
}

fn write_dgp_csv(dir: &Path, n: usize, p: usize, seed: u64) -> PathBuf {
    let data = generate_dgp(&SimulationDesign { n, p, ..Default::default() }, seed);
    let path = dir.join("data.csv");
    let mut w = csv::Writer::from_path(&path).unwrap();
    let mut header = vec!["y".to_string(), "d".into(), "m".into()];
    header.extend((1..=p).map(|j| format!("x{j}")));
    w.write_record(&header).unwrap();
    for i in 0..n {
        let mut row = vec![data.outcome()[i].to_string(), data.treatment()[i].to_string(), data.mediator()[i].to_string()];
        row.extend(data.x_row(i).iter().map(|v| v.to_string()));
        w.write_record(&row).unwrap();
    }
    w.flush().unwrap();
    path
}

fn estimate_args<'a>(input: &'a str, out: &'a str) -> Vec<&'a str> {
    vec!["estimate", "--input", input, "--outcome", "y", "--treatment", "d", "--mediator", "m", "--seed", "9", "--output", out]
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn csv_round_trip_recovers_total_effect() {
    let dir = TempDir::new().unwrap();
    let input = write_dgp_csv(dir.path(), 4000, 200, 77);
    let out = dir.path().join("report.json");
    let o = medml(&estimate_args(input.to_str().unwrap(), out.to_str().unwrap()));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&out);
    for est in ["theorem1", "theorem2"] {
        let total = &doc["effects"][est]["total"];
        let (e, se) = (total["estimate"].as_f64().unwrap(), total["se"].as_f64().unwrap());
        assert!((e - 1.02).abs() <= 3.0 * se, "{est}: {e} ± {se}");
    }
    assert_eq!(doc["config"]["covariates"].as_array().unwrap().len(), 200);
    assert_eq!(doc["config"]["rows"]["used"], 4000);
    assert!(doc["timings"].is_null());
    assert_eq!(doc["counterfactuals"].as_array().unwrap().len(), 6);
}

#[test]
fn reruns_are_byte_identical_and_canonical() {
    let dir = TempDir::new().unwrap();
    let input = write_dgp_csv(dir.path(), 500, 20, 78);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let mut args = estimate_args(input.to_str().unwrap(), a.to_str().unwrap());
    args.extend(["--controlled-m", "1"]);
    assert!(medml(&args).status.success());
    let mut args = estimate_args(input.to_str().unwrap(), b.to_str().unwrap());
    args.extend(["--controlled-m", "1"]);
    assert!(medml(&args).status.success());
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());
    let reemitted = to_canonical_string(&read_json(&a)).unwrap();
    assert_eq!(reemitted.as_bytes(), first.as_slice());
    assert!(read_json(&a)["effects"]["controlled"]["m1"]["estimate"].is_f64());
}

#[test]
fn non_binary_mediator_is_a_located_parse_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "y,d,m,x\n1,0,1,0.3\n2,1,0.5,0.1\n").unwrap();
    let o = medml(&["estimate", "--input", path.to_str().unwrap(), "--outcome", "y", "--treatment", "d", "--mediator", "m"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("`m`") && err.contains("0.5"), "{err}");
}

#[test]
fn rows_with_missing_fields_are_reported() {
    let dir = TempDir::new().unwrap();
    let input = write_dgp_csv(dir.path(), 300, 5, 79);
    let mut text = std::fs::read_to_string(&input).unwrap();
    text.push_str(",1,0,0,0,0,0,0\n2.0,1,0,,0,0,0,0\n");
    std::fs::write(&input, text).unwrap();
    let out = dir.path().join("r.json");
    assert!(medml(&estimate_args(input.to_str().unwrap(), out.to_str().unwrap())).status.success());
    let rows = &read_json(&out)["config"]["rows"];
    assert_eq!((rows["read"].as_u64(), rows["used"].as_u64(), rows["rejected"].as_u64()), (Some(302), Some(300), Some(2)));
    assert_eq!(rows["rejected_by_column"]["y"], 1);
    assert_eq!(rows["rejected_by_column"]["x1"], 1);
}

#[test]
fn usage_errors_exit_with_one() {
    let base = ["estimate", "--input", "x.csv", "--outcome", "y", "--treatment", "d"];
    assert_eq!(medml(&base).status.code(), Some(1));
    let mut trim = base.to_vec();
    trim.extend(["--mediator", "m", "--trim", "0.7"]);
    assert_eq!(medml(&trim).status.code(), Some(1));
    let mut same = base.to_vec();
    same.extend(["--mediator", "d"]);
    assert_eq!(medml(&same).status.code(), Some(1));
    assert_eq!(medml(&["simulate", "--folds", "1"]).status.code(), Some(1));
    assert_eq!(medml(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_is_a_data_error() {
    let o = medml(&["estimate", "--input", "/nonexistent.csv", "--outcome", "y", "--treatment", "d", "--mediator", "m"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("file not found"));
}

#[test]
fn simulate_smoke_run_and_format_agreement() {
    let dir = TempDir::new().unwrap();
    let json_path = dir.path().join("sim.json");
    let start = Instant::now();
    let common = ["simulate", "--n", "200", "--p", "10", "--reps", "1"];
    let mut args = common.to_vec();
    args.extend(["--format", "json", "--output", json_path.to_str().unwrap()]);
    assert!(medml(&args).status.success());
    assert!(start.elapsed() < Duration::from_secs(10));
    let table = medml(&common);
    assert!(table.status.success());
    let table = String::from_utf8(table.stdout).unwrap();
    assert!(table.contains("theorem1") && table.contains("theorem2") && table.contains("trimmed"));

    let doc = read_json(&json_path);
    let cells = doc["metrics"]["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 10);
    for kind in ["theorem1", "theorem2"] {
        let line = table
            .lines()
            .skip_while(|l| !l.starts_with(kind))
            .find(|l| l.contains("abias"))
            .unwrap();
        let shown: Vec<f64> = line.split_whitespace().filter_map(|t| t.parse().ok()).collect();
        let stored: Vec<f64> = cells
            .iter()
            .filter(|c| c["estimator"] == kind)
            .map(|c| c["abias"].as_f64().unwrap())
            .collect();
        assert_eq!(shown.len(), 5);
        for (s, v) in shown.iter().zip(&stored) {
            assert_eq!(*s, (v * 1e4).round() / 1e4, "{kind}");
        }
    }
}

#[test]
fn verify_passes_and_injected_score_fails() {
    let ok = medml(&["verify"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let text = String::from_utf8(ok.stdout).unwrap();
    for suite in ["moment condition", "neyman orthogonality", "multiple robustness", "bayes identity", "decomposition identities"] {
        assert!(text.contains(suite), "{suite}");
    }
    let bad = medml(&["verify", "--inject-non-orthogonal", "--format", "json"]);
    assert_eq!(bad.status.code(), Some(3));
    let doc: Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(doc["passed"], false);
    let orth = doc["suites"].as_array().unwrap().iter().find(|s| s["suite"] == "neyman orthogonality").unwrap();
    assert_eq!(orth["passed"], false);
}
