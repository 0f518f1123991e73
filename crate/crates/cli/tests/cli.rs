use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use metric_fractals::kameyama::ExkamPoint;
use metric_fractals::scalar::{parse_rational, rat};
use serde_json::Value;

fn mfrac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfrac")).args(args).output().expect("binary runs")
}

fn run_to(dir: &Path, args: &[&str]) -> (i32, Value) {
    let mut all: Vec<&str> = args.to_vec();
    let out = dir.to_str().unwrap();
    all.extend(["--out", out]);
    let o = mfrac(&all);
    let report = fs::read_to_string(dir.join("report.json"))
        .unwrap_or_else(|_| panic!("no report: {}", String::from_utf8_lossy(&o.stderr)));
    (o.status.code().unwrap(), serde_json::from_str(&report).unwrap())
}

fn stdout_json(args: &[&str]) -> (i32, Value) {
    let o = mfrac(args);
    (o.status.code().unwrap(), serde_json::from_slice(&o.stdout).unwrap())
}

#[test]
fn cantor_attractor_has_two_to_the_n_points_in_the_unit_interval() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, report) = run_to(tmp.path(), &["attractor", "--example", "cantor", "--depth", "8"]);
    assert_eq!(code, 0);
    assert_eq!(report["points"], 256);
    let csv = fs::read_to_string(tmp.path().join("attractor_exact.csv")).unwrap();
    let xs: Vec<_> = csv.lines().map(|l| parse_rational(l).unwrap()).collect();
    assert_eq!(xs.len(), 256);
    assert!(xs.iter().all(|x| *x >= rat(0, 1) && *x <= rat(1, 1)));
    assert!(fs::read_to_string(tmp.path().join("attractor.svg")).unwrap().starts_with("<svg"));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "attractor");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 4);
}

#[test]
fn zero_iterations_echo_the_seed() {
    let (code, report) = stdout_json(&["attractor", "--example", "cantor", "--depth", "0"]);
    assert_eq!(code, 0);
    assert_eq!(report["points"], 1);
    assert_eq!(report["bounding_box"]["value"], serde_json::json!([[0.0], [0.0]]));
}

#[test]
fn complex_attractor_matches_the_closed_form_set() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _) = run_to(tmp.path(), &["attractor", "--example", "kameyama", "--backend", "numeric", "--depth", "6"]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(tmp.path().join("attractor.csv")).unwrap();
    let got: Vec<[f64; 2]> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            [v[0], v[1]]
        })
        .collect();
    let mut want = vec![ExkamPoint::Zero.coords(1.0)];
    for n in 0..6 {
        for k in 0..=n {
            want.push(ExkamPoint::X { n, k }.coords(1.0));
        }
    }
    assert_eq!(got.len(), want.len());
    let close = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]) < 1e-12;
    assert!(want.iter().all(|w| got.iter().any(|g| close(g, w))));
}

#[test]
fn exact_backend_refuses_irrational_example() {
    let o = mfrac(&["attractor", "--example", "kameyama"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("numeric"));
}

#[test]
fn complex_example_golden_distances() {
    let tmp = tempfile::tempdir().unwrap();
    let mut pairs = vec![("0".to_string(), "0".to_string())];
    for n in 1..=4 {
        for l in 0..=n {
            pairs.push(("0".into(), format!("x_{n},{l}")));
        }
    }
    let file = tmp.path().join("pairs.json");
    fs::write(&file, serde_json::to_string(&pairs).unwrap()).unwrap();
    let (code, report) = stdout_json(&["kameyama", "--example", "kameyama", "--lambda", "1/2", "--depth", "6", "--pairs", file.to_str().unwrap()]);
    assert_eq!(code, 0);
    let rows = report["pairs"].as_array().unwrap();
    assert_eq!(rows[0]["distance"]["value"], "0");
    assert_eq!(rows[0]["distance"]["provenance"], "exact");
    for row in &rows[1..] {
        let y = row["y"].as_str().unwrap();
        let n: i32 = y[2..y.find(',').unwrap()].parse().unwrap();
        assert_eq!(row["distance"]["value"], format!("1/{}", 1 << n), "{y}");
        assert_eq!(row["ok"], true);
    }
}

#[test]
fn ultrafractal_inputs_agree_with_the_ultra_formula() {
    let (code, report) = stdout_json(&["kameyama", "--example", "cantor", "--depth", "5"]);
    assert_eq!(code, 0);
    assert_eq!(report["ultrafractal"]["status"], "yes");
    let rows = report["pairs"].as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["agree"] == true));
}

#[test]
fn tripod_is_refused_with_a_witness() {
    let (code, report) = stdout_json(&["embed", "hilbert", "--example", "tripod"]);
    assert_eq!(code, 2);
    assert_eq!(report["verdict"]["kind"], "not-embeddable");
    assert_eq!(report["pair_family"]["kind"], "violation");
    assert!(report.get("coordinates").is_none());
}

#[test]
fn ultrametric_line_embedding_reports_both_bounds() {
    let (code, report) = stdout_json(&["embed", "line", "--example", "ultra", "--lambda", "1/16", "--epsilon", "3/4"]);
    assert_eq!(code, 0);
    assert_eq!(report["bounds"]["pairs"], 6);
    assert_eq!(report["bounds"]["violations"].as_array().unwrap().len(), 0);
    assert_eq!(report["bounds"]["lower_constant"]["provenance"], "exact");
    assert_eq!(report["bounds"]["upper_constant"]["provenance"], "exact");
    assert_eq!(report["coordinates"].as_array().unwrap().len(), 4);
}

#[test]
fn single_point_embeds_trivially() {
    for target in ["line", "hilbert"] {
        let (code, report) = stdout_json(&["embed", target, "--example", "point"]);
        assert_eq!(code, 0, "{target}");
        assert_eq!(report["coordinates"].to_string().matches("label").count(), 1);
    }
}

#[test]
fn non_ultrametric_input_is_rejected_for_the_line() {
    let o = mfrac(&["embed", "line", "--example", "tripod"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ultrametric"));
}

#[test]
fn desk_realization_passes_every_check() {
    let (code, report) = stdout_json(&["realize", "--example", "desk", "--depth", "5"]);
    assert_eq!(code, 0);
    assert_eq!(report["all_ok"], true);
    let checks = report["bundle"]["checks"].as_array().unwrap();
    assert!(checks.len() >= 5);
}

#[test]
fn realization_rejects_small_lambda() {
    let o = mfrac(&["realize", "--example", "desk", "--lambda", "1/2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn glued_codes_have_zero_quotient_distance() {
    let (code, report) = stdout_json(&["quotient", "--example", "halves", "--depth", "6"]);
    assert_eq!(code, 0);
    let v = &report["values"][1];
    assert_eq!(v["x"], "0(1)");
    assert_eq!(v["exact_only"]["value"], 0.0);
    assert!(v["unglued"]["value"].as_f64().unwrap() > 0.5);
    let (_, cantor) = stdout_json(&["quotient", "--example", "cantor", "--depth", "6"]);
    assert_eq!(cantor["glued"].as_array().unwrap().len(), 0);
    let c = &cantor["values"][1];
    assert_eq!(c["exact_only"]["value"], c["unglued"]["value"]);
}

#[test]
fn same_manifest_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["kameyama", "--example", "cantor", "--depth", "4", "--lambda", "1/3"];
    run_to(a.path(), &args);
    run_to(b.path(), &args);
    for f in ["report.json", "manifest.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn reproduce_runs_every_example() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mfrac(&["reproduce", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let index: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("index.json")).unwrap()).unwrap();
    let runs = index.as_array().unwrap();
    assert_eq!(runs.len(), 9);
    assert!(runs.iter().all(|r| r["status"] == r["expected"]));
    assert!(tmp.path().join("reproduce.sh").exists());
    assert!(tmp.path().join("inputs/cantor.json").exists());
}

#[test]
fn missing_input_is_an_error() {
    let o = mfrac(&["quotient"]);
    assert_eq!(o.status.code(), Some(1));
    let o = mfrac(&["attractor", "--ifs", "/nonexistent.json"]);
    assert_eq!(o.status.code(), Some(1));
}
