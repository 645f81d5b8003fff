use std::path::{Path, PathBuf};
use std::process::Command;

use jsonschema::{Draft, JSONSchema};
use serde_json::Value;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .display()
        .to_string()
}

fn schema(name: &str) -> JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{name}.schema.json"));
    let raw: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    JSONSchema::options()
        .with_draft(Draft::Draft7)
        .compile(&raw)
        .expect("schema compiles")
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn qgraph(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_qgraph"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn assert_schema(name: &str, report: &str) -> Value {
    let value: Value = serde_json::from_str(report).expect("report is JSON");
    let s = schema(name);
    if let Err(errors) = s.validate(&value) {
        let msgs: Vec<String> = errors
            .map(|e| format!("{}: {e}", e.instance_path))
            .collect();
        panic!(
            "{name} report violates schema:\n{}\n{report}",
            msgs.join("\n")
        );
    }
    value
}

#[test]
fn validate_accepts_star_with_kirchhoff() {
    let r = qgraph(&["validate", "--graph", &data("star.json")]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = assert_schema("validate", &r.stdout);
    assert_eq!(v["valid"], true);
    assert_eq!(v["graph"]["edges"], 3);
    assert_eq!(v["heins"]["c"], 0.5);
}

#[test]
fn validate_names_the_short_edge() {
    let r = qgraph(&["validate", "--graph", &data("short_edge.json")]);
    assert_eq!(r.code, 1);
    let v = assert_schema("validate", &r.stdout);
    assert_eq!(v["graph_violations"][0]["edge"], "short");
    assert_eq!(v["graph_violations"][0]["kind"], "lower_bound");
}

#[test]
fn validate_rejects_non_hermitian_l() {
    let r = qgraph(&[
        "validate",
        "--graph",
        &data("interval_pi.json"),
        "--bc",
        &data("non_hermitian.json"),
    ]);
    assert_eq!(r.code, 1);
    let v = assert_schema("validate", &r.stdout);
    assert_eq!(v["bc"]["violations"][0]["kind"], "not_self_adjoint");
    assert_eq!(v["bc"]["violations"][0]["vertex"], "b");
}

#[test]
fn delta_condition_sets_s() {
    let r = qgraph(&[
        "validate",
        "--graph",
        &data("star.json"),
        "--bc",
        &data("star_delta.json"),
    ]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let v = assert_schema("validate", &r.stdout);
    // |δ| / deg at the centre
    assert!((v["heins"]["s"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn missing_graph_file_is_an_input_error() {
    let r = qgraph(&["validate", "--graph", "/nonexistent/graph.json"]);
    assert_eq!(r.code, 2);
    assert!(!r.stderr.is_empty());
}

#[test]
fn unknown_bc_preset_is_an_input_error() {
    let r = qgraph(&["spectrum", "--graph", &data("star.json"), "--bc", "robin"]);
    assert_eq!(r.code, 2);
}

#[test]
fn non_compact_spectrum_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let r = qgraph(&[
        "spectrum",
        "--graph",
        &data("half_line.json"),
        "--out",
        &out,
    ]);
    assert_eq!(r.code, 2);
    let report = std::fs::read_to_string(dir.path().join("spectrum.json")).unwrap();
    let v = assert_schema("error", &report);
    assert!(v["error"].as_str().unwrap().contains("infinite"));
}

#[test]
fn lambda_range_must_be_ordered() {
    let r = qgraph(&[
        "spectrum",
        "--graph",
        &data("star.json"),
        "--lambda-min",
        "5",
        "--lambda-max",
        "-1",
    ]);
    assert_eq!(r.code, 2);
}

#[test]
fn spectrum_report_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let r = qgraph(&[
        "spectrum",
        "--graph",
        &data("interval_pi.json"),
        "--bc",
        "dirichlet",
        "--modes",
        "5",
        "--out",
        &out,
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = std::fs::read_to_string(dir.path().join("spectrum.json")).unwrap();
    let v = assert_schema("spectrum", &report);
    assert_eq!(v["pass"], true);
    let secular = v["spectra"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["solver"] == "secular")
        .unwrap();
    for (n, x) in secular["values"].as_array().unwrap().iter().enumerate() {
        let exact = ((n + 1) * (n + 1)) as f64;
        assert!((x.as_f64().unwrap() - exact).abs() < 1e-8);
    }
    for solver in ["fem", "secular"] {
        let csv =
            std::fs::read_to_string(dir.path().join(format!("spectrum_{solver}.csv"))).unwrap();
        assert!(csv.starts_with("index,eigenvalue"));
        assert_eq!(csv.lines().count(), 6);
    }
}

#[test]
fn spectrum_on_loop_graph() {
    let r = qgraph(&[
        "spectrum",
        "--graph",
        &data("loop_edge.json"),
        "--modes",
        "6",
    ]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_schema("spectrum", &r.stdout);
}

#[test]
fn expansion_report_matches_schema() {
    let r = qgraph(&[
        "expansion",
        "--graph",
        &data("interval_pi.json"),
        "--bc",
        "dirichlet",
        "--gamma-shift",
        "1",
    ]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let v = assert_schema("expansion", &r.stdout);
    let hs = v["hs_norm_sq"].as_f64().unwrap();
    assert!((hs - 1.07667).abs() < 1e-3, "{hs}");
    assert_eq!(v["per_mode"].as_array().unwrap().len(), 20);
}

fn write_grid(path: &Path, f: impl Fn(f64) -> f64) {
    let l = std::f64::consts::PI;
    let n = 400;
    let mut s = String::from("edge_id,t,re,im\n");
    for k in 0..=n {
        let t = l * k as f64 / n as f64;
        s.push_str(&format!("e,{t:e},{:e},0\n", f(t)));
    }
    std::fs::write(path, s).unwrap();
}

fn check_run(file: &Path) -> Run {
    qgraph(&[
        "expansion",
        "--graph",
        &data("interval_pi.json"),
        "--bc",
        "dirichlet",
        "--modes",
        "5",
        "--check-file",
        &file.display().to_string(),
        "--check-lambda",
        "1",
    ])
}

#[test]
fn check_file_accepts_an_eigenfunction() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("sin.csv");
    write_grid(&file, f64::sin);
    let r = check_run(&file);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let v = assert_schema("expansion", &r.stdout);
    assert_eq!(v["check"]["pass"], true);
}

#[test]
fn check_file_rejects_a_kink() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("kink.csv");
    let half = std::f64::consts::FRAC_PI_2;
    write_grid(&file, |t| half - (t - half).abs());
    let r = check_run(&file);
    assert_ne!(r.code, 0);
    let v = assert_schema("expansion", &r.stdout);
    assert_eq!(v["check"]["pass"], false);
    assert!(v["check"]["genef"]["worst"].as_f64().unwrap() > 1e-2);
}

#[test]
fn check_file_needs_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("sin.csv");
    write_grid(&file, f64::sin);
    let r = qgraph(&[
        "expansion",
        "--graph",
        &data("interval_pi.json"),
        "--check-file",
        &file.display().to_string(),
    ]);
    assert_eq!(r.code, 2);
    assert_schema("error", &r.stdout);
}

#[test]
fn potential_report_matches_schema() {
    let r = qgraph(&[
        "potential",
        "--graph",
        &data("star.json"),
        "--potential",
        "const:1",
        "--samples",
        "200",
    ]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    let v = assert_schema("potential", &r.stdout);
    for s in v["shifts"].as_array().unwrap() {
        assert!((s.as_f64().unwrap() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn potential_unknown_spec_is_an_input_error() {
    let r = qgraph(&[
        "potential",
        "--graph",
        &data("star.json"),
        "--potential",
        "nope:3",
    ]);
    assert_eq!(r.code, 2);
}

fn report_bytes(args: &[&str]) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let mut full: Vec<&str> = args.to_vec();
    let out = dir.path().display().to_string();
    full.extend(["--out", &out]);
    let r = qgraph(&full);
    assert!(r.code == 0 || r.code == 1, "{}", r.stderr);
    let name = format!("{}.json", args[0]);
    std::fs::read(PathBuf::from(&out).join(name)).unwrap()
}

#[test]
fn reports_are_deterministic_for_a_seed() {
    let star = data("star.json");
    let cases: [&[&str]; 2] = [
        &[
            "potential",
            "--graph",
            &star,
            "--potential",
            "random:3,2",
            "--seed",
            "7",
            "--samples",
            "100",
        ],
        &["spectrum", "--graph", &star, "--modes", "4"],
    ];
    for args in cases {
        assert_eq!(report_bytes(args), report_bytes(args), "{args:?}");
    }
}
