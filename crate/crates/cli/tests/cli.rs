use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ugc_eq_cli::render_curve_svg;
use ugc_equilibrium::SymmetricStrategy;

const BIN: &str = env!("CARGO_BIN_EXE_ugc-eq");

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn ugc_eq(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs a command against a golden config and compares the artifact with
/// the stored file byte for byte.
fn check_golden(command: &str, config: &str, artifact: &str, extra: &[&str], code: i32) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join(artifact);
    let cfg = golden(config);
    let mut args = vec![command, "--config", s(&cfg), "--out", s(&out)];
    args.extend_from_slice(extra);
    let res = ugc_eq(&args);
    assert_eq!(res.status.code(), Some(code), "{}", String::from_utf8_lossy(&res.stderr));
    let got = std::fs::read(&out).unwrap();
    let want = std::fs::read(golden(artifact)).unwrap();
    assert!(got == want, "{artifact} differs from the golden file");
}

#[test]
fn golden_m3_solve_all() {
    check_golden("solve", "m3.config.json", "m3.solve.json", &["--all"], 0);
}

#[test]
fn golden_m4_solve_and_dynamics() {
    check_golden("solve", "m4.config.json", "m4.solve.json", &[], 0);
    check_golden("dynamics", "m4.config.json", "m4.dynamics.csv", &[], 0);
}

#[test]
fn golden_m6_curve_csv_and_svg() {
    check_golden("curve", "m6.config.json", "m6.curve.csv", &[], 0);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m6.curve.csv");
    ugc_eq(&["curve", "--config", s(&golden("m6.config.json")), "--out", s(&out)]);
    assert_eq!(std::fs::read(out.with_extension("svg")).unwrap(), std::fs::read(golden("m6.curve.svg")).unwrap());
}

#[test]
fn golden_cutoffs() {
    check_golden("solve", "m5.config.json", "m5.solve.json", &[], 0);
    check_golden("solve", "m7.config.json", "m7.solve.json", &["--seed", "3", "--mc-samples", "20000"], 0);
}

#[test]
fn m2_solve_is_a_nonexistence_verdict() {
    check_golden("solve", "m2.config.json", "m2.solve.json", &[], 1);
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(golden("m2.solve.json")).unwrap()).unwrap();
    assert_eq!(doc["verdict"], "none");
    let res = ugc_eq(&["oracle", "--config", s(&golden("m2.config.json"))]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn curve_has_three_segment_kinds() {
    let text = std::fs::read_to_string(golden("m6.curve.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,beta_star,segment_kind"));
    let kinds: std::collections::BTreeSet<&str> = lines.map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(kinds.into_iter().collect::<Vec<_>>(), ["diagonal", "original", "shifted"]);
    let svg = std::fs::read_to_string(golden("m6.curve.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.contains("stroke-dasharray") && svg.contains("class=\"diagonal\""));
}

#[test]
fn solve_then_verify_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        r#"{"mechanism":"M4","N":4,"R":6,"c":1,"types":[0.9,0.6,0.5,0.2]}"#,
        r#"{"mechanism":"M4","N":3,"R":1,"c":1,"types":[1.0,0.3,0.1]}"#,
        r#"{"mechanism":"M3","N":3,"R":4,"c":1,"types":[0.9247,0.3421,0.3095]}"#,
        r#"{"mechanism":"M1","N":4,"K":2,"R":3,"c":1,"types":[0.9,0.8,0.4,0.1]}"#,
    ];
    for (i, json) in configs.iter().enumerate() {
        let cfg = write(dir.path(), &format!("c{i}.json"), json);
        let solved = dir.path().join(format!("s{i}.json"));
        assert_eq!(ugc_eq(&["solve", "--all", "--config", s(&cfg), "--out", s(&solved)]).status.code(), Some(0));
        let res = ugc_eq(&["verify", "--config", s(&cfg), "--profile", s(&solved)]);
        assert_eq!(res.status.code(), Some(0), "{json}: {}", String::from_utf8_lossy(&res.stdout));
    }
}

#[test]
fn verify_bare_profile() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"mechanism":"M4","N":2,"R":2,"c":1,"types":[1.0,1.0]}"#);
    let good = write(dir.path(), "good.json", "[0.5, 0.5]");
    let bad = write(dir.path(), "bad.json", "[0.4, 0.6]");
    assert_eq!(ugc_eq(&["verify", "--config", s(&cfg), "--profile", s(&good)]).status.code(), Some(0));
    let res = ugc_eq(&["verify", "--config", s(&cfg), "--profile", s(&bad)]);
    assert_eq!(res.status.code(), Some(3));
    let report: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report["is_equilibrium"], false);
}

#[test]
fn partial_information_verify_runs_the_monte_carlo_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"mechanism":"M5","N":3,"K":1,"R":4,"c":1}"#);
    let res = ugc_eq(&["verify", "--config", s(&cfg), "--mc-samples", "100000", "--seed", "5"]);
    assert_eq!(res.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(report["method"], "monte-carlo");
    assert_eq!(report["seed"], 5);
}

#[test]
fn config_errors_exit_2_with_field() {
    let dir = tempfile::tempdir().unwrap();
    for (json, field) in [
        (r#"{"mechanism":"M4","N":2,"R":2,"c":1,"types":[1.0,0.0]}"#, "types"),
        (r#"{"mechanism":"M4","N":2,"R":2,"c":1,"types":[0.3,0.9]}"#, "types"),
        (r#"{"mechanism":"M1","N":2,"R":2,"c":1,"types":[0.9,0.3]}"#, "K"),
        (r#"{"mechanism":"M5","N":2,"K":1,"R":2,"c":0}"#, "c"),
        (r#"{"mechanism":"M6","N":3,"K":1,"R":2,"c":1,"distribution":{"kind":"piecewise","knots":[[0,0.2],[1,1]]}}"#, "distribution"),
        ("not json", "document"),
    ] {
        let cfg = write(dir.path(), "c.json", json);
        let res = ugc_eq(&["solve", "--config", s(&cfg)]);
        assert_eq!(res.status.code(), Some(2), "{json}");
        let err = String::from_utf8_lossy(&res.stderr);
        assert!(err.contains(&format!("{field}:")), "{json}: {err}");
        assert!(res.stdout.is_empty());
    }
    assert_eq!(ugc_eq(&["solve", "--config", "/nonexistent/config.json"]).status.code(), Some(2));
    assert_eq!(ugc_eq(&["frobnicate", "--config", "x"]).status.code(), Some(2));
}

#[test]
fn commands_reject_other_mechanisms() {
    let dir = tempfile::tempdir().unwrap();
    let m4 = write(dir.path(), "m4.json", r#"{"mechanism":"M4","N":2,"R":2,"c":1,"types":[1.0,1.0]}"#);
    let m6 = write(dir.path(), "m6.json", r#"{"mechanism":"M6","N":4,"K":1,"R":3,"c":1}"#);
    assert_eq!(ugc_eq(&["curve", "--config", s(&m4)]).status.code(), Some(2));
    assert_eq!(ugc_eq(&["dynamics", "--config", s(&m6)]).status.code(), Some(2));
    assert_eq!(ugc_eq(&["verify", "--config", s(&m4)]).status.code(), Some(2));
}

#[test]
fn binary_oracle_lists_enumerated_equilibria() {
    let res = ugc_eq(&["oracle", "--config", s(&golden("m3.config.json"))]);
    assert_eq!(res.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(doc["equilibria"].as_array().unwrap().len(), 2);
}

#[test]
fn negative_tolerance_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"mechanism":"M4","N":3,"R":3,"c":1,"types":[0.9,0.5,0.2]}"#);
    for command in ["dynamics", "verify"] {
        assert_eq!(ugc_eq(&[command, "--config", s(&cfg), "--tol", "-1"]).status.code(), Some(2));
    }
}

#[test]
fn square_bid_svg_is_convex_and_below_diagonal() {
    let points: Vec<(f64, f64)> = (0..=100).map(|i| i as f64 / 100.0).map(|x| (x, x * x)).collect();
    let strategy = SymmetricStrategy::from_grid(&points).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sq.svg");
    render_curve_svg(&strategy, &path).unwrap();
    let svg = std::fs::read_to_string(&path).unwrap();
    // Pull the strategy polyline back out and check the shape in data units:
    // the plot maps y upward, so screen y decreases as the bid grows.
    let poly = svg.split("<polyline").find(|p| p.contains("class=\"original\"")).expect("strategy polyline");
    let coords: Vec<(f64, f64)> = poly
        .split("points=\"")
        .nth(1)
        .unwrap()
        .split('"')
        .next()
        .unwrap()
        .split_whitespace()
        .map(|pair| {
            let (a, b) = pair.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(coords.len(), points.len());
    let (x0, y0) = coords[0];
    let (x1, y1) = coords[coords.len() - 1];
    let data: Vec<(f64, f64)> = coords.iter().map(|&(a, b)| ((a - x0) / (x1 - x0), (y0 - b) / (y0 - y1))).collect();
    for w in data.windows(3) {
        assert!(w[1].1 >= w[0].1 - 1e-9, "monotone");
        assert!(w[1].1 <= 0.5 * (w[0].1 + w[2].1) + 1e-6, "convex");
    }
    assert!(data.iter().all(|&(x, y)| y <= x + 1e-6), "below the diagonal");
    assert!(render_curve_svg(&strategy, Path::new("/nonexistent/dir/out.svg")).is_err());
}
