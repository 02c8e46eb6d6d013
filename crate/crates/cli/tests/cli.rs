use std::path::PathBuf;
use std::process::{Command, Output};

use clustermirror::local_mirror::in_pa_via_cube;
use clustermirror::rational::{parse_q, q};
use clustermirror::Q;
use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clustermirror")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json report")
}

fn statuses(v: &Value) -> Vec<&str> {
    v["checks"].as_array().unwrap().iter().map(|c| c["status"].as_str().unwrap()).collect()
}

fn witness<'a>(v: &'a Value, name: &str) -> &'a str {
    let c = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"));
    c["witness"].as_str().unwrap()
}

#[test]
fn valid_diagram_exits_zero() {
    let b1 = data("b1.json");
    let o = run(&["diagram", "validate", b1.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["command"], "diagram validate");
    assert!(v["inputs_digest"].as_str().unwrap().starts_with("sha256:"));
    assert_eq!(statuses(&v), ["pass"]);
}

#[test]
fn invalid_diagram_is_a_check_failure() {
    let bad = data("bad_direction.json");
    let o = run(&["diagram", "validate", bad.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 1);
    assert_eq!(statuses(&json(&o)), ["fail"]);
}

#[test]
fn malformed_file_reports_position() {
    let bad = data("malformed.json");
    let o = run(&["diagram", "validate", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("malformed.json:6:7:"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&["check", "nonsense"])), 2);
    assert_eq!(code(&run(&["diagram", "validate", "/nonexistent/diagram.json"])), 2);
    let b1 = data("b1.json");
    assert_eq!(code(&run(&["diagram", "render", b1.to_str().unwrap(), "--overlay", "Pb:k=1"])), 2);
    assert_eq!(code(&run(&["check", "wallcross", "--format", "svg"])), 2);
}

#[test]
fn monodromy_example() {
    let o = run(&["check", "monodromy", "--k", "3", "--cutoff", "6", "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let v = json(&o);
    assert!(statuses(&v).iter().all(|s| *s == "pass"));
    assert!(witness(&v, "upper and lower images agree").ends_with("ξ + 3ξη + 3ξη^2 + ξη^3"));
    assert_eq!(witness(&v, "transport around the node"), "ξ ↦ ξη^3 around the node");
}

#[test]
fn wallcross_example() {
    let o = run(&["check", "wallcross", "--k", "1", "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let v = json(&o);
    assert_eq!(witness(&v, "upper crossing of ξ"), "ξ ↦ ξ + ξη");
}

#[test]
fn torsion_example_is_deterministic() {
    let args = ["--seed", "7", "check", "torsion", "--instances", "100", "--format", "json"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0, "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["seed"], 7);
    assert_eq!(statuses(&v).len(), 100);
    let other = run(&["--seed", "8", "check", "torsion", "--instances", "100", "--format", "json"]);
    assert_ne!(other.stdout, a.stdout);
}

#[test]
fn series_wallcross_from_file() {
    let f = data("xi.series");
    let o = run(&["series", "wallcross", f.to_str().unwrap(), "--k", "2", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(witness(&v, "image in chart coordinates"), "ξ + 2ξη + ξη^2");
}

#[test]
fn complex_torsion_from_file() {
    let f = data("torsion.json");
    let o = run(&["complex", "torsion", f.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(witness(&v, "degree 0"), "-inf");
    assert_eq!(witness(&v, "degree 1"), "2");
    assert_eq!(witness(&v, "degree 2"), "1/2");
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("clustermirror-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let o = run(&["check", "wallcross", "--out", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "check wallcross");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn render_matches_golden() {
    let b1 = data("b1.json");
    let o = run(&["diagram", "render", b1.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), std::fs::read_to_string(data("b1.svg")).unwrap());
}

fn decimal(s: &str) -> Q {
    let (int, frac) = s.split_once('.').expect("six decimals");
    assert_eq!(frac.len(), 6);
    let sign = if int.starts_with('-') { q(-1) } else { q(1) };
    parse_q(int).unwrap() + sign * parse_q(frac).unwrap() / q(1_000_000)
}

/// Vertices of `d="M..,.. L..,.. Z"` paths in the overlay group, mapped back to base coordinates.
fn overlay_vertices(svg: &str) -> Vec<Vec<(Q, Q)>> {
    let group = svg.split("<g class=\"overlay\">").nth(1).unwrap().split("</g>").next().unwrap();
    group
        .split("d=\"")
        .skip(1)
        .map(|rest| {
            let d = rest.split('"').next().unwrap();
            d.split_whitespace()
                .filter(|t| *t != "Z")
                .map(|t| {
                    let (x, y) = t[1..].split_once(',').unwrap();
                    let (x, y) = (decimal(x), decimal(y));
                    // Frame [-2,2]^2 at 100 px per unit, y pointing down.
                    (x / q(100) - q(2), q(2) - y / q(100))
                })
                .collect()
        })
        .collect()
}

#[test]
fn pa_overlay_matches_golden_and_hand_vertices() {
    let b1 = data("b1.json");
    let o = run(&["diagram", "render", b1.to_str().unwrap(), "--overlay", "Pa:k=1,a=1"]);
    assert_eq!(code(&o), 0);
    let svg = stdout(&o);
    assert_eq!(svg, std::fs::read_to_string(data("b1_pa.svg")).unwrap());
    assert!(svg.contains("<title>P(1) in B_1</title>"));

    // P(1) in B_1 cut along the ray: the square above it, and below it the
    // quadrilateral bounded by u <= 1 + v from the sheared chart.
    let pts = |v: &[(i64, i64)]| -> Vec<(Q, Q)> {
        let mut v: Vec<(Q, Q)> = v.iter().map(|&(a, b)| (q(a), q(b))).collect();
        v.sort();
        v
    };
    let mut got: Vec<Vec<(Q, Q)>> = overlay_vertices(&svg)
        .into_iter()
        .map(|mut p| {
            p.sort();
            p
        })
        .collect();
    got.sort();
    let mut want = vec![pts(&[(-1, 0), (1, 0), (1, 1), (-1, 1)]), pts(&[(-1, -1), (0, -1), (1, 0), (-1, 0)])];
    want.sort();
    assert_eq!(got, want);
    for (u, v) in got.iter().flatten() {
        assert!(in_pa_via_cube(1, &q(1), &[u.clone(), v.clone()]), "({u}, {v}) outside P(1)");
    }
}

#[test]
fn check_suites_pass_with_small_sizes() {
    for args in [
        &["--seed", "3", "check", "cocycle", "--k", "2", "--instances", "2", "--samples", "20"][..],
        &["check", "hartogs", "--k", "2"],
        &["--seed", "1", "check", "bv", "--instances", "20"],
        &["--seed", "1", "check", "tropdiag", "--k", "2", "--samples", "50"],
    ] {
        let o = run(args);
        assert_eq!(code(&o), 0, "{args:?}: {}", stdout(&o));
    }
}

#[test]
fn glue_reports_overlaps() {
    let o = run(&["mirror", "glue", "--k", "2", "--function", "y", "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let v = json(&o);
    let st = statuses(&v);
    assert!(st.contains(&"pass") && !st.contains(&"fail"));
}
