use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn selfsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_selfsim"))
        .args(args)
        .output()
        .expect("binary should run")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

const NON_REGISTRY: &str = r#"{
  "name": "two-fifths",
  "dimension": 1,
  "hull": { "center": [0.5], "radius": 0.5 },
  "maps": [
    { "matrix": [[0.4]], "offset": [0.0] },
    { "matrix": [[0.4]], "offset": [0.6] }
  ]
}"#;

#[test]
fn cantor_csv_has_one_line_per_cell() {
    let out = selfsim(&["render", "cantor", "--depth", "6"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 64);
    assert_eq!(lines[0], "0");
    assert_eq!(lines[63], "0.998628");
    for l in &lines {
        let v: f64 = l.parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn render_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    for format in ["csv", "ppm"] {
        let a = dir.path().join(format!("a.{format}"));
        let b = dir.path().join(format!("b.{format}"));
        for p in [&a, &b] {
            let out = selfsim(&[
                "render", "koch", "--iterations", "20000", "--format", format, "--width", "64",
                "-o", p.to_str().unwrap(),
            ]);
            assert_eq!(code(&out), 0);
        }
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "{format}");
    }
}

#[test]
fn reports_are_deterministic() {
    let a = selfsim(&["classify", "gasket-modified", "--depth", "8"]);
    let b = selfsim(&["classify", "gasket-modified", "--depth", "8"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

fn in_triangle(p: [f64; 2], slack: f64) -> bool {
    let h = 3f64.sqrt() / 2.0;
    // distances to the three edges, positive inside
    let d1 = p[1];
    let d2 = h * (1.0 - p[0]) - 0.5 * p[1];
    let d3 = h * p[0] - 0.5 * p[1];
    d1 >= -slack && d2 >= -slack && d3 >= -slack
}

#[test]
fn gasket_raster_stays_in_triangle() {
    let width = 512;
    let out = selfsim(&["render", "gasket", "--depth", "7", "--format", "ppm"]);
    assert_eq!(code(&out), 0);
    let bytes = out.stdout;
    let header = format!("P6\n{width} {width}\n255\n");
    assert!(bytes.starts_with(header.as_bytes()));
    let pixels = &bytes[header.len()..];
    assert_eq!(pixels.len(), width * width * 3);
    // hull of the gasket entry: center (1/2, √3/6), radius 0.6
    let (cx, cy, r) = (0.5, 3f64.sqrt() / 6.0, 0.6);
    let s = 2.0 * r / width as f64;
    let mut set = 0;
    for row in 0..width {
        for col in 0..width {
            if pixels[3 * (row * width + col)] != 0 {
                continue;
            }
            set += 1;
            let x = cx - r + (col as f64 + 0.5) * s;
            let y = cy + r - (row as f64 + 0.5) * s;
            assert!(in_triangle([x, y], s), "pixel ({col}, {row})");
        }
    }
    assert!(set > 1000, "only {set} pixels set");
}

#[test]
fn tent_branch_lists_the_fold_point() {
    let out = selfsim(&["branch", "tent"]);
    assert_eq!(code(&out), 1);
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["depth"], 10);
    let points = v["report"]["points"].as_array().unwrap();
    assert_eq!(points.len(), 1);
    assert_eq!(points[0]["x"][0].as_f64(), Some(0.5));
    assert_eq!(points[0]["y"][0].as_f64(), Some(1.0));
}

#[test]
fn cantor_branch_is_empty() {
    let out = selfsim(&["branch", "cantor"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["report"]["cardinality"]["kind"], "empty");
}

#[test]
fn carpet_modified_branch_is_infinite() {
    let out = selfsim(&["branch", "carpet-modified", "--depth", "6"]);
    assert_eq!(code(&out), 1);
    assert_eq!(
        json(&out)["report"]["cardinality"]["kind"],
        "infinite-at-resolution"
    );
}

#[test]
fn tent_osc_holds_with_unit_interval() {
    let dir = TempDir::new().unwrap();
    let v = write(dir.path(), "v.json", r#"{"kind": "box", "lo": [0.0], "hi": [1.0]}"#);
    let out = selfsim(&["check", "tent", "--condition", "osc", "--witness", &v]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["report"]["verdict"], "holds");
}

#[test]
fn tent_modified_strong_fails_at_one_half() {
    let out = selfsim(&["check", "tent-modified", "--condition", "strong"]);
    assert_eq!(code(&out), 1);
    let v = json(&out);
    assert_eq!(v["report"]["verdict"], "fails");
    let x = v["report"]["witness"]["x"][0].as_f64().unwrap();
    assert!((x - 0.5).abs() <= 1e-9);
}

#[test]
fn osc_without_witness_is_undetermined_off_registry() {
    let dir = TempDir::new().unwrap();
    let sys = write(dir.path(), "sys.json", NON_REGISTRY);
    let out = selfsim(&["check", &sys, "--condition", "osc"]);
    assert_eq!(code(&out), 3);
    assert_eq!(json(&out)["report"]["verdict"], "undetermined");
}

#[test]
fn file_matching_registry_uses_stored_witness() {
    let dir = TempDir::new().unwrap();
    let reg = selfsim(&["registry"]);
    let v: Value = serde_json::from_slice(&reg.stdout).unwrap();
    let tent = v["entries"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["name"] == "tent")
        .unwrap();
    let sys = write(dir.path(), "tent.json", &tent["system"].to_string());
    let out = selfsim(&["check", &sys, "--condition", "osc"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn invalid_input_exits_two() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"dimension": 1}"#);
    assert_eq!(code(&selfsim(&["branch", &bad])), 2);
    assert_eq!(code(&selfsim(&["branch", "no-such-system-or-file"])), 2);
    let expanding = NON_REGISTRY.replace("0.4]]", "1.5]]");
    let exp = write(dir.path(), "exp.json", &expanding);
    assert_eq!(code(&selfsim(&["render", &exp])), 2);
}

#[test]
fn classify_echoes_registry_metadata() {
    let out = selfsim(&["classify", "carpet-modified", "--depth", "6"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let meta: Vec<&str> = v["report"]["metadata"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m.as_str().unwrap())
        .collect();
    assert!(meta.contains(&"not isomorphic to O_8"));
    assert_eq!(v["config"]["witness"], "registry");
}

#[test]
fn registry_suite_passes() {
    let out = selfsim(&["verify", "registry"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert_eq!(v["report"]["pass"], true);
    assert_eq!(v["report"]["registry"]["rows"].as_array().unwrap().len(), 10);
}

#[test]
fn registry_command_matches_shipped_file() {
    let out = selfsim(&["registry"]);
    assert_eq!(code(&out), 0);
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/registry.json");
    assert_eq!(out.stdout, fs::read(shipped).unwrap());
}
