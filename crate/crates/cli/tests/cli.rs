use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use adiag::fieldfile::FieldFile;
use adiag::report::ReportFile;
use adiag_core::field::{FieldTag, MatrixField};
use adiag_core::mesh::{build_mesh, MeshKind};
use adiag_core::numlin::CMatrix;
use serde_json::Value;

fn adiag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adiag"))
        .args(args)
        .env_remove("ADIAG_SEED")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

fn path(dir: &tempfile::TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn constant_model_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(&dir, "r.json");
    let o = adiag(&["diagonalize", "--model", "constant", "--eps", "0.1", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out);
    assert_eq!(r["status"], "success");
    assert!(r["unitary"].is_null());
}

#[test]
fn berry_sphere_is_obstructed_with_opposite_chern_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(&dir, "r.json");
    let o = adiag(&[
        "diagonalize",
        "--model",
        "berry-sphere",
        "--eps",
        "0.1",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 2);
    let r = read_json(&out);
    assert_eq!(r["status"], "obstructed");
    let mut c: Vec<i64> = r["obstruction"]["chern_numbers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_i64().unwrap())
        .collect();
    assert_eq!(c, vec![1, -1], "listed upper band first");
    c.sort();
    assert_eq!(c, vec![-1, 1]);
}

#[test]
fn malformed_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = path(&dir, "bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&adiag(&["diagonalize", s(&bad)])), 1);
    assert_eq!(code(&adiag(&["diagonalize", s(&path(&dir, "missing.json"))])), 1);
    assert_eq!(code(&adiag(&["diagonalize"])), 1);
    assert_eq!(code(&adiag(&["diagonalize", "--model", "no-such-model"])), 1);
    assert_eq!(
        code(&adiag(&["diagonalize", "--model", "berry-sphere", "--mesh", "circle"])),
        1
    );
    assert_eq!(code(&adiag(&["demo", "no-such-demo"])), 1);
    assert_eq!(code(&adiag(&["--help"])), 0);
}

#[test]
fn obstruction_detectors() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(&dir, "o.json");
    let o = adiag(&[
        "obstruction",
        "--model",
        "winding-unitary",
        "--k",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    let r = read_json(&out);
    assert_eq!(r["kind"], "obstruction");
    assert_eq!(r["obstruction"]["winding_numbers"], serde_json::json!([1]));

    let o = adiag(&["obstruction", "--model", "berry-sphere", "--N", "16", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        read_json(&out)["obstruction"]["chern_numbers"],
        serde_json::json!([1, -1])
    );

    let o = adiag(&["obstruction", "--model", "constant", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let r = read_json(&out);
    assert!(r["obstruction"]["chern_numbers"]
        .as_array()
        .unwrap()
        .iter()
        .all(|v| v == 0));
    assert!(r["obstruction"]["winding_numbers"]
        .as_array()
        .unwrap()
        .iter()
        .all(|v| v == 0));
}

/// Field whose eigenvectors swap between neighbouring nodes.
fn flipping_field(dir: &tempfile::TempDir) -> PathBuf {
    let mesh = Arc::new(build_mesh(MeshKind::Circle, 8).unwrap());
    let f = MatrixField::from_fn(mesh.clone(), FieldTag::Hermitian, |p| {
        let s = if p[0] > 0.0 { 1.0 } else { -1.0 };
        CMatrix::from_real_diag(&[s, -s])
    })
    .unwrap();
    let p = path(dir, "flip.json");
    std::fs::write(&p, FieldFile::from_field(&f).to_bytes().unwrap()).unwrap();
    p
}

#[test]
fn unresolved_bundles_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let field = flipping_field(&dir);
    let out = path(&dir, "r.json");
    let o = adiag(&["diagonalize", s(&field), "--out", s(&out)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&out)["status"], "unresolved");
    assert_eq!(code(&adiag(&["obstruction", s(&field)])), 3);
}

#[test]
fn verify_accepts_matched_pairs_and_catches_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let field = path(&dir, "field.json");
    let report = path(&dir, "r.json");
    let o = adiag(&[
        "diagonalize",
        "--model",
        "random-smooth",
        "--mesh",
        "circle",
        "--N",
        "32",
        "--write-field",
        s(&field),
        "--emit-unitary",
        "--out",
        s(&report),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&adiag(&["verify", s(&field), s(&report)])), 0);

    let mut r = read_json(&report);
    let entry = &mut r["unitary"][3][0][0];
    *entry = serde_json::json!(entry.as_f64().unwrap() + 0.1);
    let tampered = path(&dir, "tampered.json");
    std::fs::write(&tampered, serde_json::to_vec(&r).unwrap()).unwrap();
    assert_eq!(code(&adiag(&["verify", s(&field), s(&tampered)])), 4);

    let mut r = read_json(&report);
    r["unitary"] = Value::Null;
    let stripped = path(&dir, "stripped.json");
    std::fs::write(&stripped, serde_json::to_vec(&r).unwrap()).unwrap();
    let o = adiag(&["verify", s(&field), s(&stripped)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no unitary"));
}

#[test]
fn identical_runs_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(&dir, "a.json"), path(&dir, "b.json"));
    for out in [&a, &b] {
        let o = adiag(&[
            "diagonalize",
            "--model",
            "random-smooth",
            "--n",
            "4",
            "--emit-unitary",
            "--out",
            s(out),
        ]);
        assert_eq!(code(&o), 0);
    }
    let ra = ReportFile::parse(&std::fs::read(&a).unwrap()).unwrap().without_timing();
    let rb = ReportFile::parse(&std::fs::read(&b).unwrap()).unwrap().without_timing();
    assert_eq!(ra.to_bytes().unwrap(), rb.to_bytes().unwrap());
}

#[test]
fn samples_file_reproduces_the_generator_run() {
    let dir = tempfile::tempdir().unwrap();
    let field = path(&dir, "field.json");
    let (a, b) = (path(&dir, "a.json"), path(&dir, "b.json"));
    let o = adiag(&[
        "diagonalize",
        "--model",
        "random-smooth",
        "--mesh",
        "square",
        "--N",
        "9",
        "--write-field",
        s(&field),
        "--out",
        s(&a),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&adiag(&["diagonalize", s(&field), "--out", s(&b)])), 0);
    let strip = |p: &Path| {
        let mut r = ReportFile::parse(&std::fs::read(p).unwrap()).unwrap().without_timing();
        r.input.digest.clear();
        r.to_bytes().unwrap()
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(&dir, "a.json"), path(&dir, "b.json"));
    let o = Command::new(env!("CARGO_BIN_EXE_adiag"))
        .args(["diagonalize", "--model", "random-smooth", "--out", s(&a)])
        .env("ADIAG_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(
        code(&adiag(&[
            "diagonalize",
            "--model",
            "random-smooth",
            "--seed",
            "7",
            "--out",
            s(&b)
        ])),
        0
    );
    let load = |p: &Path| ReportFile::parse(&std::fs::read(p).unwrap()).unwrap().without_timing();
    assert_eq!(load(&a), load(&b));
    let default = path(&dir, "c.json");
    assert_eq!(
        code(&adiag(&[
            "diagonalize",
            "--model",
            "random-smooth",
            "--out",
            s(&default)
        ])),
        0
    );
    assert_ne!(load(&a).input.digest, load(&default).input.digest);
}

#[test]
fn plots_and_csv_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let svg = path(&dir, "svg");
    let csv = path(&dir, "l.csv");
    let o = adiag(&[
        "diagonalize",
        "--model",
        "two-by-two",
        "--eps",
        "0.05",
        "--svg",
        s(&svg),
        "--csv",
        s(&csv),
        "--out",
        s(&path(&dir, "r.json")),
    ]);
    assert_eq!(code(&o), 0);
    assert!(std::fs::read_to_string(svg.join("eigenvalues.svg"))
        .unwrap()
        .contains("<polyline"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 102);
    assert!(text.starts_with("node,x,y,z,lambda_1,lambda_2"));

    let o = adiag(&[
        "diagonalize",
        "--model",
        "berry-sphere",
        "--N",
        "8",
        "--svg",
        s(&svg),
        "--out",
        s(&path(&dir, "b.json")),
    ]);
    assert_eq!(code(&o), 2);
    assert!(svg.join("curvature-band0.svg").exists());
    assert!(svg.join("curvature-band1.svg").exists());
}

#[test]
fn demos_write_outputs_and_follow_the_exit_contract() {
    let dir = tempfile::tempdir().unwrap();
    for (name, expected) in [("two-by-two", 0), ("berry-sphere", 2), ("winding-unitary", 2)] {
        let o = adiag(&["demo", name, "--out-dir", s(dir.path())]);
        assert_eq!(code(&o), expected, "{name}");
        let text = String::from_utf8_lossy(&o.stdout);
        match name {
            "two-by-two" => assert!(text.contains("residual")),
            "berry-sphere" => assert!(text.contains("(-1, +1)")),
            _ => assert!(text.contains("det winding           [1]")),
        }
        let field = dir.path().join(name).join("field.json");
        let report = dir.path().join(name).join("report.json");
        assert!(field.exists() && report.exists());
        if expected == 0 {
            assert_eq!(code(&adiag(&["verify", s(&field), s(&report)])), 0);
        }
    }
}
