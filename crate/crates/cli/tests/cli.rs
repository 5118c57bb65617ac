use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eraser_core::entanglement::{concurrence, EntanglementReport};
use eraser_core::measurement::{expected_counts, records_to_json, standard_tomography_set};
use eraser_core::qstate::{bell_phi_plus, DensityMatrix};
use eraser_core::spdc::{rho_from_coherence, CoherenceFactor};
use serde_json::Value;
use tempfile::TempDir;

fn eraser(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eraser"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = eraser(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(args: &[&str]) -> i32 {
    eraser(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn report(path: PathBuf) -> EntanglementReport {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_rho(dir: &Path, name: &str, rho: &DensityMatrix) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, rho.to_json()).unwrap();
    path
}

fn rho_c(c: f64) -> DensityMatrix {
    rho_from_coherence(CoherenceFactor::real(c).unwrap())
}

#[test]
fn predict_catalogued_narrow_filter() {
    let dir = TempDir::new().unwrap();
    ok(&["predict", "--bandwidth", "1.2", "--out", p(dir.path())]);
    let r = report(dir.path().join("report.json"));
    assert!((r.concurrence - 0.99).abs() < 0.005);
    let c = json(dir.path().join("coherence.json"));
    assert!((c["magnitude"].as_f64().unwrap() - 0.99).abs() < 1e-9);
    DensityMatrix::from_json(&fs::read_to_string(dir.path().join("rho.json")).unwrap()).unwrap();
}

#[test]
fn predict_explicit_width() {
    let dir = TempDir::new().unwrap();
    ok(&[
        "predict",
        "--sigma-t",
        "73.5",
        "--tau",
        "100",
        "--out",
        p(dir.path()),
    ]);
    let c = json(dir.path().join("coherence.json"))["magnitude"]
        .as_f64()
        .unwrap();
    let expected = (-100f64.powi(2) / (4.0 * 73.5f64.powi(2))).exp();
    assert!((c - expected).abs() < 1e-12);
    assert!((c - 0.63).abs() < 0.005);

    let dir = TempDir::new().unwrap();
    ok(&[
        "predict",
        "--tau",
        "0",
        "--sigma-t",
        "50",
        "--out",
        p(dir.path()),
    ]);
    let c = json(dir.path().join("coherence.json"))["magnitude"]
        .as_f64()
        .unwrap();
    assert_eq!(c, 1.0);
}

#[test]
fn predict_from_scenario_file() {
    let dir = TempDir::new().unwrap();
    let scenario = dir.path().join("scenario.json");
    fs::write(&scenario, r#"{"bandwidth_nm": 8.0}"#).unwrap();
    ok(&[
        "predict",
        "--scenario",
        p(&scenario),
        "--out",
        p(dir.path()),
    ]);
    let r = report(dir.path().join("report.json"));
    assert!((r.concurrence - 0.63).abs() < 0.005);
}

#[test]
fn unknown_scenario_exits_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&["predict", "--bandwidth", "3.0", "--out", p(dir.path())]),
        2
    );
    assert_eq!(code(&["predict", "--out", p(dir.path())]), 2);
    assert_eq!(code(&["predict", "--scenario", "/nonexistent/s.json"]), 2);
    assert_eq!(
        code(&[
            "predict",
            "--bandwidth",
            "8",
            "--angles",
            "0,45,22.5",
            "--out",
            p(dir.path())
        ]),
        2
    );
}

#[test]
fn simulate_phi_plus_hh_record() {
    let dir = TempDir::new().unwrap();
    let rho = write_rho(dir.path(), "phi.json", &bell_phi_plus().density().unwrap());
    ok(&[
        "simulate",
        "--rho",
        p(&rho),
        "--exposure",
        "1e6",
        "--seed",
        "3",
        "--out",
        p(dir.path()),
    ]);
    let counts = json(dir.path().join("counts.json"));
    let records = counts.as_array().unwrap();
    assert_eq!(records.len(), 16);
    let hh = &records[0];
    assert_eq!(hh["alice"], "H");
    assert_eq!(hh["bob"], "H");
    // Poisson mean 5e5, standard deviation ≈ 707.
    let n = hh["coincidences"].as_f64().unwrap();
    assert!((n - 5e5).abs() < 5.0 * 707.2, "{n}");
}

#[test]
fn simulate_is_byte_identical_per_seed() {
    let dir = TempDir::new().unwrap();
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        ok(&[
            "simulate",
            "--bandwidth",
            "8.0",
            "--exposure",
            "10000",
            "--seed",
            seed,
            "--out",
            p(&out),
        ]);
        fs::read(out.join("counts.json")).unwrap()
    };
    let a = run("a", "42");
    let b = run("b", "42");
    let c = run("c", "43");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn simulate_preconditions_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = p(dir.path());
    assert_eq!(
        code(&[
            "simulate",
            "--bandwidth",
            "8",
            "--exposure",
            "100",
            "--out",
            out
        ]),
        2
    );
    assert_eq!(
        code(&[
            "simulate",
            "--bandwidth",
            "8",
            "--exposure",
            "0",
            "--seed",
            "1",
            "--out",
            out
        ]),
        2
    );
    assert_eq!(
        code(&[
            "simulate",
            "--bandwidth",
            "8",
            "--exposure",
            "-5",
            "--seed",
            "1",
            "--out",
            out
        ]),
        2
    );
    assert_eq!(
        code(&["simulate", "--bandwidth", "8", "--seed", "1", "--out", out]),
        2
    );
}

#[test]
fn reconstruct_rho_074_round_trip() {
    let dir = TempDir::new().unwrap();
    let rho = write_rho(dir.path(), "rho.json", &rho_c(0.74));
    ok(&[
        "simulate",
        "--rho",
        p(&rho),
        "--exposure",
        "1e4",
        "--seed",
        "11",
        "--out",
        p(dir.path()),
    ]);
    let counts = dir.path().join("counts.json");
    ok(&[
        "reconstruct",
        "--counts",
        p(&counts),
        "--out",
        p(dir.path()),
    ]);
    let mle =
        DensityMatrix::from_json(&fs::read_to_string(dir.path().join("rho_mle.json")).unwrap())
            .unwrap();
    assert!((concurrence(&mle) - 0.74).abs() < 0.05);

    let rep = json(dir.path().join("reconstruction.json"));
    for key in [
        "min_eigenvalue_raw",
        "raw_eigenvalues",
        "raw_legitimate",
        "objective",
        "converged",
    ] {
        assert!(rep.get(key).is_some(), "missing {key}");
    }
    assert!(rep["min_eigenvalue_raw"].is_f64());
    // The raw matrix is written even when it is not a legitimate state.
    let raw: Value = json(dir.path().join("rho_linear.json"));
    assert_eq!(raw["basis"], "HH,HV,VH,VV");
}

#[test]
fn reconstruct_noiseless_phi_plus() {
    let dir = TempDir::new().unwrap();
    let records = expected_counts(
        &bell_phi_plus().density().unwrap(),
        &standard_tomography_set(),
        1e6,
    )
    .unwrap();
    let counts = dir.path().join("counts.json");
    fs::write(&counts, records_to_json(&records)).unwrap();
    ok(&[
        "reconstruct",
        "--counts",
        p(&counts),
        "--out",
        p(dir.path()),
    ]);
    let mle =
        DensityMatrix::from_json(&fs::read_to_string(dir.path().join("rho_mle.json")).unwrap())
            .unwrap();
    assert!(mle.fidelity_pure(&bell_phi_plus()) >= 0.9999);
}

#[test]
fn reconstruct_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    ok(&[
        "simulate",
        "--bandwidth",
        "1.2",
        "--exposure",
        "500",
        "--seed",
        "5",
        "--out",
        p(dir.path()),
    ]);
    let counts = dir.path().join("counts.json");
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        ok(&[
            "reconstruct",
            "--counts",
            p(&counts),
            "--seed",
            "9",
            "--out",
            p(&out),
        ]);
        ["rho_linear.json", "rho_mle.json", "reconstruction.json"]
            .map(|f| fs::read(out.join(f)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn malformed_counts_exit_3() {
    let dir = TempDir::new().unwrap();
    let out = p(dir.path());
    let bad = dir.path().join("bad.json");
    for contents in [
        "not json",
        "[]",
        r#"[{"alice": "H", "bob": "Q", "coincidences": 1, "exposure": 10}]"#,
        r#"[{"alice": "H", "bob": "H", "coincidences": -1, "exposure": 10}]"#,
    ] {
        fs::write(&bad, contents).unwrap();
        assert_eq!(
            code(&["reconstruct", "--counts", p(&bad), "--out", out]),
            3,
            "{contents}"
        );
    }
    // Fifteen valid records are still one short.
    let records = expected_counts(&rho_c(0.5), &standard_tomography_set()[..15], 100.0).unwrap();
    fs::write(&bad, records_to_json(&records)).unwrap();
    assert_eq!(code(&["reconstruct", "--counts", p(&bad), "--out", out]), 3);
}

#[test]
fn analyze_violation_flags() {
    let dir = TempDir::new().unwrap();
    let hi = write_rho(dir.path(), "hi.json", &rho_c(0.74));
    ok(&[
        "analyze",
        "--rho",
        p(&hi),
        "--out",
        p(&dir.path().join("hi")),
    ]);
    let r = report(dir.path().join("hi/report.json"));
    assert!(r.violates_chsh);
    assert!((r.s_fixed - 2.0f64.sqrt() * 1.74).abs() < 1e-9);

    let lo = write_rho(dir.path(), "lo.json", &rho_c(0.21));
    ok(&[
        "analyze",
        "--rho",
        p(&lo),
        "--out",
        p(&dir.path().join("lo")),
    ]);
    let r = report(dir.path().join("lo/report.json"));
    assert!(!r.violates_chsh);
    assert!((r.s_fixed - 2.0f64.sqrt() * 1.21).abs() < 1e-9);
    assert!((r.s_max - 2.0 * (1.0f64 + 0.21 * 0.21).sqrt()).abs() < 1e-9);
}

#[test]
fn analyze_custom_angles() {
    let dir = TempDir::new().unwrap();
    let rho = write_rho(dir.path(), "rho.json", &rho_c(0.74));
    ok(&[
        "analyze",
        "--rho",
        p(&rho),
        "--angles",
        "0,90,0,90",
        "--out",
        p(dir.path()),
    ]);
    let r = report(dir.path().join("report.json"));
    // E(a,b) = cos 2(a−b) on the HH/VV axis for every C: S = 1 + 1 + 1 − 1.
    assert!((r.s_fixed - 2.0).abs() < 1e-9);
    assert!(!r.violates_chsh);
}

#[test]
fn phi_plus_fringes_match_closed_form() {
    let dir = TempDir::new().unwrap();
    let rho = write_rho(dir.path(), "phi.json", &bell_phi_plus().density().unwrap());
    ok(&["analyze", "--rho", p(&rho), "--out", p(dir.path())]);
    let csv = fs::read_to_string(dir.path().join("fringes.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "bob_angle_deg,rate_alice45,rate_alice135,E_alice45,E_alice135"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 37);
    for (i, row) in rows.iter().enumerate() {
        let b = row[0];
        assert_eq!(b, 5.0 * i as f64);
        let e45 = (2.0 * (45.0 - b)).to_radians().cos();
        let e135 = (2.0 * (135.0 - b)).to_radians().cos();
        assert!((row[3] - e45).abs() < 1e-9, "E45 at {b}");
        assert!((row[4] - e135).abs() < 1e-9, "E135 at {b}");
        // Φ+ coincidence probability for linear polarizers: cos²(a−b)/2.
        assert!((row[1] - (45.0 - b).to_radians().cos().powi(2) / 2.0).abs() < 1e-12);
        assert!((row[2] - (135.0 - b).to_radians().cos().powi(2) / 2.0).abs() < 1e-12);
    }
}

#[test]
fn invalid_matrix_exits_3() {
    let dir = TempDir::new().unwrap();
    let out = p(dir.path());
    let bad = dir.path().join("bad.json");
    let mut doc: Value = serde_json::from_str(&rho_c(0.5).to_json()).unwrap();
    doc["re"][0][0] = Value::from(0.9);
    fs::write(&bad, doc.to_string()).unwrap();
    assert_eq!(code(&["analyze", "--rho", p(&bad), "--out", out]), 3);

    let mut doc: Value = serde_json::from_str(&rho_c(0.5).to_json()).unwrap();
    doc["im"][0][3] = Value::from(0.2);
    fs::write(&bad, doc.to_string()).unwrap();
    assert_eq!(code(&["analyze", "--rho", p(&bad), "--out", out]), 3);

    fs::write(&bad, "{\"basis\": \"HH\"}").unwrap();
    assert_eq!(code(&["analyze", "--rho", p(&bad), "--out", out]), 3);
    assert_eq!(
        code(&[
            "simulate",
            "--rho",
            p(&bad),
            "--exposure",
            "1",
            "--seed",
            "1",
            "--out",
            out
        ]),
        3
    );
}

#[test]
fn end_to_end_pipeline_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let run = |sub: &str| {
        let d = dir.path().join(sub);
        ok(&["predict", "--bandwidth", "8.0", "--out", p(&d)]);
        ok(&[
            "simulate",
            "--rho",
            p(&d.join("rho.json")),
            "--exposure",
            "2000",
            "--seed",
            "1",
            "--out",
            p(&d),
        ]);
        ok(&[
            "reconstruct",
            "--counts",
            p(&d.join("counts.json")),
            "--out",
            p(&d),
        ]);
        ok(&[
            "analyze",
            "--rho",
            p(&d.join("rho_mle.json")),
            "--out",
            p(&d.join("analysis")),
        ]);
        [
            "coherence.json",
            "rho.json",
            "report.json",
            "counts.json",
            "rho_linear.json",
            "rho_mle.json",
            "reconstruction.json",
            "analysis/report.json",
            "analysis/fringes.csv",
        ]
        .iter()
        .map(|f| fs::read(d.join(f)).unwrap())
        .collect::<Vec<_>>()
    };
    assert_eq!(run("a"), run("b"));
}
