use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn levy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fresh_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn manifest(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn empty_scenario_list_writes_nothing() {
    let out = fresh_dir("empty");
    let o = levy(&[
        "verify",
        &manifest("tests/fixtures/empty.json"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(!out.exists());
}

#[test]
fn cauchy_density_matches_the_oracle_and_reruns_identically() {
    let out = fresh_dir("cauchy");
    let args = [
        "density",
        &manifest("scenarios/density_cauchy.json"),
        "--out",
        out.to_str().unwrap(),
    ];
    let o = levy(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut reader = csv::Reader::from_path(out.join("cauchy_t1.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (x, value) = (col("x"), col("value"));
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let x: f64 = rec[x].parse().unwrap();
        let v: f64 = rec[value].parse().unwrap();
        let exact = 1.0 / (std::f64::consts::PI.powi(2) + x * x);
        assert!((v - exact).abs() < 1e-6, "x = {x}: {v} vs {exact}");
        assert!(x.abs() <= 10.0);
        rows += 1;
    }
    assert!(rows > 2000);
    assert!(headers.iter().any(|h| h == "guard_boundary_ratio"));

    let first = read_all(&out);
    assert!(levy(&args).status.success());
    assert_eq!(first, read_all(&out));
}

#[test]
fn density_from_flags() {
    let out = fresh_dir("flags");
    let o = levy(&[
        "density",
        "--alpha",
        "1",
        "--atoms",
        r#"[{"dir":[1],"w":1},{"dir":[-1],"w":1}]"#,
        "--N",
        "16384",
        "--L",
        "64",
        "--cauchy-oracle",
        "--r",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("density.json")).unwrap()).unwrap();
    let l2 = report["results"]["lr_norms"][0]["norm"].as_f64().unwrap();
    // ‖p‖₂² = 1 / (2π · π) for the Cauchy law with scale π
    assert!((l2 - (1.0 / (2.0 * std::f64::consts::PI.powi(2))).sqrt()).abs() < 1e-6);
}

#[test]
fn contraction_failure_exits_nonzero_with_a_diagnostic() {
    let out = fresh_dir("contraction");
    let o = levy(&[
        "neumann",
        &manifest("tests/fixtures/contraction_failure.json"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("contraction fails"), "{stderr}");
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("lambda_too_small.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    assert!(report["guards"]
        .as_array()
        .unwrap()
        .iter()
        .any(|g| g["name"] == "k_lambda"));
}

#[test]
fn schema_violations_name_the_field() {
    let dir = fresh_dir("schema");
    std::fs::create_dir_all(&dir).unwrap();
    let cases = [
        (r#"{"name": "x", "scenarios": [], "bogus": 1}"#, "bogus"),
        (
            r#"{"name": "x", "scenarios": [{"kind": "density", "name": "d", "t": -1, "window": 1,
                "lattice": {"n": 64, "half_extent": 8},
                "triple": {"alpha": 1, "atoms": [{"dir": [1], "w": 1}]}}]}"#,
            "t: must be positive",
        ),
        (
            r#"{"name": "x", "scenarios": [{"kind": "density", "name": "d", "t": 1, "window": 1,
                "lattice": {"n": 60, "half_extent": 8},
                "triple": {"alpha": 1, "atoms": [{"dir": [1], "w": 1}]}}]}"#,
            "power of two",
        ),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let path = dir.join(format!("case{i}.json"));
        std::fs::write(&path, text).unwrap();
        let o = levy(&[
            "verify",
            path.to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(2));
        let stderr = String::from_utf8_lossy(&o.stderr);
        assert!(stderr.contains(needle), "case {i}: {stderr}");
    }
}

#[test]
fn subcommands_reject_other_kinds() {
    let o = levy(&["mollify", &manifest("scenarios/density_cauchy.json")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("use `density` or `verify`"));
}
