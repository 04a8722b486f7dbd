use std::path::Path;
use std::process::{Command, Output};

fn asm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asm"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

const RIDGE: &str = r#"{"model": {"kind": "ridge", "direction": [0.7, 0.3, 0, 0, 0, 0]}, "M": 25, "n": 1, "N": 2}"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ridge.json"), RIDGE).unwrap();
    dir
}

#[test]
fn default_config_parses() {
    let dir = tempfile::tempdir().unwrap();
    let out = asm(&["default-config"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["gradient_samples"], 300);
}

#[test]
fn staged_commands_match_the_pipeline() {
    let dir = setup();
    let p = dir.path();
    for args in [
        vec!["sample", "--config", "ridge.json", "--out", "samples.csv"],
        vec!["subspace", "--samples", "samples.csv", "--n", "1", "--out", "subspace.json"],
        vec!["design", "--config", "ridge.json", "--subspace", "subspace.json", "--out", "design.csv"],
        vec![
            "fit", "--config", "ridge.json", "--subspace", "subspace.json", "--samples", "samples.csv", "--design",
            "design.csv", "--out", "fit",
        ],
        vec!["pipeline", "--config", "ridge.json", "--out", "run"],
    ] {
        let out = asm(&args, p);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["samples.csv", "subspace.json", "design.csv", "training.csv", "model.json"] {
        let staged = if name == "training.csv" || name == "model.json" {
            p.join("fit").join(name)
        } else {
            p.join(name)
        };
        assert_eq!(
            std::fs::read(staged).unwrap(),
            std::fs::read(p.join("run").join(name)).unwrap(),
            "{name}"
        );
    }
    for name in ["errors.csv", "report.json", "histogram.csv"] {
        assert!(p.join("run").join(name).exists());
    }

    std::fs::write(p.join("y.csv"), "y1\n0.0\n1.5\n").unwrap();
    let out = asm(&["predict", "--model", "run/model.json", "--points", "y.csv"], p);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);

    std::fs::write(p.join("x.csv"), "a,b,c,d,e,f\n0.1,0.2,0,0,0,0\n").unwrap();
    let out = asm(
        &["predict", "--model", "run/model.json", "--points", "x.csv", "--subspace", "run/subspace.json"],
        p,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn comparison_and_perturbation_outputs() {
    let dir = setup();
    let p = dir.path();
    let out = asm(&["compare", "--config", "ridge.json", "--out", "cmp"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["comparison.json", "errors_local_sensitivity.csv", "errors_full_space.csv", "errors_asm_fresh.csv"] {
        assert!(p.join("cmp").join(name).exists(), "{name}");
    }
    let out = asm(&["perturb-study", "--config", "ridge.json", "--epsilons", "0,0.1", "--out", "pert"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(p.join("pert").join("perturbation.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn exit_codes() {
    let dir = setup();
    let p = dir.path();
    std::fs::write(p.join("typo.json"), r#"{"gradient_sample": 3}"#).unwrap();
    assert_eq!(asm(&["pipeline", "--config", "typo.json"], p).status.code(), Some(2));
    assert_eq!(asm(&["pipeline", "--config", "missing.json"], p).status.code(), Some(2));
    std::fs::write(p.join("badn.json"), r#"{"model": {"kind": "ridge", "direction": [1, 0]}, "n": 2}"#).unwrap();
    assert_eq!(asm(&["pipeline", "--config", "badn.json"], p).status.code(), Some(2));
    std::fs::write(
        p.join("overflow.json"),
        r#"{"model": {"kind": "ridge", "direction": [800, 0, 0]}, "M": 10}"#,
    )
    .unwrap();
    let out = asm(&["pipeline", "--config", "overflow.json"], p);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(asm(&["pipeline"], p).status.code(), Some(2));
}
