use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use heisgs_cli::HgfFile;
use serde_json::Value;

fn heisgs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heisgs"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn without_timestamp(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.contains("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn synth(dir: &Path, family: &str, seed: u64) -> Vec<String> {
    let out = heisgs(
        dir,
        &[
            "synth",
            "--family",
            family,
            "--seed",
            &seed.to_string(),
            "--out-dir",
            family,
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

fn classify(dir: &Path, inputs: &[String], report: &str) -> (i32, Value) {
    let mut args = vec!["classify", "--report", report, "--inputs"];
    args.extend(inputs.iter().map(String::as_str));
    let out = heisgs(dir, &args);
    let c = code(&out);
    let v = if c == 0 {
        json(&dir.join(report))
    } else {
        Value::Null
    };
    (c, v)
}

#[test]
fn calculus_check_passes_and_lists_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = heisgs(dir.path(), &["calculus-check"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.len() >= 5);
    assert!(checks
        .iter()
        .all(|c| c["passed"] == Value::Bool(true) && c["defect"].is_number()));
    assert_eq!(v["passed"], Value::Bool(true));
}

#[test]
fn calculus_check_catches_a_flipped_y() {
    let dir = tempfile::tempdir().unwrap();
    let out = heisgs(
        dir.path(),
        &["calculus-check", "--flip-y", "--report", "c.json"],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("commutator"), "{}", stderr(&out));
    let v = json(&dir.path().join("c.json"));
    let comm = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "commutator")
        .unwrap();
    assert_eq!(comm["passed"], Value::Bool(false));
}

#[test]
fn critical_and_invalid_parameters_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["solve", "--p", "3", "--out", "u.hgf", "--report", "r.json"],
        vec!["solve", "--p", "1"],
        vec!["solve", "--radius", "0"],
        vec!["solve", "--grid", "7"],
        vec!["exhaust", "--radii", "3,2"],
        vec!["solve", "--method", "nehari"],
    ] {
        let out = heisgs(dir.path(), &args);
        assert_eq!(code(&out), 64, "{args:?}: {}", stderr(&out));
    }
    // rejected before anything is written
    assert!(!dir.path().join("u.hgf").exists() && !dir.path().join("r.json").exists());
}

#[test]
fn config_file_is_flat_and_strict() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"p": 2.0, "nodes_per_axis": 20}"#,
    )
    .unwrap();
    assert_eq!(
        code(&heisgs(dir.path(), &["--config", "bad.json", "solve"])),
        64
    );
    assert_eq!(
        code(&heisgs(dir.path(), &["--config", "missing.json", "solve"])),
        66
    );
    std::fs::write(dir.path().join("crit.json"), r#"{"p": 3.5}"#).unwrap();
    assert_eq!(
        code(&heisgs(dir.path(), &["--config", "crit.json", "solve"])),
        64
    );
    std::fs::write(
        dir.path().join("ok.json"),
        r#"{"method": "constrained-min", "radius": 3, "grid": 16, "grad_tol": 1e-8, "report": "r.json"}"#,
    )
    .unwrap();
    // flags override the file
    let out = heisgs(
        dir.path(),
        &["--config", "ok.json", "solve", "--grid", "18"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = json(&dir.path().join("r.json"));
    assert_eq!(v["config"]["grid"], Value::from(18));
    assert_eq!(v["config"]["radius"], Value::from(3.0));
    assert_eq!(v["solve"]["method"], Value::from("constrained-min"));
}

#[test]
fn constrained_solve_on_the_reference_ball() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "solve",
        "--method",
        "constrained-min",
        "--p",
        "2",
        "--radius",
        "6",
        "--grid",
        "48",
        "--out",
        "u.hgf",
        "--report",
        "r.json",
    ];
    let out = heisgs(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = dir.path().join("r.json");
    let v = json(&report);
    assert!(v["solve"]["level"].as_f64().unwrap() > 0.0);
    assert!(v["constraint_defect"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["solve"]["converged"], Value::Bool(true));

    let field = HgfFile::read(&dir.path().join("u.hgf")).unwrap();
    assert_eq!(field.header.extents, [48, 48, 48]);
    assert_eq!(field.header.ball_radius, Some(6.0));
    assert_eq!(field.header.p, Some(2.0));
    assert!(field.field.values().iter().any(|v| *v > 0.0));

    let first = without_timestamp(&report);
    let hgf = std::fs::read(dir.path().join("u.hgf")).unwrap();
    assert_eq!(code(&heisgs(dir.path(), &args)), 0);
    assert_eq!(without_timestamp(&report), first);
    assert_eq!(std::fs::read(dir.path().join("u.hgf")).unwrap(), hgf);
}

#[test]
fn non_convergence_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = heisgs(
        dir.path(),
        &[
            "solve",
            "--radius",
            "3",
            "--grid",
            "16",
            "--max-iters",
            "2",
            "--out",
            "u.hgf",
            "--report",
            "r.json",
        ],
    );
    assert_eq!(code(&out), 2);
    assert_eq!(
        json(&dir.path().join("r.json"))["solve"]["converged"],
        Value::Bool(false)
    );
    assert!(HgfFile::read(&dir.path().join("u.hgf")).is_ok());
}

#[test]
fn exhaust_writes_plot_ready_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = heisgs(
        dir.path(),
        &[
            "exhaust", "--radii", "2,2.5,3", "--grid", "20", "--jobs", "2", "--csv", "e.csv",
            "--report", "e.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,c_k,max_value,xi_gauge,delta,r2");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for w in rows.windows(2) {
        assert!(w[1][1] <= w[0][1] * (1.0 + 1e-6), "{w:?}");
    }
    assert!(rows.iter().all(|r| r[2] >= 0.95 && r[4] > 0.0));
    // 17 significant digits
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .all(|c| c.split('e').next().unwrap().len() == 18));
    let v = json(&dir.path().join("e.json"));
    assert_eq!(v["monotone"], Value::Bool(true));
    assert_eq!(v["passed"], Value::Bool(true));
}

#[test]
fn exhaust_failure_leaves_a_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = heisgs(
        dir.path(),
        &[
            "exhaust",
            "--radii",
            "2,3",
            "--grid",
            "16",
            "--max-iters",
            "1",
            "--csv",
            "e.csv",
            "--report",
            "e.json",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(std::fs::read_to_string(dir.path().join("e.csv"))
        .unwrap()
        .starts_with("k,c_k,"));
}

#[test]
fn classify_synthetic_sequences() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let vanishing = synth(d, "flattening", 2);
    let (c, v) = classify(d, &vanishing, "v.json");
    assert_eq!(c, 0);
    assert_eq!(v["verdict"], "vanishing");

    let pair = synth(d, "separating", 4);
    let split = HgfFile::read(&d.join(&pair[0])).unwrap().header.metadata["split"]
        .as_f64()
        .unwrap();
    let out = heisgs(
        d,
        &[
            "classify",
            "--report",
            "s.json",
            "--profiles",
            "s.csv",
            "--eps",
            "0.1",
            "--q",
            "2",
            "--inputs",
            &pair[0],
            &pair[1],
            &pair[2],
            &pair[3],
            &pair[4],
            &pair[5],
            &pair[6],
            &pair[7],
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = json(&d.join("s.json"));
    assert_eq!(v["verdict"], "dichotomy");
    let alpha = v["result"]["alpha"].as_f64().unwrap();
    assert!(
        (alpha - split.max(1.0 - split)).abs() < 0.1,
        "{alpha} vs {split}"
    );
    assert!((alpha - 0.5).abs() < 0.25);
    let profiles = std::fs::read_to_string(d.join("s.csv")).unwrap();
    assert_eq!(
        profiles.lines().next().unwrap(),
        "element,r,mass,center_x,center_y,center_t"
    );
    assert_eq!(profiles.lines().count(), 1 + 8 * 5);

    let bump = synth(d, "translating", 0);
    let same = vec![bump[0].clone(), bump[0].clone(), bump[0].clone()];
    let (c, v) = classify(d, &same, "c.json");
    assert_eq!(c, 0);
    assert_eq!(v["verdict"], "compactness");

    // neither spreading monotonically nor concentrating
    let mixed = vec![
        vanishing[3].clone(),
        vanishing[1].clone(),
        vanishing[3].clone(),
    ];
    let (c, v) = classify(d, &mixed, "m.json");
    assert_eq!(c, 0);
    assert_eq!(v["verdict"], "inconclusive");
}

#[test]
fn classify_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let seq = synth(d, "translating", 1);
    let (c, _) = classify(d, &seq[..2], "r.json");
    assert_eq!(c, 64);
    let (c, _) = classify(
        d,
        &[seq[0].clone(), seq[1].clone(), "nope.hgf".into()],
        "r.json",
    );
    assert_eq!(c, 66);
    let junk = PathBuf::from("junk.hgf");
    std::fs::write(d.join(&junk), b"HGF1\x02\x00\x00\x00{}").unwrap();
    let (c, _) = classify(
        d,
        &[seq[0].clone(), seq[1].clone(), junk.display().to_string()],
        "r.json",
    );
    assert_eq!(c, 66);
}

#[test]
fn synthetic_files_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let files = synth(dir.path(), "separating", 0);
    let path = dir.path().join(&files[2]);
    let bytes = std::fs::read(&path).unwrap();
    let f = HgfFile::read(&path).unwrap();
    assert_eq!(f.encode().unwrap(), bytes);
    assert_eq!(f.header.metadata["family"], "separating");
}
