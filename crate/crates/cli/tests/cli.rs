use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_westervelt"));
    c.env("RUST_LOG", "warn");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn admissibility_and_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["admissibility", "--config"])
        .arg(config("case1.cfg"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS"), "{text}");
    let csv = std::fs::read_to_string(dir.path().join("admissibility.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);

    let out = bin().args(["mesh", "--config"]).arg(config("case1.cfg")).arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("nodes:"));
    assert!(dir.path().join("mesh.txt").is_file());
}

#[test]
fn inadmissible_sources_exit_with_code_12() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("case1.cfg")).unwrap().replace("period = 0.035", "period = 0.05");
    let path = dir.path().join("degenerate.cfg");
    std::fs::write(&path, text).unwrap();
    let out = bin().args(["admissibility", "--config"]).arg(&path).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(12));
    let out = bin().args(["run-case", "--config"]).arg(&path).arg("--out").arg(dir.path().join("run")).output().unwrap();
    assert_eq!(out.status.code(), Some(12));
}

#[test]
fn verify_suite_reports_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify", "--suite", "adjoint", "--h", "0.05", "--config"])
        .arg(config("case1.cfg"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let value: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("adjoint_max_relative: "))
        .expect("adjoint key")
        .parse()
        .unwrap();
    assert!(value <= 1e-10);
    assert!(!text.contains("taylor_slope"));
}

#[test]
fn bad_configuration_exits_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "name = \"x\"\nunknown_key = 3\n").unwrap();
    let out = bin().args(["mesh", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("error"));
}
