use std::path::Path;

use westervelt::experiment::{export_plots_data, read_measurements_csv, run_case, ExperimentConfig, RunOptions};
use westervelt::inversion::StopReason;
use westervelt::Error;

fn small_config() -> ExperimentConfig {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/case1-noise.cfg")).unwrap();
    let mut cfg = ExperimentConfig::from_toml(&text).unwrap();
    cfg.mesh.h = 0.03;
    cfg.newton.max_iters = 3;
    cfg.newton.stopping = westervelt::inversion::Stopping::FixedCount;
    cfg
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let run = |name: &str, seed: u64| {
        let options = RunOptions { out: Some(dir.path().join(name)), seed: Some(seed), ..Default::default() };
        run_case(&cfg, &options).unwrap()
    };
    let a = run("a", 11);
    let b = run("b", 11);
    let c = run("c", 12);
    let read = |name: &str, file: &str| std::fs::read(dir.path().join(name).join(file)).unwrap();
    assert_eq!(read("a", "measurements_noisy.csv"), read("b", "measurements_noisy.csv"));
    assert_eq!(read("a", "reconstruction.csv"), read("b", "reconstruction.csv"));
    assert_ne!(read("a", "measurements_noisy.csv"), read("c", "measurements_noisy.csv"));
    assert_eq!(read("a", "measurements.csv"), read("c", "measurements.csv"));
    assert_eq!(a.history.records.len(), 3);
    assert_eq!(a.history.stop, StopReason::MaxIters);
    assert_eq!(a.reconstruction, b.reconstruction);
    assert_ne!(a.reconstruction, c.reconstruction);

    for file in ["config.toml", "admissibility.csv", "admissibility.txt", "mesh.txt", "truth.csv", "convergence.csv", "manifest.toml"] {
        assert!(dir.path().join("a").join(file).is_file(), "{file} missing");
    }
    assert!(dir.path().join("a/snapshots/iter_003.csv").is_file());

    let omegas: Vec<f64> = cfg.excitations.iter().map(|e| e.omega()).collect();
    let meas = read_measurements_csv(&String::from_utf8(read("a", "measurements.csv")).unwrap(), &omegas).unwrap();
    assert_eq!(meas.experiments.len(), 3);
    assert_eq!(meas.experiments[0].values.len(), cfg.forward.order + 1);

    let written = export_plots_data(&dir.path().join("a"), Some(&dir.path().join("b")), 21).unwrap();
    assert_eq!(written.len(), 4);
    let j = std::fs::read_to_string(&written[0]).unwrap();
    assert!(j.starts_with("iter,J_nonlinear,J_linear\n"));
    assert_eq!(j.lines().count(), 4);
}

#[test]
fn inadmissible_sources_stop_before_the_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg.excitations[1].period = cfg.excitations[0].period;
    let options = RunOptions { out: Some(dir.path().to_path_buf()), ..Default::default() };
    match run_case(&cfg, &options) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "admissibility"),
        other => panic!("expected an admissibility failure, got {:?}", other.map(|o| o.summary)),
    }
    assert!(dir.path().join("admissibility.csv").is_file());
    assert!(!dir.path().join("mesh.txt").exists());

    let forced = RunOptions { override_admissibility: true, ..options };
    let out = run_case(&cfg, &forced).unwrap();
    assert!(!out.summary.admissible);
}

#[test]
fn linear_runs_keep_eta_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg.linear = true;
    cfg.noise.level = 0.0;
    let out = run_case(&cfg, &RunOptions { out: Some(dir.path().to_path_buf()), ..Default::default() }).unwrap();
    assert!(out.truth.eta.iter().all(|v| *v == 0.0));
    assert!(out.reconstruction.eta.iter().all(|v| *v == 0.0));
    assert!(out.reconstruction.s.iter().any(|v| *v != out.x0.s[0]));
}
