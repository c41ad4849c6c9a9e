//! End-to-end experiments: configuration, phantom synthesis, data
//! generation, reconstruction and artifact export.

pub mod analysis;
pub mod artifacts;
pub mod config;
pub mod verify;

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::Serialize;

pub use analysis::{contrast_centroid, contrast_support, mean_contrast};
pub use artifacts::{
    export_plots_data, read_measurements_csv, read_parameter_csv, write_measurements_csv, write_parameter_csv,
};
pub use config::{EtaReference, ExperimentConfig, Material, Phantom};

use crate::admissibility::{check_admissibility, sigma_note, AdmissibilityReport};
use crate::fem::{assemble, generate_disk_mesh, io as fem_io, Mesh2D};
use crate::forward::{build_source, transform_parameters, BoundarySource, Component, ForwardConfig, ParameterSet};
use crate::inversion::{add_noise, run_reconstruction, NewtonHistory, StopReason, Stopping};
use crate::sensitivity::{forward_measurements, MeasurementSet, MeasurementSpace, Trace};
use crate::{Error, Result};

fn transformed(m: &Material) -> Result<(f64, f64, f64)> {
    transform_parameters(m.c, m.frak_b, m.ba, m.rho0)
}

/// Nodal ground truth: background values outside the phantoms, phantom
/// values inside (membership by distance to the center). Where phantoms
/// overlap the later one wins.
pub fn synthesize_phantom(config: &ExperimentConfig, mesh: &Mesh2D) -> Result<ParameterSet> {
    let (s0, b0, eta0) = transformed(&config.background)?;
    let n = mesh.n_nodes();
    let mut p = ParameterSet::constant(n, s0, b0, if config.linear { 0.0 } else { eta0 });
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut overlap = false;
    for (k, ph) in config.phantoms.iter().enumerate() {
        let (s, b, eta) = transformed(&ph.material(&config.background))?;
        for (i, node) in mesh.nodes.iter().enumerate() {
            if !ph.contains(*node) {
                continue;
            }
            overlap |= owner[i].is_some();
            owner[i] = Some(k);
            let set = |c: Component| ph.component.is_none_or(|only| only == c);
            if set(Component::S) {
                p.s[i] = s;
            }
            if set(Component::B) {
                p.b[i] = b;
            }
            if set(Component::Eta) && !config.linear {
                p.eta[i] = eta;
            }
        }
    }
    if overlap {
        warn!("phantoms overlap; later phantoms overwrite earlier ones");
    }
    p.validate()?;
    Ok(p)
}

/// Constant reference point `x⁰` from the background material.
pub fn reference_point(config: &ExperimentConfig, n: usize) -> Result<ParameterSet> {
    let (s0, b0, eta0) = transformed(&config.background)?;
    let eta = if config.linear || config.x0_eta == EtaReference::Zero { 0.0 } else { eta0 };
    Ok(ParameterSet::constant(n, s0, b0, eta))
}

pub fn admissibility_report(config: &ExperimentConfig) -> Result<AdmissibilityReport> {
    let (s0, b0, _) = transformed(&config.background)?;
    let e = &config.excitations;
    let mut report = check_admissibility(
        &e[0],
        &e[1],
        &e[2],
        b0,
        s0,
        config.gamma,
        config.mesh.radius,
        config.admissibility.eigenvalues,
        config.admissibility.floor,
    )?;
    report.sigma_note = sigma_note(&config.mesh.sigma());
    Ok(report)
}

/// Per-run switches set from the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub override_admissibility: bool,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub fine_data: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub out_dir: PathBuf,
    pub n_nodes: usize,
    pub iterations: usize,
    pub stop: StopReason,
    pub final_misfit: f64,
    pub final_j: Option<f64>,
    pub admissible: bool,
    pub seconds: f64,
}

/// Everything a run produces, kept in memory for callers that analyse it.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub mesh: Mesh2D,
    pub lumped: Vec<f64>,
    pub truth: ParameterSet,
    pub x0: ParameterSet,
    pub reconstruction: ParameterSet,
    pub history: NewtonHistory,
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    crate_version: &'a str,
    seed: u64,
    noise_level: f64,
    delta_absolute: f64,
    nodes: usize,
    triangles: usize,
    order: usize,
    stopping: Stopping,
    tau: f64,
    iteration_budget: usize,
    iterations: usize,
    stop: StopReason,
    final_misfit: f64,
    admissible: bool,
    admissibility_overridden: bool,
    fine_data: Option<config::FineData>,
    config: &'a ExperimentConfig,
}

/// Σ traces of a fine-mesh run at the Σ nodes of the inversion mesh, by
/// linear interpolation in the polar angle along the boundary.
fn transfer_traces(fine: &Mesh2D, data: &MeasurementSet, coarse: &Mesh2D, order: usize) -> Result<MeasurementSet> {
    let target = coarse.sigma_nodes();
    let mut src: Vec<(f64, usize)> = data
        .sigma_nodes
        .iter()
        .enumerate()
        .map(|(k, &i)| (fine.nodes[i][1].atan2(fine.nodes[i][0]), k))
        .collect();
    src.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if src.len() < 2 {
        return Err(Error::EmptySigma);
    }
    let weights: Vec<(usize, usize, f64)> = target
        .iter()
        .map(|&i| {
            let a = coarse.nodes[i][1].atan2(coarse.nodes[i][0]);
            let pos = src.partition_point(|e| e.0 < a);
            let (lo, hi) = if pos == 0 || pos == src.len() {
                (src[src.len() - 1], src[0])
            } else {
                (src[pos - 1], src[pos])
            };
            let span = (hi.0 - lo.0).rem_euclid(std::f64::consts::TAU);
            let t = if span > 0.0 { (a - lo.0).rem_euclid(std::f64::consts::TAU) / span } else { 0.0 };
            (lo.1, hi.1, t.min(1.0))
        })
        .collect();
    let experiments = data
        .experiments
        .iter()
        .map(|tr| Trace {
            omega: tr.omega,
            values: tr.values[..=order]
                .iter()
                .map(|v| weights.iter().map(|&(a, b, t)| v[a] * (1.0 - t) + v[b] * t).collect())
                .collect(),
        })
        .collect();
    Ok(MeasurementSet { sigma_nodes: target, experiments, noise_level: 0.0 })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn sources_for(config: &ExperimentConfig, mesh: &Mesh2D, order: usize) -> Result<Vec<BoundarySource>> {
    config.excitations.iter().map(|e| build_source(e, mesh, config.gamma, order)).collect()
}

/// Runs one case end to end and writes its artifacts.
pub fn run_case(config: &ExperimentConfig, options: &RunOptions) -> Result<RunOutput> {
    let start = Instant::now();
    let mut config = config.clone();
    if let Some(seed) = options.seed {
        config.noise.seed = seed;
    }
    if let Some(out) = &options.out {
        config.output = out.clone();
    }
    if options.fine_data && config.fine_data.is_none() {
        config.fine_data =
            Some(config::FineData { h: 0.5 * config.mesh.h, order: config.forward.order + 1 });
    }
    config.validate().map_err(|e| e.in_stage("config"))?;
    let out = config.output.clone();
    std::fs::create_dir_all(out.join("snapshots")).map_err(|e| Error::from(e).in_stage("output"))?;
    write(&out, "config.toml", &config.to_toml()?)?;

    let report = admissibility_report(&config).map_err(|e| e.in_stage("admissibility"))?;
    write(&out, "admissibility.csv", &report.to_csv())?;
    write(&out, "admissibility.txt", &report.to_text())?;
    if !report.pass {
        if options.override_admissibility {
            warn!("sources fail the admissibility check; continuing on override");
        } else {
            return Err(Error::Config("sources are not admissible (use the override flag to run anyway)".into())
                .in_stage("admissibility"));
        }
    }

    let stage = |s: &'static str| move |e: Error| e.in_stage(s);
    let mesh = generate_disk_mesh(config.mesh.radius, config.mesh.h, config.mesh.sigma()).map_err(stage("mesh"))?;
    let ops = assemble(&mesh, config.gamma, None).map_err(stage("mesh"))?;
    write(&out, "mesh.txt", &fem_io::write_mesh(&mesh))?;
    info!("{}: {} nodes, {} triangles", config.name, mesh.n_nodes(), mesh.triangles.len());

    let truth = synthesize_phantom(&config, &mesh).map_err(stage("phantom"))?;
    write(&out, "truth.csv", &write_parameter_csv(&mesh, &truth))?;

    let fwd = config.forward;
    let sources = sources_for(&config, &mesh, fwd.order).map_err(stage("sources"))?;
    let clean = match &config.fine_data {
        None => forward_measurements(&mesh, &ops, &truth, &sources, &fwd).map_err(stage("data"))?.0,
        Some(fine) => {
            let fmesh = generate_disk_mesh(config.mesh.radius, fine.h, config.mesh.sigma()).map_err(stage("data"))?;
            let fops = assemble(&fmesh, config.gamma, None).map_err(stage("data"))?;
            let ftruth = synthesize_phantom(&config, &fmesh).map_err(stage("data"))?;
            let fsources = sources_for(&config, &fmesh, fine.order).map_err(stage("data"))?;
            let fcfg = ForwardConfig { order: fine.order, ..fwd };
            let (fdata, _) = forward_measurements(&fmesh, &fops, &ftruth, &fsources, &fcfg).map_err(stage("data"))?;
            transfer_traces(&fmesh, &fdata, &mesh, fwd.order).map_err(stage("data"))?
        }
    };
    write(&out, "measurements.csv", &write_measurements_csv(&clean))?;
    let space = MeasurementSpace::new(&mesh, &ops).map_err(stage("noise"))?;
    let data = add_noise(&clean, &space, config.noise.level, config.noise.seed).map_err(stage("noise"))?;
    write(&out, "measurements_noisy.csv", &write_measurements_csv(&data))?;

    let x0 = reference_point(&config, mesh.n_nodes())?;
    let mut newton = config.newton.clone();
    newton.delta = config.noise.level;
    if config.linear {
        newton.active[Component::Eta.index()] = false;
    }
    let (recon, history) =
        run_reconstruction(&mesh, &ops, &newton, &fwd, &data, &sources, &x0).map_err(stage("inversion"))?;
    write(&out, "convergence.csv", &history.log_csv())?;
    write(&out, "reconstruction.csv", &write_parameter_csv(&mesh, &recon))?;
    for (k, snap) in history.snapshots.iter().enumerate() {
        write(&out.join("snapshots"), &format!("iter_{:03}.csv", k + 1), &write_parameter_csv(&mesh, snap))?;
    }

    let manifest = Manifest {
        name: &config.name,
        crate_version: env!("CARGO_PKG_VERSION"),
        seed: config.noise.seed,
        noise_level: config.noise.level,
        delta_absolute: data.noise_level,
        nodes: mesh.n_nodes(),
        triangles: mesh.triangles.len(),
        order: fwd.order,
        stopping: newton.stopping,
        tau: newton.tau,
        iteration_budget: newton.iteration_budget(),
        iterations: history.records.len(),
        stop: history.stop,
        final_misfit: history.final_misfit,
        admissible: report.pass,
        admissibility_overridden: !report.pass && options.override_admissibility,
        fine_data: config.fine_data,
        config: &config,
    };
    write(&out, "manifest.toml", &toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?)?;

    let summary = RunSummary {
        name: config.name.clone(),
        out_dir: out,
        n_nodes: mesh.n_nodes(),
        iterations: history.records.len(),
        stop: history.stop,
        final_misfit: history.final_misfit,
        final_j: history.records.last().map(|r| r.j),
        admissible: report.pass,
        seconds: start.elapsed().as_secs_f64(),
    };
    info!("{}: {} iterations, stop {:?}, misfit {:e}", summary.name, summary.iterations, summary.stop, summary.final_misfit);
    Ok(RunOutput { summary, lumped: ops.lumped.clone(), mesh, truth, x0, reconstruction: recon, history })
}
