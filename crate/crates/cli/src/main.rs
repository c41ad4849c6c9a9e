use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use westervelt::experiment::{
    self, admissibility_report, export_plots_data, read_measurements_csv, reference_point, synthesize_phantom,
    verify, write_measurements_csv, write_parameter_csv, ExperimentConfig, RunOptions,
};
use westervelt::fem::{assemble, generate_disk_mesh, io as fem_io};
use westervelt::forward::{build_source, solve_forward, Component};
use westervelt::inversion::{run_reconstruction, StopReason};
use westervelt::sensitivity::{forward_measurements, FrozenLinearization};

const EXIT_STOPPED_BY_RULE: u8 = 10;
const EXIT_DIVERGED: u8 = 11;
const EXIT_NOT_ADMISSIBLE: u8 = 12;

#[derive(Parser)]
#[command(name = "westervelt", version, about = "Periodic Westervelt forward solver and coefficient reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Adjoint,
    Taylor,
    Range,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the disk mesh of a configuration.
    Mesh(Common),
    /// Solve the forward problems for the ground-truth phantom.
    Forward(Common),
    /// Check the excitations for linearized uniqueness.
    Admissibility(Common),
    /// Run the adjoint, Taylor and range-invariance suites.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        /// Mesh size used by the suites (coarser than the case mesh).
        #[arg(long, default_value_t = 0.03)]
        h: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Reconstruct from a measurement file.
    Invert {
        #[command(flatten)]
        common: Common,
        /// Measurements CSV; defaults to `measurements_noisy.csv` in the output directory.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Full pipeline: phantom, data, noise, reconstruction, artifacts.
    RunCase {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        override_admissibility: bool,
        /// Generate data on a refined mesh with one more harmonic.
        #[arg(long)]
        fine_data: bool,
    },
    /// Write plot-ready CSVs for a finished run.
    Export {
        /// Run directory.
        #[arg(long)]
        run: PathBuf,
        /// Run directory of the matching linear-model run.
        #[arg(long)]
        linear: Option<PathBuf>,
        #[arg(long, default_value_t = 101)]
        raster: usize,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let cfg = ExperimentConfig::load(&common.config).with_context(|| format!("loading {}", common.config.display()))?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output.clone());
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok((cfg, out))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn stop_code(stop: StopReason) -> ExitCode {
    match stop {
        StopReason::MaxIters => ExitCode::SUCCESS,
        StopReason::StoppingRule => ExitCode::from(EXIT_STOPPED_BY_RULE),
        StopReason::Diverged => ExitCode::from(EXIT_DIVERGED),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Mesh(common) => {
            let (cfg, out) = load(&common)?;
            let mesh = generate_disk_mesh(cfg.mesh.radius, cfg.mesh.h, cfg.mesh.sigma())?;
            write(&out, "mesh.txt", &fem_io::write_mesh(&mesh))?;
            println!("nodes: {}\ntriangles: {}\nsigma_nodes: {}", mesh.n_nodes(), mesh.triangles.len(), mesh.sigma_nodes().len());
        }
        Command::Forward(common) => {
            let (cfg, out) = load(&common)?;
            let mesh = generate_disk_mesh(cfg.mesh.radius, cfg.mesh.h, cfg.mesh.sigma())?;
            let ops = assemble(&mesh, cfg.gamma, None)?;
            let truth = synthesize_phantom(&cfg, &mesh)?;
            write(&out, "truth.csv", &write_parameter_csv(&mesh, &truth))?;
            let nodes: Vec<usize> = (0..mesh.n_nodes()).collect();
            let mut sources = Vec::new();
            for (j, spec) in cfg.excitations.iter().enumerate() {
                let src = build_source(spec, &mesh, cfg.gamma, cfg.forward.order)?;
                let sol = solve_forward(&mesh, &ops, &truth, &src, &cfg.forward)?;
                write(&out, &format!("state_{}.csv", j + 1), &fem_io::write_field_csv(&mesh, &nodes, &sol.field.coeffs))?;
                println!(
                    "experiment_{}: fixed_point_sweeps {} residual {:e} degeneracy_margin {:e}",
                    j + 1,
                    sol.residual_history.len(),
                    sol.residual_history.last().copied().unwrap_or(0.0),
                    sol.degeneracy_margin
                );
                sources.push(src);
            }
            let (data, _) = forward_measurements(&mesh, &ops, &truth, &sources, &cfg.forward)?;
            write(&out, "measurements.csv", &write_measurements_csv(&data))?;
        }
        Command::Admissibility(common) => {
            let (cfg, out) = load(&common)?;
            let report = admissibility_report(&cfg)?;
            write(&out, "admissibility.csv", &report.to_csv())?;
            print!("{}", report.to_text());
            if !report.pass {
                return Ok(ExitCode::from(EXIT_NOT_ADMISSIBLE));
            }
        }
        Command::Verify { common, suite, h, seed } => {
            let (cfg, out) = load(&common)?;
            let mesh = generate_disk_mesh(cfg.mesh.radius, h, cfg.mesh.sigma())?;
            let ops = assemble(&mesh, cfg.gamma, None)?;
            let truth = synthesize_phantom(&cfg, &mesh)?;
            let sources = cfg
                .excitations
                .iter()
                .map(|e| build_source(e, &mesh, cfg.gamma, cfg.forward.order))
                .collect::<westervelt::Result<Vec<_>>>()?;
            let want = |s: Suite| suite == Suite::All || suite == s;
            let adjoint = if want(Suite::Adjoint) {
                let (lin, _) = FrozenLinearization::new(&mesh, &ops, &truth, &sources, &cfg.forward)?;
                Some(verify::adjoint_check(&lin, &truth, 50, seed)?)
            } else {
                None
            };
            let taylor = if want(Suite::Taylor) {
                let d = verify::seeded_direction(&truth, 1e-4, seed);
                let eps = [1.0, 0.5, 0.25, 0.125, 0.0625];
                Some(verify::taylor_check(&mesh, &ops, &truth, &d, &sources, &cfg.forward, &eps)?)
            } else {
                None
            };
            let range = if want(Suite::Range) {
                Some(verify::range_check(&mesh, &ops, &truth, &sources, &cfg.forward, 20, seed)?)
            } else {
                None
            };
            let text = verify::report(adjoint, taylor.as_ref(), range.as_ref());
            write(&out, "verify.txt", &text)?;
            print!("{text}");
        }
        Command::Invert { common, data } => {
            let (cfg, out) = load(&common)?;
            let mesh = generate_disk_mesh(cfg.mesh.radius, cfg.mesh.h, cfg.mesh.sigma())?;
            let ops = assemble(&mesh, cfg.gamma, None)?;
            let sources = cfg
                .excitations
                .iter()
                .map(|e| build_source(e, &mesh, cfg.gamma, cfg.forward.order))
                .collect::<westervelt::Result<Vec<_>>>()?;
            let path = data.unwrap_or_else(|| out.join("measurements_noisy.csv"));
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let omegas: Vec<f64> = sources.iter().map(|s| s.omega).collect();
            let meas = read_measurements_csv(&text, &omegas)?;
            if meas.sigma_nodes != mesh.sigma_nodes() {
                bail!("measurements in {} do not match the configured mesh", path.display());
            }
            let x0 = reference_point(&cfg, mesh.n_nodes())?;
            let mut newton = cfg.newton.clone();
            newton.delta = cfg.noise.level;
            if cfg.linear {
                newton.active[Component::Eta.index()] = false;
            }
            let (recon, history) = run_reconstruction(&mesh, &ops, &newton, &cfg.forward, &meas, &sources, &x0)?;
            write(&out, "convergence.csv", &history.log_csv())?;
            write(&out, "reconstruction.csv", &write_parameter_csv(&mesh, &recon))?;
            write(&out, "mesh.txt", &fem_io::write_mesh(&mesh))?;
            println!("iterations: {}\nstop: {:?}\nfinal_misfit: {:e}", history.records.len(), history.stop, history.final_misfit);
            return Ok(stop_code(history.stop));
        }
        Command::RunCase { common, seed, override_admissibility, fine_data } => {
            let cfg = ExperimentConfig::load(&common.config)
                .with_context(|| format!("loading {}", common.config.display()))?;
            let options = RunOptions { override_admissibility, seed, out: common.out.clone(), fine_data };
            let result = match experiment::run_case(&cfg, &options) {
                Ok(r) => r,
                Err(westervelt::Error::Stage { stage: "admissibility", source }) => {
                    eprintln!("error: admissibility: {source}");
                    return Ok(ExitCode::from(EXIT_NOT_ADMISSIBLE));
                }
                Err(e) => return Err(e.into()),
            };
            let s = &result.summary;
            info!("run finished in {:.1} s", s.seconds);
            println!(
                "name: {}\nout: {}\nnodes: {}\niterations: {}\nstop: {:?}\nfinal_misfit: {:e}",
                s.name,
                s.out_dir.display(),
                s.n_nodes,
                s.iterations,
                s.stop,
                s.final_misfit
            );
            return Ok(stop_code(s.stop));
        }
        Command::Export { run, linear, raster } => {
            for p in export_plots_data(&run, linear.as_deref(), raster)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
