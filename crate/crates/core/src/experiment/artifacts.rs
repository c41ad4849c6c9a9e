//! Run artifacts on disk and plot-ready exports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::fem::{io as fem_io, Mesh2D};
use crate::forward::{Component, ParameterSet};
use crate::sensitivity::{MeasurementSet, Trace};
use crate::Complex64;
use crate::{Error, Result};

pub fn write_parameter_csv(mesh: &Mesh2D, p: &ParameterSet) -> String {
    let mut s = String::from("node_id,x,y,s,b,eta\n");
    for (i, node) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            node[0], node[1], p.s[i], p.b[i], p.eta[i]
        );
    }
    s
}

pub fn read_parameter_csv(text: &str) -> Result<ParameterSet> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty parameter file".into()))?;
    if header.trim() != "node_id,x,y,s,b,eta" {
        return Err(Error::Parse(format!("unexpected parameter header `{header}`")));
    }
    let mut p = ParameterSet { s: Vec::new(), b: Vec::new(), eta: Vec::new() };
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", k + 2)))?;
        if cols.len() != 6 || cols[0] as usize != p.s.len() {
            return Err(Error::Parse(format!("line {}: malformed row", k + 2)));
        }
        p.s.push(cols[3]);
        p.b.push(cols[4]);
        p.eta.push(cols[5]);
    }
    Ok(p)
}

/// `experiment,harmonic,node_id,re,im` rows at full precision.
pub fn write_measurements_csv(m: &MeasurementSet) -> String {
    let mut s = String::from("experiment,harmonic,node_id,re,im\n");
    for (j, tr) in m.experiments.iter().enumerate() {
        for (h, v) in tr.values.iter().enumerate() {
            for (z, node) in v.iter().zip(&m.sigma_nodes) {
                let _ = writeln!(s, "{j},{h},{node},{:.17e},{:.17e}", z.re, z.im);
            }
        }
    }
    s
}

/// Inverse of [`write_measurements_csv`]; `omegas` gives the fundamental
/// frequency of each experiment.
pub fn read_measurements_csv(text: &str, omegas: &[f64]) -> Result<MeasurementSet> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("experiment,harmonic,node_id,re,im") {
        return Err(Error::Parse("unexpected measurement header".into()));
    }
    let mut sigma_nodes: Vec<usize> = Vec::new();
    let mut experiments: Vec<Trace> = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::Parse(format!("line {}: malformed measurement row", k + 2));
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(bad());
        }
        let j: usize = cols[0].parse().map_err(|_| bad())?;
        let m: usize = cols[1].parse().map_err(|_| bad())?;
        let node: usize = cols[2].parse().map_err(|_| bad())?;
        let z = Complex64::new(cols[3].parse().map_err(|_| bad())?, cols[4].parse().map_err(|_| bad())?);
        if j == experiments.len() {
            let omega = *omegas.get(j).ok_or_else(|| Error::Mismatch("more experiments than frequencies".into()))?;
            experiments.push(Trace { omega, values: Vec::new() });
        }
        let tr = experiments.get_mut(j).ok_or_else(bad)?;
        if m == tr.values.len() {
            tr.values.push(Vec::new());
        }
        let v = tr.values.get_mut(m).ok_or_else(bad)?;
        if j == 0 && m == 0 {
            sigma_nodes.push(node);
        } else if sigma_nodes.get(v.len()) != Some(&node) {
            return Err(bad());
        }
        v.push(z);
    }
    Ok(MeasurementSet { sigma_nodes, experiments, noise_level: 0.0 })
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("missing artifact {}: {e}", path.display())))
}

/// `J` column of a convergence log.
pub fn read_j_curve(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let col = header
        .split(',')
        .position(|c| c.trim() == "J")
        .ok_or_else(|| Error::Parse("convergence log has no J column".into()))?;
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .nth(col)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad convergence row `{l}`")))
        })
        .collect()
}

pub fn j_curve_csv(nonlinear: &[f64], linear: Option<&[f64]>) -> String {
    let mut s = String::from(if linear.is_some() { "iter,J_nonlinear,J_linear\n" } else { "iter,J_nonlinear\n" });
    let rows = nonlinear.len().max(linear.map_or(0, |l| l.len()));
    for k in 0..rows {
        let cell = |v: Option<&f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        match linear {
            Some(l) => {
                let _ = writeln!(s, "{k},{},{}", cell(nonlinear.get(k)), cell(l.get(k)));
            }
            None => {
                let _ = writeln!(s, "{k},{}", cell(nonlinear.get(k)));
            }
        }
    }
    s
}

/// Nodal field sampled on a `size × size` raster over the bounding box;
/// points outside the mesh are skipped.
pub fn raster_csv(mesh: &Mesh2D, field: &[f64], size: usize) -> String {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &mesh.nodes {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let mut s = String::from("x,y,value\n");
    let step = |d: usize, k: usize| lo[d] + (hi[d] - lo[d]) * k as f64 / (size.max(2) - 1) as f64;
    for iy in 0..size {
        for ix in 0..size {
            let p = [step(0, ix), step(1, iy)];
            if let Some(v) = mesh.interpolate(field, p) {
                let _ = writeln!(s, "{:.6e},{:.6e},{:.9e}", p[0], p[1], v);
            }
        }
    }
    s
}

/// Writes `plots/j_curve.csv` and `plots/heatmap_{s,b,eta}.csv` for a run
/// directory, optionally pairing the J curve with a linear-model run.
pub fn export_plots_data(run_dir: &Path, linear_dir: Option<&Path>, raster: usize) -> Result<Vec<PathBuf>> {
    let j = read_j_curve(&read(run_dir, "convergence.csv")?)?;
    let lin = linear_dir.map(|d| read(d, "convergence.csv").and_then(|t| read_j_curve(&t))).transpose()?;
    let mesh = fem_io::read_mesh(read(run_dir, "mesh.txt")?.as_bytes())?;
    let recon = read_parameter_csv(&read(run_dir, "reconstruction.csv")?)?;
    if recon.n_nodes() != mesh.n_nodes() {
        return Err(Error::Mismatch("reconstruction does not match the run mesh".into()));
    }
    let dir = run_dir.join("plots");
    std::fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    let path = dir.join("j_curve.csv");
    std::fs::write(&path, j_curve_csv(&j, lin.as_deref()))?;
    written.push(path);
    for c in Component::ALL {
        let path = dir.join(format!("heatmap_{}.csv", c.name()));
        std::fs::write(&path, raster_csv(&mesh, recon.component(c), raster))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{generate_disk_mesh, SigmaArc};

    #[test]
    fn j_curve_shapes() {
        assert_eq!(j_curve_csv(&[], None), "iter,J_nonlinear\n");
        let s = j_curve_csv(&[1.0, 0.5, 0.25], Some(&[2.0, 1.0]));
        let rows: Vec<&str> = s.lines().collect();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[3], "2,2.5e-1,");
        assert_eq!(read_j_curve("iter,J,misfit,alpha,cg_iters\n0,1e0,2,1,3\n1,5e-1,1,0.6,4\n").unwrap(), vec![1.0, 0.5]);
    }

    #[test]
    fn constant_raster_and_parameter_round_trip() {
        let mesh = generate_disk_mesh(0.2, 0.05, SigmaArc::full()).unwrap();
        let n = mesh.n_nodes();
        let text = raster_csv(&mesh, &vec![3.5; n], 25);
        let values: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
        assert!(values.len() > 200);
        assert!(values.iter().all(|v| (v - 3.5).abs() < 1e-12));
        let p = ParameterSet::constant(n, 2000.0, 20.0, 1e-4);
        let q = read_parameter_csv(&write_parameter_csv(&mesh, &p)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn measurement_round_trip() {
        let m = MeasurementSet {
            sigma_nodes: vec![4, 7, 9],
            experiments: vec![
                Trace { omega: 2.0, values: vec![vec![Complex64::new(1.0, 0.0); 3], vec![Complex64::new(0.1, -0.3); 3]] },
                Trace { omega: 3.0, values: vec![vec![Complex64::new(-2.0, 0.0); 3], vec![Complex64::new(1e-9, 5.0); 3]] },
            ],
            noise_level: 0.0,
        };
        let back = read_measurements_csv(&write_measurements_csv(&m), &[2.0, 3.0]).unwrap();
        assert_eq!(m, back);
    }
}
