//! All-at-once formulation: the operator `𝔽` on lifted (possibly
//! time-dependent) parameters and states, its linearization, the effective
//! increment map `r` of the range-invariance identity
//! `𝔽(x) − 𝔽(x⁰) = 𝔽′(x⁰) r(x)` and the time-mean penalty `P`.
//!
//! Everything is evaluated on the `4N+1` point collocation grid where products
//! are pointwise; time derivatives are spectral on that grid.

use std::f64::consts::PI;

use serde::Serialize;

use crate::fem::{AssembledOperators, Mesh2D};
use crate::forward::ParameterSet;
use crate::harmonics::{collocation_size, collocation_times, HarmonicField};
use crate::{Error, Result};

/// Grid samples `[time][node]`.
pub type Samples = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct AaoExperiment {
    pub omega: f64,
    pub s: Samples,
    pub b: Samples,
    pub eta: Samples,
    pub u: Samples,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AaoPoint {
    pub experiments: Vec<AaoExperiment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResidual {
    pub omega: f64,
    /// `(b u − η u²)_tt − sΔu − Δu_t` on interior nodes.
    pub model: Samples,
    /// `γu + ∂_n u` on boundary nodes.
    pub boundary: Samples,
    /// `tr_Σ u`.
    pub observation: Samples,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AaoResidual {
    pub experiments: Vec<ExperimentResidual>,
}

fn constant_samples(values: &[f64], m: usize) -> Samples {
    vec![values.to_vec(); m]
}

fn zip_map(a: &Samples, b: &Samples, f: impl Fn(f64, f64) -> f64) -> Samples {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(&p, &q)| f(p, q)).collect()).collect()
}

fn max_abs(s: &Samples) -> f64 {
    s.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

impl AaoExperiment {
    /// Lifts time-independent parameters and a harmonic state to the grid.
    pub fn lift(params: &ParameterSet, u: &HarmonicField, grid: usize) -> Result<Self> {
        if u.n_nodes() != params.n_nodes() {
            return Err(Error::invalid("state and parameters live on different meshes"));
        }
        let times = collocation_times(u.omega, grid);
        Ok(AaoExperiment {
            omega: u.omega,
            s: constant_samples(&params.s, grid),
            b: constant_samples(&params.b, grid),
            eta: constant_samples(&params.eta, grid),
            u: u.sample_time(&times),
        })
    }

    fn components(&self) -> [&Samples; 4] {
        [&self.s, &self.b, &self.eta, &self.u]
    }

    fn sub(&self, other: &Self) -> Self {
        let d = |a: &Samples, b: &Samples| zip_map(a, b, |x, y| x - y);
        AaoExperiment { omega: self.omega, s: d(&self.s, &other.s), b: d(&self.b, &other.b), eta: d(&self.eta, &other.eta), u: d(&self.u, &other.u) }
    }

    fn axpy(&self, a: f64, dir: &Self) -> Self {
        let f = |x: &Samples, y: &Samples| zip_map(x, y, |p, q| p + a * q);
        AaoExperiment { omega: self.omega, s: f(&self.s, &dir.s), b: f(&self.b, &dir.b), eta: f(&self.eta, &dir.eta), u: f(&self.u, &dir.u) }
    }
}

impl AaoPoint {
    pub fn lift(params: &[ParameterSet], states: &[HarmonicField], order: usize) -> Result<Self> {
        if params.len() != states.len() || states.is_empty() {
            return Err(Error::invalid("need one parameter set per experiment state"));
        }
        let grid = collocation_size(order);
        let experiments =
            params.iter().zip(states).map(|(p, u)| AaoExperiment::lift(p, u, grid)).collect::<Result<_>>()?;
        Ok(AaoPoint { experiments })
    }

    pub fn grid_size(&self) -> usize {
        self.experiments[0].u.len()
    }

    pub fn sub(&self, other: &Self) -> Self {
        AaoPoint {
            experiments: self.experiments.iter().zip(&other.experiments).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    /// `self + a · dir`.
    pub fn axpy(&self, a: f64, dir: &Self) -> Self {
        AaoPoint {
            experiments: self.experiments.iter().zip(&dir.experiments).map(|(x, d)| x.axpy(a, d)).collect(),
        }
    }
}

impl ExperimentResidual {
    fn parts(&self) -> [&Samples; 3] {
        [&self.model, &self.boundary, &self.observation]
    }
}

impl AaoResidual {
    /// Harmonic coefficients `0..=order` of every component; the grid holds
    /// exact content up to order `2N`.
    pub fn harmonics(&self, order: usize) -> Result<Vec<[HarmonicField; 3]>> {
        self.experiments
            .iter()
            .map(|e| {
                Ok([
                    HarmonicField::from_samples(&e.model, order, e.omega)?,
                    HarmonicField::from_samples(&e.boundary, order, e.omega)?,
                    HarmonicField::from_samples(&e.observation, order, e.omega)?,
                ])
            })
            .collect()
    }
}

/// Spectral derivative of order `p` along the time axis of an odd-length
/// periodic grid.
pub fn time_derivative(samples: &Samples, omega: f64, p: u32) -> Samples {
    let k = samples.len();
    let n = samples.first().map_or(0, |r| r.len());
    let half = (k / 2) as i64;
    // D[j][l] = (1/K) Σ_m (imω)^p e^{2πi m (j − l)/K}, real for odd K
    let kernel: Vec<f64> = (0..k)
        .map(|d| {
            let mut acc = 0.0;
            for m in 1..=half {
                let x = 2.0 * PI * (m as f64) * (d as f64) / k as f64;
                let a = (m as f64 * omega).powi(p as i32);
                acc += 2.0
                    * a
                    * match p % 4 {
                        0 => x.cos(),
                        1 => -x.sin(),
                        2 => -x.cos(),
                        _ => x.sin(),
                    };
            }
            if p == 0 {
                acc += 1.0;
            }
            acc / k as f64
        })
        .collect();
    let mut out = vec![vec![0.0; n]; k];
    for (j, row) in out.iter_mut().enumerate() {
        for (l, src) in samples.iter().enumerate() {
            let w = kernel[(j + k - l) % k];
            for (o, &v) in row.iter_mut().zip(src) {
                *o += w * v;
            }
        }
    }
    out
}

/// Discrete operators shared by all experiments on one mesh.
#[derive(Debug, Clone)]
pub struct AaoOperator {
    pub gamma: f64,
    lumped: Vec<f64>,
    stiffness: crate::fem::Csr<f64>,
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    pub sigma: Vec<usize>,
    /// Recovered outward normal derivative, one sparse row per boundary node.
    normal_rows: Vec<Vec<(usize, f64)>>,
}

impl AaoOperator {
    pub fn new(mesh: &Mesh2D, ops: &AssembledOperators) -> Result<Self> {
        let n = mesh.n_nodes();
        let on_boundary = mesh.is_boundary_node();
        let boundary = mesh.boundary_nodes();
        let sigma = mesh.sigma_nodes();
        if sigma.is_empty() {
            return Err(Error::EmptySigma);
        }
        let interior = (0..n).filter(|&i| !on_boundary[i]).collect();
        let mut normals = vec![[0.0; 2]; n];
        for e in &mesh.boundary_edges {
            for &v in &e.nodes {
                normals[v][0] += e.normal[0];
                normals[v][1] += e.normal[1];
            }
        }
        // area-weighted average of the P1 gradients around each boundary node
        let mut grads: Vec<Vec<(usize, [f64; 2])>> = vec![Vec::new(); n];
        let mut areas = vec![0.0; n];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let g = mesh.basis_gradients(t);
            let a = mesh.triangle_area(t);
            for &v in tri {
                if !on_boundary[v] {
                    continue;
                }
                areas[v] += a;
                for (k, &w) in tri.iter().enumerate() {
                    grads[v].push((w, [a * g[k][0], a * g[k][1]]));
                }
            }
        }
        let normal_rows = boundary
            .iter()
            .map(|&v| {
                let nv = normals[v];
                let len = (nv[0] * nv[0] + nv[1] * nv[1]).sqrt();
                let mut row: Vec<(usize, f64)> = grads[v]
                    .iter()
                    .map(|&(w, g)| (w, (g[0] * nv[0] + g[1] * nv[1]) / (len * areas[v])))
                    .collect();
                row.sort_by_key(|e| e.0);
                row.dedup_by(|a, b| {
                    if a.0 == b.0 {
                        b.1 += a.1;
                        true
                    } else {
                        false
                    }
                });
                row
            })
            .collect();
        Ok(AaoOperator {
            gamma: ops.gamma,
            lumped: ops.lumped.clone(),
            stiffness: ops.stiffness.clone(),
            interior,
            boundary,
            sigma,
            normal_rows,
        })
    }

    /// Discrete Laplacian `−D⁻¹K u` on interior nodes.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let ku = self.stiffness.matvec(u);
        self.interior.iter().map(|&i| -ku[i] / self.lumped[i]).collect()
    }

    fn laplacian_samples(&self, u: &Samples) -> Samples {
        u.iter().map(|row| self.laplacian(row)).collect()
    }

    fn interior_rows(&self, f: &Samples) -> Samples {
        f.iter().map(|row| self.interior.iter().map(|&i| row[i]).collect()).collect()
    }

    fn robin_trace(&self, u: &Samples) -> Samples {
        u.iter()
            .map(|row| {
                self.boundary
                    .iter()
                    .zip(&self.normal_rows)
                    .map(|(&i, nr)| self.gamma * row[i] + nr.iter().map(|&(j, w)| w * row[j]).sum::<f64>())
                    .collect()
            })
            .collect()
    }

    fn observe(&self, u: &Samples) -> Samples {
        u.iter().map(|row| self.sigma.iter().map(|&i| row[i]).collect()).collect()
    }

    fn check_point(&self, x: &AaoPoint) -> Result<()> {
        let m = x.grid_size();
        if m % 2 == 0 || m < 5 {
            return Err(Error::invalid("collocation grid must have odd length of at least 5"));
        }
        let n = self.lumped.len();
        for e in &x.experiments {
            for c in e.components() {
                if c.len() != m || c.iter().any(|r| r.len() != n) {
                    return Err(Error::invalid("inconsistent all-at-once point dimensions"));
                }
            }
        }
        Ok(())
    }

    /// `𝔽(x)`: model, boundary and observation parts per experiment.
    pub fn eval(&self, x: &AaoPoint) -> Result<AaoResidual> {
        self.check_point(x)?;
        let experiments = x
            .experiments
            .iter()
            .map(|e| {
                let w = e.omega;
                let inertia = {
                    let bu = zip_map(&e.b, &e.u, |b, u| b * u);
                    let etau2 = zip_map(&e.eta, &e.u, |n, u| n * u * u);
                    time_derivative(&zip_map(&bu, &etau2, |a, c| a - c), w, 2)
                };
                let lap = self.laplacian_samples(&e.u);
                let lap_t = time_derivative(&lap, w, 1);
                let s = self.interior_rows(&e.s);
                let mut model = self.interior_rows(&inertia);
                for (k, row) in model.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v -= s[k][j] * lap[k][j] + lap_t[k][j];
                    }
                }
                ExperimentResidual { omega: w, model, boundary: self.robin_trace(&e.u), observation: self.observe(&e.u) }
            })
            .collect();
        Ok(AaoResidual { experiments })
    }

    /// `𝔽′(x⁰) dx`.
    pub fn eval_linearized(&self, x0: &AaoPoint, dx: &AaoPoint) -> Result<AaoResidual> {
        self.check_point(x0)?;
        self.check_point(dx)?;
        if x0.experiments.len() != dx.experiments.len() {
            return Err(Error::invalid("direction and reference differ in experiment count"));
        }
        let experiments = x0
            .experiments
            .iter()
            .zip(&dx.experiments)
            .map(|(r, d)| {
                let w = r.omega;
                let m = r.u.len();
                let n = r.u[0].len();
                let mut inner = vec![vec![0.0; n]; m];
                for k in 0..m {
                    for i in 0..n {
                        let u0 = r.u[k][i];
                        let du = d.u[k][i];
                        inner[k][i] = r.b[k][i] * du - 2.0 * r.eta[k][i] * u0 * du - d.eta[k][i] * u0 * u0
                            + d.b[k][i] * u0;
                    }
                }
                let inertia = time_derivative(&inner, w, 2);
                let lap_du = self.laplacian_samples(&d.u);
                let lap_du_t = time_derivative(&lap_du, w, 1);
                let lap_u0 = self.laplacian_samples(&r.u);
                let s0 = self.interior_rows(&r.s);
                let ds = self.interior_rows(&d.s);
                let model = (0..m)
                    .map(|k| {
                        (0..self.interior.len())
                            .map(|j| {
                                inertia[k][self.interior[j]]
                                    - s0[k][j] * lap_du[k][j]
                                    - lap_du_t[k][j]
                                    - ds[k][j] * lap_u0[k][j]
                            })
                            .collect()
                    })
                    .collect();
                ExperimentResidual { omega: w, model, boundary: self.robin_trace(&d.u), observation: self.observe(&d.u) }
            })
            .collect();
        Ok(AaoResidual { experiments })
    }

    /// Default lower bound `c_u = 1e−8 ‖u⁰‖_∞` for the reference state.
    pub fn default_cu(x0: &AaoPoint) -> f64 {
        1e-8 * x0.experiments.iter().map(|e| max_abs(&e.u)).fold(0.0, f64::max)
    }

    /// Effective increments `r(x) = (ds̃, db, dη̃, du)` with
    /// `ds̃ = (s − s⁰)Δu/Δu⁰` and
    /// `dη̃ = [η⁰(u − u⁰)² + (η − η⁰)u² − (b − b⁰)(u − u⁰)] / (u⁰)²`
    /// on interior nodes. On boundary nodes, where the model part is not
    /// evaluated, `ds̃ = s − s⁰` and `dη̃ = η − η⁰`.
    pub fn r_map(&self, x: &AaoPoint, x0: &AaoPoint, c_u: f64) -> Result<AaoPoint> {
        self.check_point(x)?;
        self.check_point(x0)?;
        let m = x0.grid_size();
        let mut experiments = Vec::with_capacity(x.experiments.len());
        for (e, r) in x.experiments.iter().zip(&x0.experiments) {
            let d = e.sub(r);
            let lap_u = self.laplacian_samples(&e.u);
            let lap_u0 = self.laplacian_samples(&r.u);
            let mut ds = d.s.clone();
            let mut deta = d.eta.clone();
            for k in 0..m {
                for (j, &i) in self.interior.iter().enumerate() {
                    let u0 = r.u[k][i];
                    let l0 = lap_u0[k][j];
                    if u0.abs() < c_u || l0.abs() < c_u {
                        let (what, value) = if u0.abs() < c_u { ("|u0|", u0.abs()) } else { ("|lap u0|", l0.abs()) };
                        return Err(Error::ReferenceBound { what, value, threshold: c_u, node: i, time: k });
                    }
                    ds[k][i] = d.s[k][i] * lap_u[k][j] / l0;
                    let du = d.u[k][i];
                    let u = e.u[k][i];
                    deta[k][i] = (r.eta[k][i] * du * du + d.eta[k][i] * u * u - d.b[k][i] * du) / (u0 * u0);
                }
            }
            experiments.push(AaoExperiment { omega: r.omega, s: ds, b: d.b, eta: deta, u: d.u });
        }
        Ok(AaoPoint { experiments })
    }

    /// Max over experiments and components of
    /// `‖𝔽(x) − 𝔽(x⁰) − 𝔽′(x⁰) r(x)‖_∞ / max(‖𝔽(x)‖_∞, ‖𝔽(x⁰)‖_∞)`.
    pub fn check_range_invariance(&self, x: &AaoPoint, x0: &AaoPoint, c_u: f64) -> Result<f64> {
        let fx = self.eval(x)?;
        let f0 = self.eval(x0)?;
        let r = self.r_map(x, x0, c_u)?;
        let lin = self.eval_linearized(x0, &r)?;
        let mut worst: f64 = 0.0;
        for ((a, b), c) in fx.experiments.iter().zip(&f0.experiments).zip(&lin.experiments) {
            for ((pa, pb), pc) in a.parts().into_iter().zip(b.parts()).zip(c.parts()) {
                let scale = max_abs(pa).max(max_abs(pb));
                if scale == 0.0 {
                    continue;
                }
                let diff = zip_map(&zip_map(pa, pb, |p, q| p - q), pc, |p, q| p - q);
                worst = worst.max(max_abs(&diff) / scale);
            }
        }
        Ok(worst)
    }

    /// `‖r(x) − (x − x⁰)‖ / ‖x − x⁰‖` for `x = x⁰ + ε·dir` over the given
    /// magnitudes, in the component-scaled max norm.
    pub fn contraction_curve(&self, x0: &AaoPoint, dir: &AaoPoint, eps: &[f64], c_u: f64) -> Result<Vec<CRhoSample>> {
        let scales: Vec<[f64; 4]> = x0
            .experiments
            .iter()
            .map(|e| {
                let mut s = [0.0; 4];
                for (k, c) in e.components().iter().enumerate() {
                    let m = max_abs(c);
                    s[k] = if m > 0.0 { m } else { 1.0 };
                }
                s
            })
            .collect();
        let norm = |p: &AaoPoint| {
            p.experiments
                .iter()
                .zip(&scales)
                .flat_map(|(e, sc)| e.components().into_iter().zip(sc).map(|(c, s)| max_abs(c) / s).collect::<Vec<_>>())
                .fold(0.0, f64::max)
        };
        eps.iter()
            .map(|&e| {
                let x = x0.axpy(e, dir);
                let r = self.r_map(&x, x0, c_u)?;
                let d = x.sub(x0);
                let nd = norm(&d);
                Ok(CRhoSample { eps: e, distance: nd, ratio: if nd > 0.0 { norm(&r.sub(&d)) / nd } else { 0.0 } })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CRhoSample {
    pub eps: f64,
    pub distance: f64,
    pub ratio: f64,
}

/// Largest sampled distance below which every measured ratio is `< 1`.
pub fn contraction_radius(curve: &[CRhoSample]) -> f64 {
    let mut sorted = curve.to_vec();
    sorted.sort_by(|a, b| a.distance.partial_cmp(&b.distance).unwrap());
    let mut radius = 0.0;
    for c in sorted {
        if c.ratio >= 1.0 {
            break;
        }
        radius = c.distance;
    }
    radius
}

/// `P f = f − (Σ_k w_k f_k) / (Σ_k w_k)`: removes the weighted time mean at
/// every node.
pub fn penalty_p(fields: &Samples, weights: &[f64]) -> Result<Samples> {
    if weights.len() != fields.len() || weights.is_empty() {
        return Err(Error::invalid("one weight per collocation time is required"));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::invalid(format!("weights must be positive and finite, got {w}")));
    }
    let total: f64 = weights.iter().sum();
    let n = fields[0].len();
    let mut mean = vec![0.0; n];
    for (row, &w) in fields.iter().zip(weights) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += w * v / total;
        }
    }
    Ok(fields.iter().map(|row| row.iter().zip(&mean).map(|(v, m)| v - m).collect()).collect())
}
