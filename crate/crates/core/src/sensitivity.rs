//! Observation on Σ, the frozen linearized forward map `K` and its adjoint.
//!
//! Measurement pairing: `Σ_j Σ_m w_m Re(a_{j,m}^H B_Σ b_{j,m})` with `w_0 = 1`,
//! `w_m = ½`. Parameter pairing: `Σ_p d_p^T D e_p` with `D` the lumped mass.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::fem::{AssembledOperators, Csr, Mesh2D};
use crate::forward::{
    solve_forward_with, BoundarySource, Component, ForwardConfig, ForwardSolution, HarmonicSystems, ParameterSet,
};
use crate::harmonics::{quadratic_derivative, quadratic_derivative_adjoint, quadratic_terms, HarmonicField};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Harmonic traces of one experiment on the Σ nodes, `values[m][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub omega: f64,
    pub values: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub sigma_nodes: Vec<usize>,
    pub experiments: Vec<Trace>,
    /// Absolute noise level `δ` in the measurement norm.
    pub noise_level: f64,
}

impl MeasurementSet {
    pub fn zeros_like(&self) -> Self {
        self.map(|_| ZERO)
    }

    fn map(&self, mut f: impl FnMut(Complex64) -> Complex64) -> Self {
        let mut out = self.clone();
        for z in out.experiments.iter_mut().flat_map(|t| t.values.iter_mut().flatten()) {
            *z = f(*z);
        }
        out
    }

    fn zip(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.sigma_nodes != other.sigma_nodes || self.experiments.len() != other.experiments.len() {
            return Err(Error::Mismatch("measurement sets have different layouts".into()));
        }
        let mut out = self.clone();
        for (t, o) in out.experiments.iter_mut().zip(&other.experiments) {
            if t.values.len() != o.values.len() {
                return Err(Error::Mismatch("measurement orders differ".into()));
            }
            for (a, b) in t.values.iter_mut().zip(&o.values) {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = f(*x, *y);
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn scale(&self, t: f64) -> Self {
        self.map(|z| z * t)
    }

    /// Concatenates experiments of several single-experiment sets.
    pub fn concat(sets: &[MeasurementSet]) -> Result<Self> {
        let first = sets.first().ok_or_else(|| Error::invalid("no measurement sets"))?;
        let mut out = MeasurementSet {
            sigma_nodes: first.sigma_nodes.clone(),
            experiments: Vec::new(),
            noise_level: 0.0,
        };
        for s in sets {
            if s.sigma_nodes != out.sigma_nodes {
                return Err(Error::Mismatch("measurement sets use different arcs".into()));
            }
            out.experiments.extend(s.experiments.iter().cloned());
        }
        Ok(out)
    }
}

/// Restriction of every harmonic of `u` to the Σ nodes.
pub fn observe(u: &HarmonicField, mesh: &Mesh2D) -> Result<MeasurementSet> {
    let nodes = mesh.sigma_nodes();
    if nodes.is_empty() {
        return Err(Error::EmptySigma);
    }
    if u.n_nodes() != mesh.n_nodes() {
        return Err(Error::invalid("field is not defined on this mesh"));
    }
    let values = u.coeffs.iter().map(|c| nodes.iter().map(|&i| c[i]).collect()).collect();
    Ok(MeasurementSet {
        sigma_nodes: nodes,
        experiments: vec![Trace { omega: u.omega, values }],
        noise_level: 0.0,
    })
}

/// Σ boundary mass restricted to the Σ nodes, with the harmonic pairing.
#[derive(Debug, Clone)]
pub struct MeasurementSpace {
    pub nodes: Vec<usize>,
    pub mass: Csr<f64>,
}

pub fn harmonic_weight(m: usize) -> f64 {
    if m == 0 {
        1.0
    } else {
        0.5
    }
}

impl MeasurementSpace {
    pub fn new(mesh: &Mesh2D, ops: &AssembledOperators) -> Result<Self> {
        let nodes = mesh.sigma_nodes();
        if nodes.is_empty() {
            return Err(Error::EmptySigma);
        }
        let mut local = vec![usize::MAX; mesh.n_nodes()];
        for (k, &i) in nodes.iter().enumerate() {
            local[i] = k;
        }
        let trip: Vec<(usize, usize, f64)> = ops
            .sigma_mass
            .triplets()
            .into_iter()
            .filter(|&(i, j, _)| local[i] != usize::MAX && local[j] != usize::MAX)
            .map(|(i, j, v)| (local[i], local[j], v))
            .collect();
        Ok(MeasurementSpace { mass: Csr::from_triplets(nodes.len(), &trip), nodes })
    }

    pub fn inner(&self, a: &MeasurementSet, b: &MeasurementSet) -> f64 {
        let mut acc = 0.0;
        for (ta, tb) in a.experiments.iter().zip(&b.experiments) {
            for (m, (va, vb)) in ta.values.iter().zip(&tb.values).enumerate() {
                let mb = self.mass.matvec_c(vb);
                let d: f64 = va.iter().zip(&mb).map(|(x, y)| (x.conj() * y).re).sum();
                acc += harmonic_weight(m) * d;
            }
        }
        acc
    }

    pub fn norm(&self, a: &MeasurementSet) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }
}

/// `Σ_p d_p^T D e_p`.
pub fn parameter_inner(lumped: &[f64], a: &ParameterSet, b: &ParameterSet) -> f64 {
    Component::ALL
        .iter()
        .map(|&c| {
            a.component(c)
                .iter()
                .zip(b.component(c))
                .zip(lumped)
                .map(|((x, y), w)| x * y * w)
                .sum::<f64>()
        })
        .sum()
}

/// Nonlinear forward map: solves every experiment and observes on Σ.
pub fn forward_measurements(
    mesh: &Mesh2D,
    ops: &AssembledOperators,
    params: &ParameterSet,
    sources: &[BoundarySource],
    cfg: &ForwardConfig,
) -> Result<(MeasurementSet, Vec<ForwardSolution>)> {
    let sols: Vec<Result<ForwardSolution>> = sources
        .par_iter()
        .map(|src| crate::forward::solve_forward(mesh, ops, params, src, cfg))
        .collect();
    let sols: Vec<ForwardSolution> = sols.into_iter().collect::<Result<_>>()?;
    let sets: Vec<MeasurementSet> = sols.iter().map(|s| observe(&s.field, mesh)).collect::<Result<_>>()?;
    Ok((MeasurementSet::concat(&sets)?, sols))
}

struct FrozenExperiment {
    u0: HarmonicField,
    q0: Vec<Vec<Complex64>>,
    sys: HarmonicSystems,
}

/// `K = F′(x⁰)` with all per-harmonic factorizations cached.
pub struct FrozenLinearization {
    lumped: Vec<f64>,
    space: MeasurementSpace,
    experiments: Vec<FrozenExperiment>,
    coupled: bool,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
}

impl FrozenLinearization {
    /// Solves the forward problems at `params0` and freezes the linearization.
    pub fn new(
        mesh: &Mesh2D,
        ops: &AssembledOperators,
        params0: &ParameterSet,
        sources: &[BoundarySource],
        cfg: &ForwardConfig,
    ) -> Result<(Self, Vec<ForwardSolution>)> {
        params0.validate()?;
        let built: Vec<Result<(FrozenExperiment, ForwardSolution)>> = sources
            .par_iter()
            .map(|src| {
                let sys = HarmonicSystems::new(mesh, ops, params0, src.omega, cfg.order, cfg.kappa)?;
                let sol = solve_forward_with(ops, params0, src, cfg, &sys)?;
                let q0 = quadratic_terms(&sol.field);
                Ok((FrozenExperiment { u0: sol.field.clone(), q0, sys }, sol))
            })
            .collect();
        let mut experiments = Vec::new();
        let mut sols = Vec::new();
        for r in built {
            let (e, s) = r?;
            experiments.push(e);
            sols.push(s);
        }
        let lin = FrozenLinearization {
            lumped: ops.lumped.clone(),
            space: MeasurementSpace::new(mesh, ops)?,
            experiments,
            coupled: params0.eta.iter().any(|&e| e != 0.0),
            inner_tol: 1e-15,
            inner_max_iters: 200,
        };
        Ok((lin, sols))
    }

    pub fn space(&self) -> &MeasurementSpace {
        &self.space
    }

    pub fn lumped(&self) -> &[f64] {
        &self.lumped
    }

    pub fn n_nodes(&self) -> usize {
        self.lumped.len()
    }

    pub fn n_experiments(&self) -> usize {
        self.experiments.len()
    }

    pub fn reference_state(&self, j: usize) -> &HarmonicField {
        &self.experiments[j].u0
    }

    fn check_params(&self, d: &ParameterSet) -> Result<()> {
        let n = self.n_nodes();
        if d.s.len() != n || d.b.len() != n || d.eta.len() != n {
            return Err(Error::invalid("increment length does not match mesh"));
        }
        if d.s.iter().chain(&d.b).chain(&d.eta).any(|v| !v.is_finite()) {
            return Err(Error::invalid("increment contains non-finite values"));
        }
        Ok(())
    }

    /// Solves `A_m x_m + D c_m dQ_m(x) = rhs_m` (`x_0 = 0`).
    fn solve_linearized(&self, e: &FrozenExperiment, rhs: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
        let order = e.sys.order();
        let n = self.n_nodes();
        let solve = |coupling: Option<&Vec<Vec<Complex64>>>| -> Result<Vec<Vec<Complex64>>> {
            let mut out = vec![vec![ZERO; n]; order + 1];
            for m in 1..=order {
                let load: Vec<Complex64> = match coupling {
                    None => rhs[m].clone(),
                    Some(dq) => {
                        let c = &e.sys.coeffs[m].c;
                        (0..n).map(|i| rhs[m][i] - self.lumped[i] * c[i] * dq[m][i]).collect()
                    }
                };
                out[m] = e.sys.solvers[m].solve(&load)?;
            }
            Ok(out)
        };
        let mut x = solve(None)?;
        if !self.coupled {
            return Ok(x);
        }
        let mut history = Vec::new();
        for _ in 0..self.inner_max_iters {
            let dq = quadratic_derivative(&e.u0.coeffs, &x);
            let next = solve(Some(&dq))?;
            let change = diff_norm(&next, &x) / norm_all(&next).max(f64::MIN_POSITIVE);
            history.push(change);
            x = next;
            if change <= self.inner_tol || norm_all(&x) == 0.0 {
                return Ok(x);
            }
            if history.len() > 3 && change >= history[history.len() - 4] {
                break;
            }
        }
        let last = *history.last().unwrap();
        if last <= 1e-12 {
            return Ok(x);
        }
        Err(Error::NonConvergence { iterations: history.len(), history, last })
    }

    /// Solves the adjoint system `conj(A_m) λ_m + [C* λ]_m = z_m`.
    fn solve_adjoint(&self, e: &FrozenExperiment, z: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
        let order = e.sys.order();
        let n = self.n_nodes();
        let solve = |coupling: Option<&Vec<Vec<Complex64>>>| -> Result<Vec<Vec<Complex64>>> {
            let mut out = vec![vec![ZERO; n]; order + 1];
            for m in 1..=order {
                let load: Vec<Complex64> = match coupling {
                    None => z[m].clone(),
                    Some(g) => (0..n).map(|i| z[m][i] - g[m][i]).collect(),
                };
                out[m] = e.sys.solvers[m].solve_adjoint(&load)?;
            }
            Ok(out)
        };
        let mut lam = solve(None)?;
        if !self.coupled {
            return Ok(lam);
        }
        let mut history = Vec::new();
        for _ in 0..self.inner_max_iters {
            let mu: Vec<Vec<Complex64>> = (0..=order)
                .map(|m| {
                    if m == 0 {
                        return vec![ZERO; n];
                    }
                    let c = &e.sys.coeffs[m].c;
                    (0..n).map(|i| c[i].conj() * self.lumped[i] * lam[m][i]).collect()
                })
                .collect();
            let g = quadratic_derivative_adjoint(&e.u0.coeffs, &mu);
            let next = solve(Some(&g))?;
            let change = diff_norm(&next, &lam) / norm_all(&next).max(f64::MIN_POSITIVE);
            history.push(change);
            lam = next;
            if change <= self.inner_tol || norm_all(&lam) == 0.0 {
                return Ok(lam);
            }
            if history.len() > 3 && change >= history[history.len() - 4] {
                break;
            }
        }
        let last = *history.last().unwrap();
        if last <= 1e-12 {
            return Ok(lam);
        }
        Err(Error::NonConvergence { iterations: history.len(), history, last })
    }

    /// State increments `du_j` for every experiment.
    pub fn linearized_states(&self, d: &ParameterSet) -> Result<Vec<Vec<Vec<Complex64>>>> {
        self.check_params(d)?;
        self.experiments
            .par_iter()
            .map(|e| {
                let order = e.sys.order();
                let n = self.n_nodes();
                let mut rhs = vec![vec![ZERO; n]; order + 1];
                for m in 1..=order {
                    let hc = &e.sys.coeffs[m];
                    let u = &e.u0.coeffs[m];
                    let q = &e.q0[m];
                    for i in 0..n {
                        let dk = hc.dk_ds[i] * d.s[i] + hc.dk_db[i] * d.b[i];
                        let dc = hc.dc_ds[i] * d.s[i] + hc.dc_deta[i] * d.eta[i];
                        rhs[m][i] = self.lumped[i] * (dk * u[i] - dc * q[i]);
                    }
                }
                self.solve_linearized(e, &rhs)
            })
            .collect()
    }

    pub fn apply_k(&self, d: &ParameterSet) -> Result<MeasurementSet> {
        let states = self.linearized_states(d)?;
        let nodes = &self.space.nodes;
        Ok(MeasurementSet {
            sigma_nodes: nodes.clone(),
            experiments: self
                .experiments
                .iter()
                .zip(states)
                .map(|(e, du)| Trace {
                    omega: e.u0.omega,
                    values: du.iter().map(|v| nodes.iter().map(|&i| v[i]).collect()).collect(),
                })
                .collect(),
            noise_level: 0.0,
        })
    }

    pub fn apply_kstar(&self, y: &MeasurementSet) -> Result<ParameterSet> {
        if y.experiments.len() != self.experiments.len() || y.sigma_nodes != self.space.nodes {
            return Err(Error::Mismatch("measurement layout does not match the linearization".into()));
        }
        let n = self.n_nodes();
        let parts: Vec<Result<[Vec<f64>; 3]>> = self
            .experiments
            .par_iter()
            .zip(&y.experiments)
            .map(|(e, t)| {
                let order = e.sys.order();
                if t.values.len() != order + 1 {
                    return Err(Error::Mismatch("measurement order does not match".into()));
                }
                let mut z = vec![vec![ZERO; n]; order + 1];
                for m in 1..=order {
                    let bz = self.space.mass.matvec_c(&t.values[m]);
                    for (k, &i) in self.space.nodes.iter().enumerate() {
                        z[m][i] = harmonic_weight(m) * bz[k];
                    }
                }
                let lam = self.solve_adjoint(e, &z)?;
                let mut g = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
                for m in 1..=order {
                    let hc = &e.sys.coeffs[m];
                    let u = &e.u0.coeffs[m];
                    let q = &e.q0[m];
                    for i in 0..n {
                        let l = lam[m][i].conj();
                        g[0][i] += (l * (hc.dk_ds[i] * u[i] - hc.dc_ds[i] * q[i])).re;
                        g[1][i] += (l * hc.dk_db[i] * u[i]).re;
                        g[2][i] -= (l * hc.dc_deta[i] * q[i]).re;
                    }
                }
                Ok(g)
            })
            .collect();
        let mut out = ParameterSet { s: vec![0.0; n], b: vec![0.0; n], eta: vec![0.0; n] };
        for p in parts {
            let [gs, gb, ge] = p?;
            for i in 0..n {
                out.s[i] += gs[i];
                out.b[i] += gb[i];
                out.eta[i] += ge[i];
            }
        }
        Ok(out)
    }

    pub fn parameter_inner(&self, a: &ParameterSet, b: &ParameterSet) -> f64 {
        parameter_inner(&self.lumped, a, b)
    }
}

fn norm_all(v: &[Vec<Complex64>]) -> f64 {
    v.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn diff_norm(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}
