//! Regularized frozen-Newton reconstruction of `(s, b, η)`.
//!
//! The iteration runs in scaled variables `ξ = S⁻¹(x − x⁰)` with a
//! per-component scale `S`, and with data divided by `‖h‖`. The parameter
//! inner product is the lumped-mass pairing normalized by the domain area.

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::fem::{AssembledOperators, Mesh2D};
use crate::forward::{BoundarySource, Component, ForwardConfig, ParameterSet};
use crate::sensitivity::{forward_measurements, FrozenLinearization, MeasurementSet, MeasurementSpace};
use crate::{Error, Result};

/// Adds white Gaussian noise rescaled to `‖noise‖ = level·‖meas‖` exactly.
pub fn add_noise(meas: &MeasurementSet, space: &MeasurementSpace, level: f64, seed: u64) -> Result<MeasurementSet> {
    if !(level >= 0.0) {
        return Err(Error::invalid(format!("noise level must be nonnegative, got {level}")));
    }
    if level == 0.0 {
        return Ok(meas.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = meas.clone();
    for t in noise.experiments.iter_mut() {
        for (m, v) in t.values.iter_mut().enumerate() {
            for z in v.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = if m == 0 { 0.0 } else { StandardNormal.sample(&mut rng) };
                *z = num_complex::Complex64::new(re, im);
            }
        }
    }
    let clean = space.norm(meas);
    let raw = space.norm(&noise);
    if raw == 0.0 || clean == 0.0 {
        return Ok(meas.clone());
    }
    let mut out = meas.add(&noise.scale(level * clean / raw))?;
    out.noise_level = level * clean;
    Ok(out)
}

/// Linear map between parameter increments and measurements together with
/// the inner products it is adjoint under.
pub trait LinearMap {
    fn apply(&self, d: &ParameterSet) -> Result<MeasurementSet>;
    fn adjoint(&self, y: &MeasurementSet) -> Result<ParameterSet>;
    fn param_inner(&self, a: &ParameterSet, b: &ParameterSet) -> f64;
    fn meas_inner(&self, a: &MeasurementSet, b: &MeasurementSet) -> f64;
}

impl LinearMap for FrozenLinearization {
    fn apply(&self, d: &ParameterSet) -> Result<MeasurementSet> {
        self.apply_k(d)
    }

    fn adjoint(&self, y: &MeasurementSet) -> Result<ParameterSet> {
        self.apply_kstar(y)
    }

    fn param_inner(&self, a: &ParameterSet, b: &ParameterSet) -> f64 {
        self.parameter_inner(a, b)
    }

    fn meas_inner(&self, a: &MeasurementSet, b: &MeasurementSet) -> f64 {
        self.space().inner(a, b)
    }
}

/// `K S / ‖h‖` with the parameter pairing divided by `area`.
pub struct ScaledMap<'a, L: LinearMap> {
    pub inner: &'a L,
    pub scales: [f64; 3],
    pub data_scale: f64,
    pub area: f64,
}

fn scale_components(d: &ParameterSet, f: [f64; 3]) -> ParameterSet {
    let m = |v: &[f64], t: f64| v.iter().map(|x| x * t).collect();
    ParameterSet { s: m(&d.s, f[0]), b: m(&d.b, f[1]), eta: m(&d.eta, f[2]) }
}

impl<L: LinearMap> LinearMap for ScaledMap<'_, L> {
    fn apply(&self, d: &ParameterSet) -> Result<MeasurementSet> {
        Ok(self.inner.apply(&scale_components(d, self.scales))?.scale(1.0 / self.data_scale))
    }

    fn adjoint(&self, y: &MeasurementSet) -> Result<ParameterSet> {
        let g = self.inner.adjoint(y)?;
        let f = self.area / self.data_scale;
        Ok(scale_components(&g, self.scales.map(|s| s * f)))
    }

    fn param_inner(&self, a: &ParameterSet, b: &ParameterSet) -> f64 {
        self.inner.param_inner(a, b) / self.area
    }

    fn meas_inner(&self, a: &MeasurementSet, b: &MeasurementSet) -> f64 {
        self.inner.meas_inner(a, b)
    }
}

fn lincomb(a: f64, x: &ParameterSet, b: f64, y: &ParameterSet) -> ParameterSet {
    let f = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| a * p + b * q).collect();
    ParameterSet { s: f(&x.s, &y.s), b: f(&x.b, &y.b), eta: f(&x.eta, &y.eta) }
}

pub fn zero_params(n: usize) -> ParameterSet {
    ParameterSet { s: vec![0.0; n], b: vec![0.0; n], eta: vec![0.0; n] }
}

/// Conjugate gradients for `(K*K + α) x = rhs`. Returns the solution and the
/// iteration count.
pub fn cg_normal<L: LinearMap>(
    op: &L,
    rhs: &ParameterSet,
    alpha: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(ParameterSet, usize)> {
    let n = rhs.n_nodes();
    let apply = |v: &ParameterSet| -> Result<ParameterSet> {
        let kv = op.apply(v)?;
        Ok(lincomb(1.0, &op.adjoint(&kv)?, alpha, v))
    };
    let mut x = zero_params(n);
    let mut r = rhs.clone();
    let mut p = r.clone();
    let rhs_norm = op.param_inner(rhs, rhs).sqrt();
    if rhs_norm == 0.0 {
        return Ok((x, 0));
    }
    let mut rr = op.param_inner(&r, &r);
    let mut history = Vec::new();
    for it in 0..max_iters {
        let rel = rr.sqrt() / rhs_norm;
        history.push(rel);
        if rel <= tol {
            return Ok((x, it));
        }
        let ap = apply(&p)?;
        let pap = op.param_inner(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::CgStagnation { iterations: it, last: rel, history });
        }
        let a = rr / pap;
        x = lincomb(1.0, &x, a, &p);
        r = lincomb(1.0, &r, -a, &ap);
        let rr_new = op.param_inner(&r, &r);
        p = lincomb(1.0, &r, rr_new / rr, &p);
        rr = rr_new;
    }
    let last = rr.sqrt() / rhs_norm;
    if last <= tol {
        return Ok((x, max_iters));
    }
    history.push(last);
    Err(Error::CgStagnation { iterations: max_iters, last, history })
}

/// One regularized frozen-Newton update
/// `x_{n+1} = x_n + (K*K + α)⁻¹ (K*(h − F(x_n)) + α (x⁰ − x_n))`.
pub fn newton_step<L: LinearMap>(
    op: &L,
    x_n: &ParameterSet,
    residual: &MeasurementSet,
    alpha: f64,
    x0: &ParameterSet,
    cg_tol: f64,
    cg_max_iters: usize,
) -> Result<(ParameterSet, usize)> {
    let rhs = lincomb(1.0, &op.adjoint(residual)?, alpha, &lincomb(1.0, x0, -1.0, x_n));
    let (step, iters) = cg_normal(op, &rhs, alpha, cg_tol, cg_max_iters)?;
    Ok((lincomb(1.0, x_n, 1.0, &step), iters))
}

/// Largest `n ≤ max_iters` with `δ²/α_n ≤ τ`; `max_iters` when `δ = 0`.
pub fn stopping_index(delta: f64, alpha0: f64, q: f64, tau: f64, max_iters: usize) -> usize {
    if delta <= 0.0 {
        return max_iters;
    }
    let mut n = 0;
    while n < max_iters && delta * delta / (alpha0 * q.powi(n as i32 + 1)) <= tau {
        n += 1;
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stopping {
    FixedCount,
    ScheduleRule,
}

/// How the per-component scales of the iteration variables are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    /// `s⁰`, `b⁰` (domain means) and `eta_scale`.
    Reference,
    /// Each component block of the normalized `K` gets unit operator norm.
    OperatorNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    pub alpha0: f64,
    pub q: f64,
    pub max_iters: usize,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Relative noise level `δ/‖h‖` used by the stopping rule.
    pub delta: f64,
    pub stopping: Stopping,
    /// Threshold `τ` of the rule `δ²/α_n ≤ τ`.
    pub tau: f64,
    pub scaling: Scaling,
    /// Scale of `η` under [`Scaling::Reference`].
    pub eta_scale: f64,
    /// Components that are reconstructed (`[s, b, η]`).
    pub active: [bool; 3],
    pub keep_snapshots: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            alpha0: 1.0,
            q: 0.6,
            max_iters: 20,
            cg_tol: 1e-8,
            cg_max_iters: 200,
            delta: 0.0,
            stopping: Stopping::FixedCount,
            tau: 6e-4,
            scaling: Scaling::OperatorNorm,
            eta_scale: 1e-4,
            active: [true; 3],
            keep_snapshots: true,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0) {
            return Err(Error::Config(format!("alpha0 must be positive, got {}", self.alpha0)));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::Config(format!("q must lie in (0, 1), got {}", self.q)));
        }
        if !(self.eta_scale > 0.0) {
            return Err(Error::Config("eta_scale must be positive".into()));
        }
        Ok(())
    }

    pub fn alpha(&self, n: usize) -> f64 {
        self.alpha0 * self.q.powi(n as i32)
    }

    pub fn iteration_budget(&self) -> usize {
        match self.stopping {
            Stopping::FixedCount => self.max_iters,
            Stopping::ScheduleRule => stopping_index(self.delta, self.alpha0, self.q, self.tau, self.max_iters),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub j: f64,
    pub misfit: f64,
    pub alpha: f64,
    pub cg_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIters,
    StoppingRule,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct NewtonHistory {
    pub records: Vec<IterationRecord>,
    pub snapshots: Vec<ParameterSet>,
    pub stop: StopReason,
    /// Relative misfit of the returned iterate.
    pub final_misfit: f64,
}

impl NewtonHistory {
    pub fn log_csv(&self) -> String {
        let mut s = String::from("iter,J,misfit,alpha,cg_iters\n");
        for r in &self.records {
            s.push_str(&format!("{},{:e},{:e},{:e},{}\n", r.iter, r.j, r.misfit, r.alpha, r.cg_iters));
        }
        s
    }
}

/// Power-iteration estimate of `‖K P_c‖` for one parameter component.
pub fn block_norm<L: LinearMap>(op: &L, n: usize, c: Component, iters: usize) -> Result<f64> {
    let restrict = |d: &mut ParameterSet| {
        for other in Component::ALL {
            if other != c {
                d.component_mut(other).iter_mut().for_each(|v| *v = 0.0);
            }
        }
    };
    let mut v = zero_params(n);
    for (i, x) in v.component_mut(c).iter_mut().enumerate() {
        *x = 1.0 + 0.1 * ((i * 7919) % 13) as f64;
    }
    let mut lambda = 0.0;
    for _ in 0..iters {
        let nv = op.param_inner(&v, &v).sqrt();
        if nv == 0.0 {
            return Ok(0.0);
        }
        v = lincomb(1.0 / nv, &v, 0.0, &v);
        let mut w = op.adjoint(&op.apply(&v)?)?;
        restrict(&mut w);
        lambda = op.param_inner(&v, &w);
        v = w;
    }
    Ok(lambda.max(0.0).sqrt())
}

fn to_physical(x0: &ParameterSet, xi: &ParameterSet, scales: [f64; 3]) -> ParameterSet {
    x0.axpy(1.0, &scale_components(xi, scales))
}

/// Runs the frozen Newton iteration from `x0` against `data`.
pub fn run_reconstruction(
    mesh: &Mesh2D,
    ops: &AssembledOperators,
    config: &NewtonConfig,
    forward: &ForwardConfig,
    data: &MeasurementSet,
    sources: &[BoundarySource],
    x0: &ParameterSet,
) -> Result<(ParameterSet, NewtonHistory)> {
    config.validate()?;
    let (lin, sols0) = FrozenLinearization::new(mesh, ops, x0, sources, forward)?;
    let space = lin.space().clone();
    let data_scale = space.norm(data);
    if data_scale == 0.0 {
        return Err(Error::invalid("measurement data are identically zero"));
    }
    let mean = |v: &[f64]| v.iter().zip(&ops.lumped).map(|(a, w)| a * w).sum::<f64>() / mesh.total_area();
    let mut scales = [mean(&x0.s), mean(&x0.b), config.eta_scale];
    if config.scaling == Scaling::OperatorNorm {
        let unit = ScaledMap { inner: &lin, scales: [1.0; 3], data_scale, area: mesh.total_area() };
        for c in Component::ALL {
            if config.active[c.index()] {
                let norm = block_norm(&unit, mesh.n_nodes(), c, 20)?;
                if norm > 0.0 {
                    scales[c.index()] = 1.0 / norm;
                }
            }
        }
    }
    for c in Component::ALL {
        if !config.active[c.index()] {
            scales[c.index()] = 0.0;
        }
    }
    let op = ScaledMap { inner: &lin, scales, data_scale, area: mesh.total_area() };
    let n = mesh.n_nodes();
    let budget = config.iteration_budget();
    info!("frozen Newton: {budget} iterations, scales {scales:?}, tau {:e}", config.tau);

    let observe_all = |sols: &[crate::forward::ForwardSolution]| -> Result<MeasurementSet> {
        let sets: Vec<MeasurementSet> = sols
            .iter()
            .map(|s| crate::sensitivity::observe(&s.field, mesh))
            .collect::<Result<_>>()?;
        MeasurementSet::concat(&sets)
    };
    let zero = zero_params(n);
    let mut xi = zero.clone();
    let mut x = x0.clone();
    let mut predicted = observe_all(&sols0)?;
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut rises = 0;
    let mut stop = if config.stopping == Stopping::ScheduleRule && budget < config.max_iters {
        StopReason::StoppingRule
    } else {
        StopReason::MaxIters
    };
    let mut misfit = space.norm(&data.sub(&predicted)?) / data_scale;
    for it in 0..budget {
        let alpha = config.alpha(it);
        let residual = data.sub(&predicted)?.scale(1.0 / data_scale);
        let (xi_next, cg_iters) =
            newton_step(&op, &xi, &residual, alpha, &zero, config.cg_tol, config.cg_max_iters)?;
        let step = lincomb(1.0, &xi_next, -1.0, &xi);
        let lin_res = op.apply(&step)?.sub(&residual)?;
        let j = space.norm(&lin_res).powi(2) + alpha * op.param_inner(&xi_next, &xi_next);
        let x_next = to_physical(x0, &xi_next, scales);
        if let Err(e) = x_next.validate() {
            return Err(Error::Divergence { iteration: it, reason: e.to_string() });
        }
        let (pred_next, _) = forward_measurements(mesh, ops, &x_next, sources, forward)?;
        records.push(IterationRecord { iter: it, j, misfit, alpha, cg_iters });
        info!("iter {it}: J {j:e}, misfit {misfit:e}, alpha {alpha:e}, cg {cg_iters}");
        if let Some(prev) = records.iter().rev().nth(1) {
            rises = if j > prev.j * (1.0 + 1e-12) { rises + 1 } else { 0 };
        }
        xi = xi_next;
        x = x_next;
        predicted = pred_next;
        misfit = space.norm(&data.sub(&predicted)?) / data_scale;
        if config.keep_snapshots {
            snapshots.push(x.clone());
        }
        if rises >= 3 {
            warn!("J increased in three consecutive iterations; halting at {it}");
            stop = StopReason::Diverged;
            break;
        }
    }
    Ok((x, NewtonHistory { records, snapshots, stop, final_misfit: misfit }))
}
