//! Verification suites behind the `verify` subcommand: adjoint identity,
//! Taylor remainder and all-at-once range invariance.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aao::{contraction_radius, AaoOperator, AaoPoint, CRhoSample};
use crate::fem::{AssembledOperators, Mesh2D};
use crate::forward::{BoundarySource, ForwardConfig, ParameterSet};
use crate::sensitivity::{forward_measurements, FrozenLinearization, MeasurementSet};
use crate::Result;

/// Random nodal direction of 1% relative size in `s` and `b`.
pub fn random_direction(x: &ParameterSet, eta_scale: f64, rng: &mut ChaCha8Rng) -> ParameterSet {
    let n = x.n_nodes();
    let mut d = ParameterSet { s: vec![0.0; n], b: vec![0.0; n], eta: vec![0.0; n] };
    for i in 0..n {
        d.s[i] = 0.01 * x.s[i] * rng.random_range(-1.0..1.0);
        d.b[i] = 0.01 * x.b[i] * rng.random_range(-1.0..1.0);
        d.eta[i] = eta_scale * rng.random_range(-1.0..1.0);
    }
    d
}

pub fn seeded_direction(x: &ParameterSet, eta_scale: f64, seed: u64) -> ParameterSet {
    random_direction(x, eta_scale, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn random_measurement(like: &MeasurementSet, rng: &mut ChaCha8Rng) -> MeasurementSet {
    let mut y = like.zeros_like();
    for tr in &mut y.experiments {
        for (m, v) in tr.values.iter_mut().enumerate() {
            for z in v.iter_mut() {
                let im = if m == 0 { 0.0 } else { rng.random_range(-1.0..1.0) };
                *z = crate::Complex64::new(rng.random_range(-1.0..1.0), im);
            }
        }
    }
    y
}

/// Max over `pairs` random `(d, y)` of `|⟨Kd, y⟩ − ⟨d, K*y⟩| / (‖Kd‖‖y‖)`.
pub fn adjoint_check(lin: &FrozenLinearization, x: &ParameterSet, pairs: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let d = random_direction(x, 1e-4, &mut rng);
        let kd = lin.apply_k(&d)?;
        let y = random_measurement(&kd, &mut rng);
        let lhs = lin.space().inner(&kd, &y);
        let rhs = lin.parameter_inner(&d, &lin.apply_kstar(&y)?);
        let den = lin.space().norm(&kd) * lin.space().norm(&y);
        if den > 0.0 {
            worst = worst.max((lhs - rhs).abs() / den);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct TaylorResult {
    pub eps: Vec<f64>,
    pub remainders: Vec<f64>,
    /// Least-squares slope of `log r(ε)` against `log ε`.
    pub slope: f64,
}

/// `‖F(x + εd) − F(x) − ε K d‖` over `eps`.
pub fn taylor_check(
    mesh: &Mesh2D,
    ops: &AssembledOperators,
    x: &ParameterSet,
    d: &ParameterSet,
    sources: &[BoundarySource],
    cfg: &ForwardConfig,
    eps: &[f64],
) -> Result<TaylorResult> {
    let (lin, _) = FrozenLinearization::new(mesh, ops, x, sources, cfg)?;
    let (f0, _) = forward_measurements(mesh, ops, x, sources, cfg)?;
    let kd = lin.apply_k(d)?;
    let remainders: Vec<f64> = eps
        .par_iter()
        .map(|&e| {
            let (fe, _) = forward_measurements(mesh, ops, &x.axpy(e, d), sources, cfg)?;
            Ok(lin.space().norm(&fe.sub(&f0)?.sub(&kd.scale(e))?))
        })
        .collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> = eps.iter().zip(&remainders).map(|(e, r)| (e.ln(), r.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(TaylorResult { eps: eps.to_vec(), remainders, slope: sxy / sxx })
}

#[derive(Debug, Clone)]
pub struct RangeResult {
    pub max_residual: f64,
    pub curve: Vec<CRhoSample>,
    pub radius: f64,
}

/// Range-invariance residual over `pairs` random perturbations of the lifted
/// reference point and the contraction-ratio curve along a smooth direction.
pub fn range_check(
    mesh: &Mesh2D,
    ops: &AssembledOperators,
    x0: &ParameterSet,
    sources: &[BoundarySource],
    cfg: &ForwardConfig,
    pairs: usize,
    seed: u64,
) -> Result<RangeResult> {
    let op = AaoOperator::new(mesh, ops)?;
    let (_, sols) = forward_measurements(mesh, ops, x0, sources, cfg)?;
    let states: Vec<_> = sols.into_iter().map(|s| s.field).collect();
    let params = vec![x0.clone(); states.len()];
    let point = AaoPoint::lift(&params, &states, cfg.order)?;
    let cu = AaoOperator::default_cu(&point);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u_scale = states.iter().map(|u| u.max_abs()).fold(0.0, f64::max);
    let eta_scale = x0.eta.iter().fold(1e-4f64, |m, v| m.max(v.abs()));
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let mut dir = point.clone();
        for (e, base) in dir.experiments.iter_mut().zip(&point.experiments) {
            for (row, b) in e.s.iter_mut().zip(&base.s) {
                row.iter_mut().zip(b).for_each(|(v, s)| *v = 0.01 * s * rng.random_range(-1.0..1.0));
            }
            for (row, b) in e.b.iter_mut().zip(&base.b) {
                row.iter_mut().zip(b).for_each(|(v, s)| *v = 0.01 * s * rng.random_range(-1.0..1.0));
            }
            e.eta.iter_mut().flatten().for_each(|v| *v = 0.01 * eta_scale * rng.random_range(-1.0..1.0));
            e.u.iter_mut().flatten().for_each(|v| *v = 0.01 * u_scale * rng.random_range(-1.0..1.0));
        }
        let x = point.axpy(1.0, &dir);
        worst = worst.max(op.check_range_invariance(&x, &point, cu)?);
    }
    let mut smooth = point.clone();
    for e in &mut smooth.experiments {
        for row in e.u.iter_mut() {
            for (i, v) in row.iter_mut().enumerate() {
                let [px, py] = mesh.nodes[i];
                *v *= 1.0 + 5.0 * px * py;
            }
        }
        for f in [&mut e.s, &mut e.b, &mut e.eta] {
            f.iter_mut().flatten().for_each(|v| *v *= 0.5);
        }
    }
    let eps: Vec<f64> = (0..9).map(|k| 10f64.powi(-k)).collect();
    let curve = op.contraction_curve(&point, &smooth, &eps, cu)?;
    let radius = contraction_radius(&curve);
    Ok(RangeResult { max_residual: worst, curve, radius })
}

/// Machine-readable `key: value` report.
pub fn report(adjoint: Option<f64>, taylor: Option<&TaylorResult>, range: Option<&RangeResult>) -> String {
    let mut s = String::new();
    if let Some(a) = adjoint {
        let _ = writeln!(s, "adjoint_max_relative: {a:e}");
    }
    if let Some(t) = taylor {
        let _ = writeln!(s, "taylor_slope: {:.4}", t.slope);
        for (e, r) in t.eps.iter().zip(&t.remainders) {
            let _ = writeln!(s, "taylor_remainder[{e:e}]: {r:e}");
        }
    }
    if let Some(r) = range {
        let _ = writeln!(s, "range_invariance_max_relative: {:e}", r.max_residual);
        for c in &r.curve {
            let _ = writeln!(s, "c_rho[{:e}]: {:e}", c.distance, c.ratio);
        }
        let _ = writeln!(s, "c_rho_radius: {:e}", r.radius);
    }
    s
}
