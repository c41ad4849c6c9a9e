//! Nonlinear periodic Westervelt forward solver.
//!
//! Per harmonic `m ≥ 1` the discrete system reads
//! `(K + γB − D k_m) û_m = B ĝ_m − D c_m Q_m(û)` with
//! `k_m = ω²m² b/(s + imω)`, `c_m = η ω²m²/(2(s + imω))` and `D` the lumped
//! mass; harmonic 0 is the Robin–Laplace problem `(K + γB) û_0 = B ĝ_0`.

use std::f64::consts::PI;

use log::{debug, warn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fem::{AssembledOperators, MassTreatment, Mesh2D, RobinHelmholtz};
use crate::harmonics::{collocation_size, collocation_times, quadratic_terms, HarmonicField};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Which of the three coefficients a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    S,
    B,
    Eta,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::S, Component::B, Component::Eta];

    pub fn name(self) -> &'static str {
        match self {
            Component::S => "s",
            Component::B => "b",
            Component::Eta => "eta",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Nodal PDE coefficients `(s, b, η)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub s: Vec<f64>,
    pub b: Vec<f64>,
    pub eta: Vec<f64>,
}

impl ParameterSet {
    pub fn new(s: Vec<f64>, b: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        let p = ParameterSet { s, b, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn constant(n: usize, s: f64, b: f64, eta: f64) -> Self {
        ParameterSet { s: vec![s; n], b: vec![b; n], eta: vec![eta; n] }
    }

    pub fn n_nodes(&self) -> usize {
        self.s.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.s.len();
        if self.b.len() != n || self.eta.len() != n {
            return Err(Error::invalid("parameter fields differ in length"));
        }
        for i in 0..n {
            if !(self.s[i] > 0.0 && self.s[i].is_finite()) {
                return Err(Error::invalid(format!("s = {} at node {i} must be positive", self.s[i])));
            }
            if !(self.b[i] > 0.0 && self.b[i].is_finite()) {
                return Err(Error::invalid(format!("b = {} at node {i} must be positive", self.b[i])));
            }
            if !self.eta[i].is_finite() {
                return Err(Error::invalid(format!("eta not finite at node {i}")));
            }
        }
        Ok(())
    }

    pub fn component(&self, c: Component) -> &[f64] {
        match c {
            Component::S => &self.s,
            Component::B => &self.b,
            Component::Eta => &self.eta,
        }
    }

    pub fn component_mut(&mut self, c: Component) -> &mut Vec<f64> {
        match c {
            Component::S => &mut self.s,
            Component::B => &mut self.b,
            Component::Eta => &mut self.eta,
        }
    }

    /// `self + t·d` componentwise (no validation).
    pub fn axpy(&self, t: f64, d: &ParameterSet) -> ParameterSet {
        let f = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + t * y).collect();
        ParameterSet { s: f(&self.s, &d.s), b: f(&self.b, &d.b), eta: f(&self.eta, &d.eta) }
    }
}

/// Physical maps to PDE coefficients: `s = c²/𝔟`, `b = 1/𝔟`,
/// `η = (1 + B/(2A)) / (2 ρ₀ c² 𝔟)`.
pub fn transform_parameters(c: f64, frak_b: f64, ba: f64, rho0: f64) -> Result<(f64, f64, f64)> {
    if !(c > 0.0) || !(frak_b > 0.0) || !(rho0 > 0.0) {
        return Err(Error::invalid(format!(
            "sound speed, diffusivity and density must be positive (c = {c}, frak_b = {frak_b}, rho0 = {rho0})"
        )));
    }
    if !ba.is_finite() {
        return Err(Error::invalid("B/A must be finite"));
    }
    let s = c * c / frak_b;
    let b = 1.0 / frak_b;
    let eta = (1.0 + ba / 2.0) / (2.0 * rho0 * c * c * frak_b);
    Ok((s, b, eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiKind {
    /// `ψ(t) = cos(2πt/T) + 𝔞`.
    #[default]
    CosOffset,
    /// `2 (cos(2πt/T) + 𝔞)`.
    Doubled,
}

impl PsiKind {
    pub fn factor(self) -> f64 {
        match self {
            PsiKind::CosOffset => 1.0,
            PsiKind::Doubled => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SpatialProfile {
    /// Unit Robin data on the whole boundary.
    #[default]
    Constant,
    /// Robin trace of `φ = (r/R)^n cos(nθ)`, i.e. `(γ + n/R) cos(nθ)`.
    AngularMode { order: u32 },
}

/// One experiment's boundary excitation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpec {
    pub period: f64,
    pub a_offset: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub psi: PsiKind,
    #[serde(default)]
    pub profile: SpatialProfile,
}

impl ExcitationSpec {
    pub fn new(period: f64, a_offset: f64, amplitude: f64) -> Self {
        ExcitationSpec { period, a_offset, amplitude, psi: PsiKind::CosOffset, profile: SpatialProfile::Constant }
    }

    pub fn doubled(&self) -> Self {
        ExcitationSpec { psi: PsiKind::Doubled, ..self.clone() }
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) {
            return Err(Error::invalid(format!("period must be positive, got {}", self.period)));
        }
        if !(self.amplitude >= 0.0) {
            return Err(Error::invalid(format!("amplitude must be nonnegative, got {}", self.amplitude)));
        }
        let a = self.a_offset;
        if !(a < -1.0 || a > -0.25) {
            return Err(Error::invalid(format!("offset {a} outside (-inf, -1) U (-1/4, inf)")));
        }
        Ok(())
    }
}

/// Nodal Robin data per harmonic, `g[m][node]`; zero off the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySource {
    pub omega: f64,
    pub g: Vec<Vec<Complex64>>,
}

impl BoundarySource {
    pub fn order(&self) -> usize {
        self.g.len() - 1
    }

    pub fn scaled(&self, t: f64) -> Self {
        BoundarySource {
            omega: self.omega,
            g: self.g.iter().map(|v| v.iter().map(|z| z * t).collect()).collect(),
        }
    }
}

pub fn build_source(spec: &ExcitationSpec, mesh: &Mesh2D, gamma: f64, order: usize) -> Result<BoundarySource> {
    spec.validate()?;
    if order < 2 {
        return Err(Error::invalid("truncation order must be at least 2"));
    }
    let n = mesh.n_nodes();
    let radius = mesh
        .boundary_nodes()
        .iter()
        .map(|&i| mesh.nodes[i][0].hypot(mesh.nodes[i][1]))
        .fold(0.0, f64::max);
    let mut shape = vec![0.0; n];
    for i in mesh.boundary_nodes() {
        let [x, y] = mesh.nodes[i];
        shape[i] = match spec.profile {
            SpatialProfile::Constant => 1.0,
            SpatialProfile::AngularMode { order } => {
                let k = order as f64;
                (gamma + k / radius) * (k * y.atan2(x)).cos()
            }
        };
    }
    if shape.iter().all(|v| *v == 0.0) && spec.amplitude > 0.0 {
        warn!("spatial profile has vanishing Robin trace; excitation is zero");
    }
    let scale = spec.amplitude * spec.psi.factor();
    let mut g = vec![vec![ZERO; n]; order + 1];
    for i in 0..n {
        g[0][i] = Complex64::new(scale * spec.a_offset * shape[i], 0.0);
        g[1][i] = Complex64::new(scale * shape[i], 0.0);
    }
    Ok(BoundarySource { omega: spec.omega(), g })
}

/// How the Helmholtz coefficients `k_m`, `c_m` see `s` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum KappaMode {
    /// Local nodal coefficients.
    #[default]
    Local,
    /// Background values `(s, b)` frozen inside `k_m` and `c_m`.
    Background { s: f64, b: f64 },
}

/// Nodal coefficients of harmonic `m` and their partial derivatives.
#[derive(Debug, Clone)]
pub struct HarmonicCoefficients {
    pub k: Vec<Complex64>,
    pub c: Vec<Complex64>,
    pub dk_ds: Vec<Complex64>,
    pub dk_db: Vec<Complex64>,
    pub dc_ds: Vec<Complex64>,
    pub dc_deta: Vec<Complex64>,
}

pub fn harmonic_coefficients(params: &ParameterSet, omega: f64, m: usize, mode: KappaMode) -> HarmonicCoefficients {
    let n = params.n_nodes();
    let w = (omega * m as f64).powi(2);
    let iw = Complex64::new(0.0, omega * m as f64);
    let mut hc = HarmonicCoefficients {
        k: Vec::with_capacity(n),
        c: Vec::with_capacity(n),
        dk_ds: Vec::with_capacity(n),
        dk_db: Vec::with_capacity(n),
        dc_ds: Vec::with_capacity(n),
        dc_deta: Vec::with_capacity(n),
    };
    for i in 0..n {
        let eta = params.eta[i];
        let (s, b, local) = match mode {
            KappaMode::Local => (params.s[i], params.b[i], true),
            KappaMode::Background { s, b } => (s, b, false),
        };
        let inv = 1.0 / (s + iw);
        hc.k.push(w * b * inv);
        hc.c.push(0.5 * eta * w * inv);
        hc.dc_deta.push(0.5 * w * inv);
        if local {
            hc.dk_ds.push(-w * b * inv * inv);
            hc.dk_db.push(w * inv);
            hc.dc_ds.push(-0.5 * eta * w * inv * inv);
        } else {
            hc.dk_ds.push(ZERO);
            hc.dk_db.push(ZERO);
            hc.dc_ds.push(ZERO);
        }
    }
    hc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardConfig {
    pub order: usize,
    pub fp_tol: f64,
    pub max_fp_iters: usize,
    pub kappa: KappaMode,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        ForwardConfig { order: 4, fp_tol: 1e-10, max_fp_iters: 50, kappa: KappaMode::Local }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub field: HarmonicField,
    /// Relative equation residual after each fixed-point sweep.
    pub residual_history: Vec<f64>,
    pub degeneracy_margin: f64,
}

/// Factorized per-harmonic operators `K + γB − D k_m` for fixed parameters.
pub struct HarmonicSystems {
    pub coeffs: Vec<HarmonicCoefficients>,
    pub solvers: Vec<RobinHelmholtz>,
}

impl HarmonicSystems {
    pub fn new(
        mesh: &Mesh2D,
        ops: &AssembledOperators,
        params: &ParameterSet,
        omega: f64,
        order: usize,
        mode: KappaMode,
    ) -> Result<Self> {
        let built: Vec<Result<(HarmonicCoefficients, RobinHelmholtz)>> = (0..=order)
            .into_par_iter()
            .map(|m| {
                let hc = harmonic_coefficients(params, omega, m, mode);
                let solver = RobinHelmholtz::new(mesh, ops, &hc.k, MassTreatment::Lumped)?;
                Ok((hc, solver))
            })
            .collect();
        let mut coeffs = Vec::with_capacity(order + 1);
        let mut solvers = Vec::with_capacity(order + 1);
        for r in built {
            let (hc, s) = r?;
            coeffs.push(hc);
            solvers.push(s);
        }
        Ok(HarmonicSystems { coeffs, solvers })
    }

    pub fn order(&self) -> usize {
        self.solvers.len() - 1
    }
}

fn norm_all(v: &[Vec<Complex64>]) -> f64 {
    v.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `D c_m ∘ Q_m` for `m ≥ 1`; entry 0 is zero.
fn nonlinear_load(ops: &AssembledOperators, sys: &HarmonicSystems, q: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let n = ops.n();
    (0..=sys.order())
        .map(|m| {
            if m == 0 {
                return vec![ZERO; n];
            }
            let c = &sys.coeffs[m].c;
            (0..n).map(|i| ops.lumped[i] * c[i] * q[m][i]).collect()
        })
        .collect()
}

/// Coupled multiharmonic solve by fixed-point iteration started from the
/// `η = 0` solution.
pub fn solve_forward(
    mesh: &Mesh2D,
    ops: &AssembledOperators,
    params: &ParameterSet,
    source: &BoundarySource,
    cfg: &ForwardConfig,
) -> Result<ForwardSolution> {
    params.validate()?;
    if params.n_nodes() != ops.n() {
        return Err(Error::invalid("parameter length does not match mesh"));
    }
    if source.order() != cfg.order {
        return Err(Error::invalid(format!(
            "source order {} differs from solver order {}",
            source.order(),
            cfg.order
        )));
    }
    let sys = HarmonicSystems::new(mesh, ops, params, source.omega, cfg.order, cfg.kappa)?;
    solve_forward_with(ops, params, source, cfg, &sys)
}

/// As [`solve_forward`] but reusing prepared factorizations.
pub fn solve_forward_with(
    ops: &AssembledOperators,
    params: &ParameterSet,
    source: &BoundarySource,
    cfg: &ForwardConfig,
    sys: &HarmonicSystems,
) -> Result<ForwardSolution> {
    let n = ops.n();
    let order = cfg.order;
    let loads: Vec<Vec<Complex64>> = source.g.iter().map(|g| ops.boundary_mass.matvec_c(g)).collect();
    let load_norm = norm_all(&loads);
    let sweep = |nl: &[Vec<Complex64>]| -> Result<Vec<Vec<Complex64>>> {
        (0..=order)
            .into_par_iter()
            .map(|m| {
                let rhs: Vec<Complex64> = loads[m].iter().zip(&nl[m]).map(|(a, b)| a - b).collect();
                sys.solvers[m].solve(&rhs)
            })
            .collect()
    };
    let zero_nl = vec![vec![ZERO; n]; order + 1];
    let mut u = HarmonicField::from_coeffs(source.omega, sweep(&zero_nl)?)?;
    let mut history = Vec::new();
    if load_norm == 0.0 {
        let margin = degeneracy_margin(params, &u).0;
        return Ok(ForwardSolution { field: u, residual_history: vec![0.0], degeneracy_margin: margin });
    }
    let nonlinear = params.eta.iter().any(|&e| e != 0.0);
    let mut nl = nonlinear_load(ops, sys, &quadratic_terms(&u));
    let mut rises = 0;
    for it in 0..cfg.max_fp_iters {
        let (margin, node) = degeneracy_margin(params, &u);
        if margin <= 0.0 {
            return Err(Error::Degenerate { margin, node });
        }
        if !nonlinear {
            history.push(0.0);
            return Ok(ForwardSolution { field: u, residual_history: history, degeneracy_margin: margin });
        }
        let next = HarmonicField::from_coeffs(source.omega, sweep(&nl)?)?;
        let nl_next = nonlinear_load(ops, sys, &quadratic_terms(&next));
        let diff: Vec<Vec<Complex64>> = nl_next
            .iter()
            .zip(&nl)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        let res = norm_all(&diff) / load_norm;
        debug!("fixed-point sweep {it}: residual {res:e}");
        if !res.is_finite() {
            return Err(Error::NonConvergence { iterations: it + 1, last: res, history });
        }
        if let Some(&prev) = history.last() {
            rises = if res >= prev { rises + 1 } else { 0 };
        }
        history.push(res);
        u = next;
        nl = nl_next;
        if res <= cfg.fp_tol {
            let (margin, node) = degeneracy_margin(params, &u);
            if margin <= 0.0 {
                return Err(Error::Degenerate { margin, node });
            }
            return Ok(ForwardSolution { field: u, residual_history: history, degeneracy_margin: margin });
        }
        if rises >= 3 {
            break;
        }
    }
    let last = history.last().copied().unwrap_or(f64::NAN);
    Err(Error::NonConvergence { iterations: history.len(), history, last })
}

/// Halves the source until the fixed point converges without degeneracy.
/// Returns the solution and the applied amplitude factor.
pub fn solve_forward_with_backoff(
    mesh: &Mesh2D,
    ops: &AssembledOperators,
    params: &ParameterSet,
    source: &BoundarySource,
    cfg: &ForwardConfig,
    max_halvings: usize,
) -> Result<(ForwardSolution, f64)> {
    let sys = HarmonicSystems::new(mesh, ops, params, source.omega, cfg.order, cfg.kappa)?;
    let mut factor = 1.0;
    let mut attempt = 0;
    loop {
        let src = source.scaled(factor);
        match solve_forward_with(ops, params, &src, cfg, &sys) {
            Ok(sol) => return Ok((sol, factor)),
            Err(e @ (Error::Degenerate { .. } | Error::NonConvergence { .. })) if attempt < max_halvings => {
                warn!("forward solve failed ({e}); halving amplitude");
                factor *= 0.5;
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// `min (b − 2η u)` over nodes and a `4N+1` time grid, with the minimizing node.
pub fn degeneracy_margin(params: &ParameterSet, u: &HarmonicField) -> (f64, usize) {
    let times = collocation_times(u.omega, collocation_size(u.order()));
    let samples = u.sample_time(&times);
    let mut best = (f64::INFINITY, 0);
    for row in &samples {
        for (i, &v) in row.iter().enumerate() {
            let m = params.b[i] - 2.0 * params.eta[i] * v;
            if m < best.0 {
                best = (m, i);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, generate_disk_mesh, SigmaArc};
    use approx::assert_relative_eq;

    #[test]
    fn transform_examples() {
        let (s, b, e) = transform_parameters(1.0, 1.0, 0.0, 0.5).unwrap();
        assert_eq!((s, b, e), (1.0, 1.0, 1.0));
        let (s, b, e) = transform_parameters(10.0, 0.05, 0.0, 1000.0).unwrap();
        assert_relative_eq!(s, 2000.0, max_relative = 1e-14);
        assert_relative_eq!(b, 20.0, max_relative = 1e-14);
        assert_relative_eq!(e, 1e-4, max_relative = 1e-12);
        let (s, b, e) = transform_parameters(10.11, 0.051, 7.0, 1000.0).unwrap();
        assert_relative_eq!(s, 2004.159, max_relative = 1e-6);
        assert_relative_eq!(b, 19.6078, max_relative = 1e-5);
        assert_relative_eq!(e, 4.3163e-4, max_relative = 1e-4);
        assert!(transform_parameters(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(transform_parameters(1.0, -1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn source_coefficients() {
        let mesh = generate_disk_mesh(0.2, 0.05, SigmaArc::full()).unwrap();
        let spec = ExcitationSpec::new(1.0, 1.0, 1.0);
        let src = build_source(&spec, &mesh, 1.0, 3).unwrap();
        for i in mesh.boundary_nodes() {
            assert_eq!(src.g[0][i], Complex64::new(1.0, 0.0));
            assert_eq!(src.g[1][i], Complex64::new(1.0, 0.0));
            assert_eq!(src.g[2][i], ZERO);
        }
        let zero = build_source(&ExcitationSpec::new(1.0, 1.0, 0.0), &mesh, 1.0, 3).unwrap();
        assert!(zero.g.iter().flatten().all(|z| *z == ZERO));
        let dbl = build_source(&spec.doubled(), &mesh, 1.0, 3).unwrap();
        for (a, b) in dbl.g.iter().flatten().zip(src.g.iter().flatten()) {
            assert_eq!(*a, 2.0 * b);
        }
        assert!(build_source(&spec, &mesh, 1.0, 1).is_err());
        assert!(build_source(&ExcitationSpec::new(1.0, -0.5, 1.0), &mesh, 1.0, 3).is_err());
    }

    #[test]
    fn margin_examples() {
        let params = ParameterSet::constant(2, 2000.0, 20.0, 0.0);
        let mut u = HarmonicField::zeros(2, 2, 1.0);
        u.coeffs[1][0] = Complex64::new(50.0, 0.0);
        assert_eq!(degeneracy_margin(&params, &u).0, 20.0);
        let params = ParameterSet::constant(2, 2000.0, 20.0, 4.3163e-4);
        assert_eq!(degeneracy_margin(&params, &HarmonicField::zeros(2, 2, 1.0)).0, 20.0);
        let mut u = HarmonicField::zeros(2, 2, 1.0);
        u.coeffs[0][1] = Complex64::new(100.0, 0.0);
        let (m, node) = degeneracy_margin(&params, &u);
        assert_relative_eq!(m, 19.913674, max_relative = 1e-7);
        assert_eq!(node, 1);
    }

    #[test]
    fn linear_case_has_only_driven_harmonics() {
        let mesh = generate_disk_mesh(0.2, 0.04, SigmaArc::full()).unwrap();
        let ops = assemble(&mesh, 1.0, None).unwrap();
        let params = ParameterSet::constant(mesh.n_nodes(), 2000.0, 20.0, 0.0);
        let spec = ExcitationSpec::new(1.0, 1.0, 1.0);
        let mut src = build_source(&spec, &mesh, 1.0, 3).unwrap();
        for z in src.g[0].iter_mut() {
            *z = ZERO;
        }
        let sol = solve_forward(&mesh, &ops, &params, &src, &ForwardConfig { order: 3, ..Default::default() })
            .unwrap();
        for m in [0, 2, 3] {
            assert_eq!(sol.field.harmonic_norm(m), 0.0);
        }
        assert!(sol.field.harmonic_norm(1) > 0.0);
    }

    #[test]
    fn nonlinear_residuals_decrease() {
        let mesh = generate_disk_mesh(0.2, 0.04, SigmaArc::full()).unwrap();
        let ops = assemble(&mesh, 1.0, None).unwrap();
        let params = ParameterSet::constant(mesh.n_nodes(), 2000.0, 20.0, 4e-4);
        let spec = ExcitationSpec::new(1.0, 1.0, 1000.0);
        let src = build_source(&spec, &mesh, 1.0, 4).unwrap();
        let sol = solve_forward(&mesh, &ops, &params, &src, &ForwardConfig::default()).unwrap();
        let h = &sol.residual_history;
        assert!(*h.last().unwrap() <= 1e-10);
        assert!(h.windows(2).all(|w| w[1] < w[0]), "{h:?}");
        assert!(sol.field.harmonic_norm(2) > 0.0);
    }

    #[test]
    fn degenerate_amplitude_is_reported_and_backed_off() {
        let mesh = generate_disk_mesh(0.2, 0.05, SigmaArc::full()).unwrap();
        let ops = assemble(&mesh, 1.0, None).unwrap();
        let params = ParameterSet::constant(mesh.n_nodes(), 2000.0, 20.0, 4e-4);
        let src = build_source(&ExcitationSpec::new(1.0, 1.0, 1e5), &mesh, 1.0, 2).unwrap();
        let cfg = ForwardConfig { order: 2, ..Default::default() };
        let err = solve_forward(&mesh, &ops, &params, &src, &cfg).unwrap_err();
        assert!(matches!(err, Error::Degenerate { .. } | Error::NonConvergence { .. }), "{err:?}");
        let (sol, factor) = solve_forward_with_backoff(&mesh, &ops, &params, &src, &cfg, 10).unwrap();
        assert!(factor < 1.0);
        assert!(sol.degeneracy_margin > 0.0);
    }
}
