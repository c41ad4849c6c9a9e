//! Source admissibility for linearized uniqueness: impedance spectrum of the
//! disk, poles, Laplace transforms of the time profiles and the determinant
//! conditions, plus a radial Bessel oracle for single-harmonic solves.

pub mod bessel;
pub mod spectrum;

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

pub use bessel::{bessel_j, bessel_j_prime, bessel_j_real};
pub use spectrum::{expand_multiplicity, impedance_eigs_disk, pole, DiskEigen};

use crate::fem::SigmaArc;
use crate::forward::{ExcitationSpec, PsiKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Coefficient {
    S,
    B,
    Eta,
}

/// Building blocks of the closed forms for `ψ = κ(cos ωt + 𝔞)`:
/// `𝒜_s = −E S`, `𝒜_b = (2/T) E P + z² 𝒜_s`, `𝒜_η = −E H`, `E = e^{−zT} − 1`.
struct Parts {
    s: Complex64,
    p: Complex64,
    h: Complex64,
}

fn parts(spec: &ExcitationSpec, z: Complex64) -> Parts {
    let k = spec.psi.factor();
    let a = spec.a_offset;
    let t = spec.period;
    let w2 = spec.omega().powi(2);
    let z2 = z * z;
    let s = if z == Complex64::new(0.0, 0.0) {
        // removable singularity; E S → 2𝔞κ
        Complex64::new(f64::NAN, 0.0)
    } else {
        2.0 * k * (a * (z2 + w2) + z2) / (z * t * (z2 + w2))
    };
    let p = z * k * (1.0 + a);
    let h = -k * k * (16.0 * PI * PI / t.powi(3)) * z * (1.0 / (z2 + 4.0 * w2) + a / (z2 + w2));
    Parts { s, p, h }
}

fn exp_minus_one(spec: &ExcitationSpec, z: Complex64) -> Complex64 {
    (-z * spec.period).exp() - 1.0
}

/// `ln |e^{−zT} − 1|` without overflow.
fn ln_abs_e(spec: &ExcitationSpec, z: Complex64) -> f64 {
    let w = -z * spec.period;
    if w.re > 30.0 {
        w.re + (1.0 - (-w).exp()).norm().ln()
    } else {
        (w.exp() - 1.0).norm().ln()
    }
}

/// `𝒜_{j,q}(z) = (2/T) ∫_0^T f_q(t) e^{−zt} dt` with `f_s = ψ`, `f_b = ψ″`,
/// `f_η = (ψ²)″`, for the cos-plus-offset family.
pub fn laplace_a(which: Coefficient, spec: &ExcitationSpec, z: Complex64) -> Complex64 {
    let k = spec.psi.factor();
    let zero = Complex64::new(0.0, 0.0);
    if z == zero {
        return match which {
            Coefficient::S => Complex64::new(2.0 * k * spec.a_offset, 0.0),
            Coefficient::B | Coefficient::Eta => zero,
        };
    }
    let e = exp_minus_one(spec, z);
    let pt = parts(spec, z);
    let a_s = -e * pt.s;
    match which {
        Coefficient::S => a_s,
        Coefficient::B => 2.0 / spec.period * e * pt.p + z * z * a_s,
        Coefficient::Eta => -e * pt.h,
    }
}

/// Relative gap `|lhs − rhs| / max(|lhs|, |rhs|)` of the pole condition
/// `𝒜_{1,s}(𝔭) ≠ T₂(e^{−𝔭T₁}−1)(ψ₁′(0)+𝔭ψ₁(0)) / (T₁(e^{−𝔭T₂}−1)(ψ₂′(0)+𝔭ψ₂(0))) · 𝒜_{2,s}(𝔭)`.
pub fn condition_margin(spec1: &ExcitationSpec, spec2: &ExcitationSpec, z: Complex64) -> f64 {
    let p1 = parts(spec1, z);
    let p2 = parts(spec2, z);
    let lhs = p1.s * spec1.period * p2.p;
    let rhs = p1.p * spec2.period * p2.s;
    let den = lhs.norm().max(rhs.norm());
    if den == 0.0 {
        return 0.0;
    }
    (lhs - rhs).norm() / den
}

/// `log10 |det A|` with `det A = 2(A₁ₛA₂ᵦ − A₂ₛA₁ᵦ)A₁η` for `ψ₃ = 2ψ₁`.
pub fn log10_abs_det(spec1: &ExcitationSpec, spec2: &ExcitationSpec, z: Complex64) -> f64 {
    let p1 = parts(spec1, z);
    let p2 = parts(spec2, z);
    let inner = p2.s * p1.p / spec1.period - p1.s * p2.p / spec2.period;
    let ln = 4f64.ln() + 2.0 * ln_abs_e(spec1, z) + ln_abs_e(spec2, z) + p1.h.norm().ln() + inner.norm().ln();
    ln / std::f64::consts::LN_10
}

/// Direct 3×3 determinant of `[𝒜_{j,q}(z)]` (rows j = 1..3, columns s, b, η).
pub fn direct_det(specs: [&ExcitationSpec; 3], z: Complex64) -> Complex64 {
    let a: Vec<[Complex64; 3]> = specs
        .iter()
        .map(|s| {
            [
                laplace_a(Coefficient::S, s, z),
                laplace_a(Coefficient::B, s, z),
                laplace_a(Coefficient::Eta, s, z),
            ]
        })
        .collect();
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub ell: usize,
    pub lambda: f64,
    pub order: usize,
    pub pole: [f64; 2],
    pub abs_det: f64,
    pub log10_abs_det: f64,
    pub margin47: f64,
    pub abs_a1eta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub rows: Vec<ReportRow>,
    pub floor: f64,
    pub pass: bool,
    pub sigma_note: String,
}

impl AdmissibilityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("ell,lambda,re_pole,im_pole,abs_det,margin47,abs_A1eta\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.ell, r.lambda, r.pole[0], r.pole[1], r.abs_det, r.margin47, r.abs_a1eta
            );
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:>4} {:>14} {:>3} {:>14} {:>14} {:>12} {:>12} {:>12}\n",
            "ell", "lambda", "n", "re_pole", "im_pole", "log10|det|", "margin47", "|A1eta|"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>4} {:>14.6e} {:>3} {:>14.6e} {:>14.6e} {:>12.4} {:>12.4e} {:>12.4e}",
                r.ell, r.lambda, r.order, r.pole[0], r.pole[1], r.log10_abs_det, r.margin47, r.abs_a1eta
            );
        }
        let _ = writeln!(s, "floor {:e}: {}", self.floor, if self.pass { "PASS" } else { "FAIL" });
        let _ = writeln!(s, "{}", self.sigma_note);
        s
    }
}

/// Σ can only be confirmed to be a nonempty open arc; the unique continuation
/// hypothesis itself is not decidable numerically.
pub fn sigma_note(arc: &SigmaArc) -> String {
    if arc.is_full() {
        "sigma: full boundary".to_string()
    } else {
        format!(
            "sigma: open arc [{:.4}, {:.4}] rad of length {:.4}; unique continuation from sigma is assumed",
            arc.start,
            arc.end,
            arc.length()
        )
    }
}

#[allow(clippy::too_many_arguments)]
pub fn check_admissibility(
    spec1: &ExcitationSpec,
    spec2: &ExcitationSpec,
    spec3: &ExcitationSpec,
    b0: f64,
    s0: f64,
    gamma: f64,
    radius: f64,
    count: usize,
    floor: f64,
) -> Result<AdmissibilityReport> {
    for s in [spec1, spec2, spec3] {
        s.validate()?;
    }
    if spec1.psi != PsiKind::CosOffset || spec2.psi != PsiKind::CosOffset || *spec3 != spec1.doubled() {
        return Err(Error::Config("the third excitation must be the doubling of the first".into()));
    }
    let eigs = impedance_eigs_disk(gamma, radius, count)?;
    let mut rows = Vec::with_capacity(eigs.len());
    let mut pass = true;
    for (ell, e) in eigs.iter().enumerate() {
        let z = pole(b0, s0, e.lambda)?;
        let margin = condition_margin(spec1, spec2, z);
        let ld = log10_abs_det(spec1, spec2, z);
        let a1eta_ln = ln_abs_e(spec1, z) + parts(spec1, z).h.norm().ln();
        let abs_a1eta = a1eta_ln.exp();
        if !(margin > floor) || !ld.is_finite() || a1eta_ln == f64::NEG_INFINITY || a1eta_ln.is_nan() {
            pass = false;
        }
        rows.push(ReportRow {
            ell: ell + 1,
            lambda: e.lambda,
            order: e.order,
            pole: [z.re, z.im],
            abs_det: 10f64.powf(ld),
            log10_abs_det: ld,
            margin47: margin,
            abs_a1eta,
        });
    }
    Ok(AdmissibilityReport { rows, floor, pass, sigma_note: String::new() })
}

/// Radial solution `u(r) = c J₀(k r)` of `−Δu = k² u` on the disk with
/// `γ u(R) + u′(R) = g`.
#[derive(Debug, Clone, Copy)]
pub struct RadialHelmholtz {
    pub k: Complex64,
    pub c: Complex64,
}

impl RadialHelmholtz {
    pub fn value(&self, r: f64) -> Complex64 {
        self.c * bessel_j(0, self.k * r)
    }

    pub fn derivative(&self, r: f64) -> Complex64 {
        -self.c * self.k * bessel_j(1, self.k * r)
    }
}

pub fn bessel_helmholtz_disk(k_sq: Complex64, gamma: f64, radius: f64, g: Complex64) -> Result<RadialHelmholtz> {
    if !(gamma > 0.0) || !(radius > 0.0) {
        return Err(Error::invalid("gamma and radius must be positive"));
    }
    let k = k_sq.sqrt();
    let den = gamma * bessel_j(0, k * radius) - k * bessel_j(1, k * radius);
    if den.norm() <= 1e-13 * (gamma + k.norm()) {
        return Err(Error::Resonance(format!("k^2 = {k_sq} is an impedance eigenvalue")));
    }
    Ok(RadialHelmholtz { k, c: g / den })
}
