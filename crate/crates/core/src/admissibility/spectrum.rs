//! Spectrum of the impedance Laplacian on a disk and the associated poles.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::bessel::bessel_j_real;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiskEigen {
    pub lambda: f64,
    /// Angular order `n`.
    pub order: usize,
    pub multiplicity: usize,
}

/// `γ J_n(kR) + k J_n′(kR)`.
fn robin_characteristic(n: usize, k: f64, gamma: f64, radius: f64) -> f64 {
    let x = k * radius;
    let n = n as i32;
    gamma * bessel_j_real(n, x) + k * 0.5 * (bessel_j_real(n - 1, x) - bessel_j_real(n + 1, x))
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Roots `k ∈ (0, k_max]` of the characteristic function for order `n`.
fn radial_roots(n: usize, gamma: f64, radius: f64, k_max: f64) -> Result<Vec<f64>> {
    let step = PI / (20.0 * radius);
    let f = |k: f64| robin_characteristic(n, k, gamma, radius);
    let mut roots = Vec::new();
    // J_n and J_n' are positive on (0, n), so no root lies below k = n/R
    let mut lo = n as f64 / radius;
    let mut flo = f(lo);
    if n > 0 && flo == 0.0 {
        lo += 1e-3 * step;
        flo = f(lo);
    }
    while lo < k_max {
        let hi = lo + step;
        let fhi = f(hi);
        if flo == 0.0 {
            roots.push(lo);
        } else if (flo > 0.0) != (fhi > 0.0) {
            let r = bisect(f, lo, hi);
            if !(f(r).abs() < 1e-6 * (1.0 + gamma + r)) {
                return Err(Error::RootBracketing { order: n, lo, hi });
            }
            roots.push(r);
        }
        lo = hi;
        flo = fhi;
    }
    Ok(roots)
}

/// The first `count` distinct eigenvalues of `−Δ` with `γu + ∂_n u = 0` on
/// the disk of radius `R`, ascending; orders `n ≥ 1` have multiplicity 2.
pub fn impedance_eigs_disk(gamma: f64, radius: f64, count: usize) -> Result<Vec<DiskEigen>> {
    if !(gamma > 0.0) || !(radius > 0.0) {
        return Err(Error::invalid(format!("gamma and radius must be positive (gamma = {gamma}, R = {radius})")));
    }
    let mut k_max = 10.0 / radius;
    loop {
        let mut all = Vec::new();
        // J_n(kR) has no roots of the characteristic below k ≈ n/R
        let max_order = (k_max * radius).ceil() as usize + 2;
        for n in 0..=max_order.max(2 * count) {
            for k in radial_roots(n, gamma, radius, k_max)? {
                all.push(DiskEigen { lambda: k * k, order: n, multiplicity: if n == 0 { 1 } else { 2 } });
            }
        }
        all.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());
        if all.len() >= count {
            all.truncate(count);
            return Ok(all);
        }
        k_max *= 2.0;
    }
}

/// Eigenvalues repeated according to multiplicity.
pub fn expand_multiplicity(eigs: &[DiskEigen]) -> Vec<f64> {
    eigs.iter().flat_map(|e| std::iter::repeat_n(e.lambda, e.multiplicity)).collect()
}

/// Root of `b⁰z² + λz + s⁰λ = 0` with `Re z < 0`:
/// `(−λ − √(λ² − 4b⁰s⁰λ)) / (2b⁰)`.
pub fn pole(b0: f64, s0: f64, lambda: f64) -> Result<Complex64> {
    if !(b0 > 0.0 && s0 > 0.0 && lambda > 0.0) {
        return Err(Error::invalid("pole requires positive b0, s0 and lambda"));
    }
    let disc = Complex64::new(lambda * lambda - 4.0 * b0 * s0 * lambda, 0.0).sqrt();
    Ok((-lambda - disc) / (2.0 * b0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_eigenvalue_is_positive_and_ordered() {
        let eigs = impedance_eigs_disk(1.0, 0.2, 20).unwrap();
        assert_eq!(eigs.len(), 20);
        assert!(eigs[0].lambda > 0.0);
        assert!(eigs.windows(2).all(|w| w[0].lambda <= w[1].lambda));
        for e in &eigs {
            let k = e.lambda.sqrt();
            assert!(robin_characteristic(e.order, k, 1.0, 0.2).abs() < 1e-9 * (1.0 + k));
        }
    }

    #[test]
    fn dirichlet_limit() {
        let eigs = impedance_eigs_disk(1e7, 1.0, 1).unwrap();
        let j01: f64 = 2.404_825_557_695_773;
        assert!((eigs[0].lambda - j01 * j01).abs() < 1e-5);
    }

    #[test]
    fn small_gamma_first_eigenvalue() {
        // λ₁ ≈ 2γ/R for γR ≪ 1
        let eigs = impedance_eigs_disk(1e-3, 1.0, 1).unwrap();
        assert!((eigs[0].lambda - 2e-3).abs() < 1e-5);
    }

    #[test]
    fn pole_examples() {
        assert!((pole(1.0, 1.0, 4.0).unwrap() - Complex64::new(-2.0, 0.0)).norm() < 1e-15);
        let p = pole(1.0, 1.0, 1.0).unwrap();
        assert!((p - Complex64::new(-0.5, -0.75f64.sqrt())).norm() < 1e-15);
        let p = pole(20.0, 2000.0, 2e5).unwrap();
        assert!((p.re + 7236.067977).abs() < 1e-5 && p.im == 0.0);
        for (b, s, l) in [(20.0, 2000.0, 30.0), (1.0, 3.0, 100.0), (20.0, 2000.0, 1e6)] {
            let z = pole(b, s, l).unwrap();
            let q = b * z * z + l * z + s * l;
            assert!(q.norm() <= 1e-12 * (b * z.norm_sqr() + l * z.norm() + s * l));
            assert!(z.re < 0.0);
        }
    }
}
