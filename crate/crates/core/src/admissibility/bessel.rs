//! Bessel functions of the first kind of integer order.

use std::f64::consts::PI;

use num_complex::Complex64;

/// `J_n(z)` by the trapezoid rule on `(1/2π) ∫_0^{2π} cos(nτ − z sin τ) dτ`,
/// which converges geometrically for this periodic integrand.
pub fn bessel_j(n: i32, z: Complex64) -> Complex64 {
    if n < 0 {
        let v = bessel_j(-n, z);
        return if n % 2 == 0 { v } else { -v };
    }
    let points = 64 + 2 * (z.norm().ceil() as usize + n as usize);
    let h = 2.0 * PI / points as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..points {
        let tau = k as f64 * h;
        acc += (Complex64::new(n as f64 * tau, 0.0) - z * tau.sin()).cos();
    }
    acc / points as f64
}

pub fn bessel_j_real(n: i32, x: f64) -> f64 {
    bessel_j(n, Complex64::new(x, 0.0)).re
}

/// `J_n′(z) = (J_{n−1}(z) − J_{n+1}(z)) / 2`.
pub fn bessel_j_prime(n: i32, z: Complex64) -> Complex64 {
    0.5 * (bessel_j(n - 1, z) - bessel_j(n + 1, z))
}
