//! Truncated multiharmonic representation of T-periodic real fields,
//! `u(t, x) = Re Σ_{m=0}^{N} û_m(x) e^{i m ω t}` with real `û_0`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicField {
    pub omega: f64,
    /// `coeffs[m][node]`, `m = 0..=N`.
    pub coeffs: Vec<Vec<Complex64>>,
}

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

impl HarmonicField {
    pub fn zeros(n_nodes: usize, order: usize, omega: f64) -> Self {
        HarmonicField { omega, coeffs: vec![vec![ZERO; n_nodes]; order + 1] }
    }

    pub fn from_coeffs(omega: f64, coeffs: Vec<Vec<Complex64>>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("a harmonic field needs at least the m = 0 coefficient"));
        }
        let n = coeffs[0].len();
        if coeffs.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("harmonic coefficient vectors differ in length"));
        }
        let mut f = HarmonicField { omega, coeffs };
        f.enforce_real_mean();
        Ok(f)
    }

    /// Truncation order `N`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn enforce_real_mean(&mut self) {
        for z in self.coeffs[0].iter_mut() {
            z.im = 0.0;
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.order() != other.order() {
            return Err(Error::Mismatch(format!("orders {} and {}", self.order(), other.order())));
        }
        if self.omega != other.omega {
            return Err(Error::Mismatch(format!("omega {} and {}", self.omega, other.omega)));
        }
        if self.n_nodes() != other.n_nodes() {
            return Err(Error::Mismatch("node counts differ".into()));
        }
        Ok(())
    }

    /// Projection of the pointwise product `u v` onto the same truncation.
    pub fn project_product(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let order = self.order();
        let n = self.n_nodes();
        let mut out = vec![vec![ZERO; n]; order + 1];
        for i in 0..n {
            let u: Vec<Complex64> = self.coeffs.iter().map(|c| c[i]).collect();
            let v: Vec<Complex64> = other.coeffs.iter().map(|c| c[i]).collect();
            let p = product_at_node(&u, &v);
            for m in 0..=order {
                out[m][i] = p[m];
            }
        }
        Ok(HarmonicField { omega: self.omega, coeffs: out })
    }

    /// `∂_t`: multiplies coefficient `m` by `i m ω`.
    pub fn time_derivative(&self) -> Self {
        self.scale_by(|m| Complex64::new(0.0, m as f64 * self.omega))
    }

    /// `∂_t²`: multiplies coefficient `m` by `−m² ω²`.
    pub fn second_time_derivative(&self) -> Self {
        self.scale_by(|m| Complex64::new(-(m as f64 * self.omega).powi(2), 0.0))
    }

    fn scale_by(&self, f: impl Fn(usize) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| {
                let s = f(m);
                c.iter().map(|z| z * s).collect()
            })
            .collect();
        HarmonicField { omega: self.omega, coeffs }
    }

    /// Evaluates the field at one node and time.
    pub fn value_at(&self, node: usize, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| (c[node] * Complex64::from_polar(1.0, m as f64 * self.omega * t)).re)
            .sum()
    }

    /// Samples at the given times; returns `samples[time][node]`.
    pub fn sample_time(&self, times: &[f64]) -> Vec<Vec<f64>> {
        times
            .iter()
            .map(|&t| {
                let phases: Vec<Complex64> = (0..=self.order())
                    .map(|m| Complex64::from_polar(1.0, m as f64 * self.omega * t))
                    .collect();
                (0..self.n_nodes())
                    .map(|i| {
                        self.coeffs.iter().zip(&phases).map(|(c, p)| (c[i] * p).re).sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// Inverse of [`sample_time`](Self::sample_time) on `K ≥ 2N+1` equispaced
    /// samples `t_k = k T / K`, `k = 0..K`. Content above order `N` is
    /// discarded (exact as long as it stays below `K − N`).
    pub fn from_samples(samples: &[Vec<f64>], order: usize, omega: f64) -> Result<Self> {
        let k = samples.len();
        if k < 2 * order + 1 {
            return Err(Error::invalid(format!(
                "{k} samples cannot resolve order {order}; need at least {}",
                2 * order + 1
            )));
        }
        let n = samples[0].len();
        let mut coeffs = vec![vec![ZERO; n]; order + 1];
        for m in 0..=order {
            let weight = if m == 0 { 1.0 / k as f64 } else { 2.0 / k as f64 };
            let phases: Vec<Complex64> = (0..k)
                .map(|j| Complex64::from_polar(weight, -2.0 * PI * (m * j) as f64 / k as f64))
                .collect();
            for (j, row) in samples.iter().enumerate() {
                let p = phases[j];
                for (c, &v) in coeffs[m].iter_mut().zip(row) {
                    *c += p * v;
                }
            }
        }
        let mut f = HarmonicField { omega, coeffs };
        f.enforce_real_mean();
        Ok(f)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.scale_by(|_| Complex64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        Ok(HarmonicField { omega: self.omega, coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Zero-padded copy at a larger truncation order, or truncation when
    /// `order` is smaller.
    pub fn with_order(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, vec![ZERO; self.n_nodes()]);
        HarmonicField { omega: self.omega, coeffs }
    }

    /// Euclidean norm of the coefficient vector of harmonic `m`.
    pub fn harmonic_norm(&self, m: usize) -> f64 {
        self.coeffs[m].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max abs over all coefficients.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Equispaced collocation times `t_k = k T / K` over one period.
pub fn collocation_times(omega: f64, count: usize) -> Vec<f64> {
    let period = 2.0 * PI / omega;
    (0..count).map(|k| period * k as f64 / count as f64).collect()
}

/// Collocation grid size used for quadratic nonlinearities: `4N + 1`.
pub fn collocation_size(order: usize) -> usize {
    4 * order + 1
}

/// Harmonic coefficients of the projected product at a single node:
/// `w_m = ½ (Σ_{j=0}^{m} u_j v_{m−j} + Σ_{l=0}^{N−m} [ū_l v_{l+m} + u_{l+m} v̄_l])`
/// for `m ≥ 1`, and `w_0 = ½ (u_0 v_0 + Re Σ_l ū_l v_l)`.
pub fn product_at_node(u: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    let order = u.len() - 1;
    let mut w = vec![ZERO; order + 1];
    let corr0: Complex64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
    w[0] = Complex64::new(0.5 * ((u[0] * v[0]).re + corr0.re), 0.0);
    for m in 1..=order {
        let mut acc = ZERO;
        for j in 0..=m {
            acc += u[j] * v[m - j];
        }
        for l in 0..=(order - m) {
            acc += u[l].conj() * v[l + m] + u[l + m] * v[l].conj();
        }
        w[m] = 0.5 * acc;
    }
    w
}

/// Forward-model quadratic term at one node:
/// `Q_m = Σ_{k=0}^{m} u_k u_{m−k} + 2 Σ_{l=0}^{N−m} ū_l u_{l+m}` (= 2 (u²)_m for m ≥ 1).
pub fn quadratic_at_node(u: &[Complex64], m: usize) -> Complex64 {
    let order = u.len() - 1;
    let mut acc = ZERO;
    for k in 0..=m {
        acc += u[k] * u[m - k];
    }
    for l in 0..=(order - m) {
        acc += 2.0 * u[l].conj() * u[l + m];
    }
    acc
}

/// `Q_m(u)` for every harmonic, `out[m][node]`.
pub fn quadratic_terms(u: &HarmonicField) -> Vec<Vec<Complex64>> {
    let order = u.order();
    let n = u.n_nodes();
    let mut out = vec![vec![ZERO; n]; order + 1];
    let mut buf = vec![ZERO; order + 1];
    for i in 0..n {
        for (m, c) in u.coeffs.iter().enumerate() {
            buf[m] = c[i];
        }
        for m in 0..=order {
            out[m][i] = quadratic_at_node(&buf, m);
        }
    }
    out
}

/// Directional derivative of `Q` at `u` along `du`:
/// `dQ_m = 2 Σ_k u_k du_{m−k} + 2 Σ_l (ū_l du_{l+m} + conj(du_l) u_{l+m})`.
/// Real-linear (not complex-linear) in `du`.
pub fn quadratic_derivative(u: &[Vec<Complex64>], du: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let order = u.len() - 1;
    let n = u[0].len();
    let mut out = vec![vec![ZERO; n]; order + 1];
    for m in 0..=order {
        let o = &mut out[m];
        for k in 0..=m {
            let (a, b) = (&u[k], &du[m - k]);
            for i in 0..n {
                o[i] += 2.0 * a[i] * b[i];
            }
        }
        for l in 0..=(order - m) {
            let (ul, dul, ulm, dulm) = (&u[l], &du[l], &u[l + m], &du[l + m]);
            for i in 0..n {
                o[i] += 2.0 * (ul[i].conj() * dulm[i] + dul[i].conj() * ulm[i]);
            }
        }
    }
    out
}

/// Adjoint of [`quadratic_derivative`] with respect to the real pairing
/// `Σ_m Re⟨a_m, b_m⟩`: returns `g` with `Σ Re⟨μ, dQ(du)⟩ = Σ Re⟨g, du⟩`.
pub fn quadratic_derivative_adjoint(u: &[Vec<Complex64>], mu: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let order = u.len() - 1;
    let n = u[0].len();
    let mut out = vec![vec![ZERO; n]; order + 1];
    for m in 0..=order {
        let mm = &mu[m];
        for k in 0..=m {
            let a = &u[k];
            let o = &mut out[m - k];
            for i in 0..n {
                o[i] += 2.0 * a[i].conj() * mm[i];
            }
        }
        for l in 0..=(order - m) {
            for i in 0..n {
                let to_lm = 2.0 * u[l][i] * mm[i];
                let to_l = 2.0 * mm[i].conj() * u[l + m][i];
                out[l + m][i] += to_lm;
                out[l][i] += to_l;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_field(rng: &mut ChaCha8Rng, nodes: usize, order: usize, omega: f64) -> HarmonicField {
        let coeffs = (0..=order)
            .map(|_| (0..nodes).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
            .collect();
        HarmonicField::from_coeffs(omega, coeffs).unwrap()
    }

    #[test]
    fn constants_multiply() {
        let mut u = HarmonicField::zeros(1, 2, 1.0);
        let mut v = HarmonicField::zeros(1, 2, 1.0);
        u.coeffs[0][0] = c(2.0, 0.0);
        v.coeffs[0][0] = c(3.0, 0.0);
        let w = u.project_product(&v).unwrap();
        assert_eq!(w.coeffs[0][0], c(6.0, 0.0));
        assert_eq!(w.coeffs[1][0], c(0.0, 0.0));
    }

    #[test]
    fn cosine_squared() {
        let mut u = HarmonicField::zeros(1, 2, 1.0);
        u.coeffs[1][0] = c(1.0, 0.0);
        let w = u.project_product(&u).unwrap();
        assert_eq!(w.coeffs[0][0], c(0.5, 0.0));
        assert_eq!(w.coeffs[1][0], c(0.0, 0.0));
        assert_eq!(w.coeffs[2][0], c(0.5, 0.0));
    }

    #[test]
    fn mismatched_fields_are_rejected() {
        let u = HarmonicField::zeros(2, 2, 1.0);
        assert!(u.project_product(&HarmonicField::zeros(2, 3, 1.0)).is_err());
        assert!(u.project_product(&HarmonicField::zeros(2, 2, 2.0)).is_err());
    }

    #[test]
    fn product_matches_collocation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let order = 3;
        let omega = 2.0 * PI / 0.7;
        let u = random_field(&mut rng, 4, order, omega);
        let v = random_field(&mut rng, 4, order, omega);
        let w = u.project_product(&v).unwrap();
        // oracle: pointwise product on a 4N+1 grid, DFT, truncate
        let times = collocation_times(omega, collocation_size(order));
        let su = u.sample_time(&times);
        let sv = v.sample_time(&times);
        let prod: Vec<Vec<f64>> =
            su.iter().zip(&sv).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).collect()).collect();
        let oracle = HarmonicField::from_samples(&prod, order, omega).unwrap();
        let scale = w.max_abs();
        for (a, b) in w.coeffs.iter().flatten().zip(oracle.coeffs.iter().flatten()) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn second_derivative_factors() {
        let mut u = HarmonicField::zeros(1, 2, 2.0 * PI);
        u.coeffs[0][0] = c(5.0, 0.0);
        u.coeffs[1][0] = c(1.0, 0.0);
        let d = u.second_time_derivative();
        assert_eq!(d.coeffs[0][0], c(0.0, 0.0));
        assert!((d.coeffs[1][0] - c(-4.0 * PI * PI, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_field(&mut rng, 1, 3, 2.0 * PI);
        let exact = u.second_time_derivative().value_at(0, 0.123);
        let err = |dt: f64| {
            let f = |t: f64| u.value_at(0, t);
            let fd = (f(0.123 + dt) - 2.0 * f(0.123) + f(0.123 - dt)) / (dt * dt);
            (fd - exact).abs()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        let slope = (e1 / e2).log2();
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    }

    #[test]
    fn sampling_basics() {
        let u = HarmonicField::zeros(3, 2, 1.0);
        let s = u.sample_time(&collocation_times(1.0, 5));
        assert!(s.iter().flatten().all(|&v| v == 0.0));
        let back = HarmonicField::from_samples(&s, 2, 1.0).unwrap();
        assert_eq!(back, u);

        let mut v = HarmonicField::zeros(1, 2, 1.0);
        v.coeffs[0][0] = c(0.75, 0.0);
        v.coeffs[1][0] = c(1.0, 0.0);
        assert_eq!(v.sample_time(&[0.0])[0][0], 1.75);
        assert!(HarmonicField::from_samples(&s[..4], 2, 1.0).is_err());
    }

    #[test]
    fn parseval_mean_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_field(&mut rng, 5, 4, 3.0);
        let sq = u.project_product(&u).unwrap();
        for i in 0..5 {
            let expect = u.coeffs[0][i].re.powi(2)
                + 0.5 * (1..=4).map(|m| u.coeffs[m][i].norm_sqr()).sum::<f64>();
            assert!((sq.coeffs[0][i].re - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn quadratic_term_is_twice_the_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_field(&mut rng, 2, 3, 1.0);
        let sq = u.project_product(&u).unwrap();
        for i in 0..2 {
            let ui: Vec<Complex64> = u.coeffs.iter().map(|c| c[i]).collect();
            for m in 1..=3 {
                assert!((quadratic_at_node(&ui, m) - 2.0 * sq.coeffs[m][i]).norm() < 1e-14);
            }
        }
    }

    fn random_coeffs(rng: &mut ChaCha8Rng, nodes: usize, order: usize) -> Vec<Vec<Complex64>> {
        (0..=order)
            .map(|_| (0..nodes).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
            .collect()
    }

    fn pairing(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
        a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x.conj() * y).re).sum()
    }

    #[test]
    fn quadratic_derivative_matches_difference_quotient() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u = random_field(&mut rng, 3, 3, 1.0);
        let du = random_field(&mut rng, 3, 3, 1.0);
        let eps = 1e-6;
        let qp = quadratic_terms(&u.add(&du.scale(eps)).unwrap());
        let qm = quadratic_terms(&u.add(&du.scale(-eps)).unwrap());
        let dq = quadratic_derivative(&u.coeffs, &du.coeffs);
        for m in 0..=3 {
            for i in 0..3 {
                let fd = (qp[m][i] - qm[m][i]) / (2.0 * eps);
                assert!((fd - dq[m][i]).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn quadratic_derivative_adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for order in [1, 2, 4] {
            let u = random_coeffs(&mut rng, 5, order);
            let du = random_coeffs(&mut rng, 5, order);
            let mu = random_coeffs(&mut rng, 5, order);
            let lhs = pairing(&mu, &quadratic_derivative(&u, &du));
            let rhs = pairing(&quadratic_derivative_adjoint(&u, &mu), &du);
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        }
    }
}
