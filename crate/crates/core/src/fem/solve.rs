//! Complex Robin–Helmholtz solves backed by a sparse LU factorization.

use faer::linalg::solvers::SolveCore;
use faer::sparse::{SparseColMat, Triplet};
use faer::Conj;
use num_complex::Complex64;

use super::assembly::AssembledOperators;
use super::mesh::Mesh2D;
use super::sparse::Csr;
use crate::{Error, Result};

/// How zeroth-order coefficient terms are integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassTreatment {
    /// Exact P1 quadrature of `c_h u_h v_h`.
    Consistent,
    /// Nodal quadrature: `diag(lumped) · c`.
    #[default]
    Lumped,
}

/// Factorized system `K + γB − M[κ]` for one complex nodal weight `κ`.
pub struct RobinHelmholtz {
    matrix: Csr<Complex64>,
    lu: faer::sparse::linalg::solvers::Lu<usize, Complex64>,
}

impl std::fmt::Debug for RobinHelmholtz {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RobinHelmholtz").field("n", &self.matrix.n).finish()
    }
}

fn kappa_mass(
    mesh: &Mesh2D,
    ops: &AssembledOperators,
    kappa_term: &[Complex64],
    treatment: MassTreatment,
) -> Csr<Complex64> {
    let n = ops.n();
    match treatment {
        MassTreatment::Lumped => {
            let trip: Vec<_> = (0..n).map(|i| (i, i, kappa_term[i] * ops.lumped[i])).collect();
            Csr::from_triplets(n, &trip)
        }
        MassTreatment::Consistent => {
            let re: Vec<f64> = kappa_term.iter().map(|k| k.re).collect();
            let im: Vec<f64> = kappa_term.iter().map(|k| k.im).collect();
            let mr = ops.weighted_mass(mesh, &re);
            let mi = ops.weighted_mass(mesh, &im);
            let trip: Vec<_> = mr
                .triplets()
                .into_iter()
                .map(|(i, j, v)| (i, j, Complex64::new(v, mi.get(i, j))))
                .collect();
            Csr::from_triplets(n, &trip)
        }
    }
}

impl RobinHelmholtz {
    /// Assembles and factorizes `K + γB − M[kappa_term]`.
    pub fn new(
        mesh: &Mesh2D,
        ops: &AssembledOperators,
        kappa_term: &[Complex64],
        treatment: MassTreatment,
    ) -> Result<Self> {
        let n = ops.n();
        if kappa_term.len() != n {
            return Err(Error::invalid("kappa_term length does not match node count"));
        }
        let base = ops.robin_laplacian().to_complex();
        let km = kappa_mass(mesh, ops, kappa_term, treatment);
        let mut trip = base.triplets();
        trip.extend(km.triplets().into_iter().map(|(i, j, v)| (i, j, -v)));
        let matrix = Csr::from_triplets(n, &trip);
        Self::from_matrix(matrix)
    }

    pub fn from_matrix(matrix: Csr<Complex64>) -> Result<Self> {
        let n = matrix.n;
        let trip: Vec<Triplet<usize, usize, Complex64>> = matrix
            .triplets()
            .into_iter()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let sp = SparseColMat::<usize, Complex64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| Error::Conditioning(format!("sparse matrix construction failed: {e:?}")))?;
        let lu = sp
            .sp_lu()
            .map_err(|e| Error::Conditioning(format!("LU factorization failed: {e:?}")))?;
        let solver = RobinHelmholtz { matrix, lu };
        // a cheap probe for (near-)singular factors
        let probe: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(1.0 + (i % 7) as f64, (i % 3) as f64 - 1.0))
            .collect();
        let x = solver.solve(&probe)?;
        let r = solver.relative_residual(&x, &probe);
        if !(r <= 1e-8) {
            return Err(Error::Conditioning(format!(
                "factorization residual {r:e} on probe vector"
            )));
        }
        Ok(solver)
    }

    pub fn n(&self) -> usize {
        self.matrix.n
    }

    pub fn matrix(&self) -> &Csr<Complex64> {
        &self.matrix
    }

    fn solve_with(&self, conj: Conj, load: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.n();
        let mut rhs = faer::Mat::<Complex64>::from_fn(n, 1, |i, _| load[i]);
        self.lu.solve_in_place_with_conj(conj, rhs.as_mut());
        let out: Vec<Complex64> = (0..n).map(|i| rhs[(i, 0)]).collect();
        if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Conditioning("non-finite solution".into()));
        }
        Ok(out)
    }

    /// Solves `A x = load`.
    pub fn solve(&self, load: &[Complex64]) -> Result<Vec<Complex64>> {
        self.solve_with(Conj::No, load)
    }

    /// Solves `conj(A) x = load`, i.e. the Hermitian-adjoint system since `A`
    /// is complex symmetric.
    pub fn solve_adjoint(&self, load: &[Complex64]) -> Result<Vec<Complex64>> {
        self.solve_with(Conj::Yes, load)
    }

    pub fn relative_residual(&self, x: &[Complex64], load: &[Complex64]) -> f64 {
        let ax = self.matrix.matvec(x);
        let num: f64 = ax.iter().zip(load).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = load.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }
}

/// Solves `(K + γB − M[kappa_term]) u = rhs + B g_hat` once.
///
/// `rhs` is a load vector; `g_hat` holds nodal Robin data (only boundary
/// values matter). The result is verified against the discrete residual.
pub fn solve_robin_helmholtz(
    mesh: &Mesh2D,
    ops: &AssembledOperators,
    kappa_term: &[Complex64],
    rhs: &[Complex64],
    g_hat: &[Complex64],
    treatment: MassTreatment,
) -> Result<Vec<Complex64>> {
    let solver = RobinHelmholtz::new(mesh, ops, kappa_term, treatment)?;
    let load = robin_load(ops, rhs, g_hat);
    let x = solver.solve(&load)?;
    let scale: f64 = norm(rhs) + norm(g_hat);
    let res = norm(&sub(&solver.matrix.matvec(&x), &load));
    if res > 1e-10 * scale.max(f64::MIN_POSITIVE) && scale > 0.0 {
        return Err(Error::Conditioning(format!("residual {res:e} exceeds tolerance")));
    }
    Ok(x)
}

/// `rhs + B g_hat`.
pub fn robin_load(ops: &AssembledOperators, rhs: &[Complex64], g_hat: &[Complex64]) -> Vec<Complex64> {
    let bg = ops.boundary_mass.matvec_c(g_hat);
    rhs.iter().zip(bg).map(|(a, b)| a + b).collect()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn sub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
