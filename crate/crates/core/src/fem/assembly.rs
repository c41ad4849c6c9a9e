//! P1 assembly with closed-form element integrals.

use super::mesh::Mesh2D;
use super::sparse::Csr;
use crate::{Error, Result};

/// Global P1 operators on a mesh. Immutable after construction.
#[derive(Debug, Clone)]
pub struct AssembledOperators {
    pub gamma: f64,
    /// Consistent mass matrix.
    pub mass: Csr<f64>,
    /// Stiffness matrix (Laplacian).
    pub stiffness: Csr<f64>,
    /// Boundary mass over all of ∂Ω scaled by `gamma`.
    pub robin: Csr<f64>,
    /// Unscaled boundary mass over all of ∂Ω; maps nodal boundary data to loads.
    pub boundary_mass: Csr<f64>,
    /// Unscaled boundary mass restricted to Σ edges.
    pub sigma_mass: Csr<f64>,
    /// Row sums of the mass matrix (nodal quadrature weights).
    pub lumped: Vec<f64>,
    /// Coefficient-weighted mass matrix, when a coefficient was supplied.
    pub coeff_mass: Option<Csr<f64>>,
}

pub fn element_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

pub fn element_stiffness(grads: &[[f64; 2]; 3], area: f64) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
        }
    }
    k
}

/// Exact `∫ c_h φ_i φ_j` for a P1 coefficient with nodal values `c`.
pub fn element_weighted_mass(area: f64, c: [f64; 3]) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = 0.0;
            for (k, &ck) in c.iter().enumerate() {
                // ∫ λ_i λ_j λ_k = 2A a!b!c!/(a+b+c+2)!
                let w = if i == j && j == k {
                    area / 10.0
                } else if i == j || j == k || i == k {
                    area / 30.0
                } else {
                    area / 60.0
                };
                acc += w * ck;
            }
            m[i][j] = acc;
        }
    }
    m
}

pub fn edge_mass(length: f64) -> [[f64; 2]; 2] {
    [[length / 3.0, length / 6.0], [length / 6.0, length / 3.0]]
}

fn scatter3(trip: &mut Vec<(usize, usize, f64)>, nodes: &[usize; 3], e: &[[f64; 3]; 3]) {
    for i in 0..3 {
        for j in 0..3 {
            trip.push((nodes[i], nodes[j], e[i][j]));
        }
    }
}

pub fn assemble(mesh: &Mesh2D, gamma: f64, coeff: Option<&[f64]>) -> Result<AssembledOperators> {
    if !(gamma >= 0.0) {
        return Err(Error::invalid(format!("gamma must be nonnegative, got {gamma}")));
    }
    let n = mesh.n_nodes();
    if let Some(c) = coeff {
        if c.len() != n {
            return Err(Error::invalid("coefficient length does not match node count"));
        }
        if let Some(i) = c.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("coefficient not finite at node {i}")));
        }
    }
    let mut m_trip = Vec::with_capacity(9 * mesh.triangles.len());
    let mut k_trip = Vec::with_capacity(9 * mesh.triangles.len());
    let mut c_trip = Vec::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_area(t);
        if !(area > 0.0) {
            return Err(Error::InvertedTriangle { index: t, area });
        }
        scatter3(&mut m_trip, tri, &element_mass(area));
        scatter3(&mut k_trip, tri, &element_stiffness(&mesh.basis_gradients(t), area));
        if let Some(c) = coeff {
            let ce = [c[tri[0]], c[tri[1]], c[tri[2]]];
            scatter3(&mut c_trip, tri, &element_weighted_mass(area, ce));
        }
    }
    let mut b_trip = Vec::new();
    let mut s_trip = Vec::new();
    for e in &mesh.boundary_edges {
        let em = edge_mass(mesh.edge_length(e));
        for i in 0..2 {
            for j in 0..2 {
                b_trip.push((e.nodes[i], e.nodes[j], em[i][j]));
                if e.in_sigma {
                    s_trip.push((e.nodes[i], e.nodes[j], em[i][j]));
                }
            }
        }
    }
    let mass = Csr::from_triplets(n, &m_trip);
    let boundary_mass = Csr::from_triplets(n, &b_trip);
    let lumped = mass.row_sums();
    Ok(AssembledOperators {
        gamma,
        robin: boundary_mass.scaled(gamma),
        stiffness: Csr::from_triplets(n, &k_trip),
        sigma_mass: Csr::from_triplets(n, &s_trip),
        boundary_mass,
        mass,
        lumped,
        coeff_mass: coeff.map(|_| Csr::from_triplets(n, &c_trip)),
    })
}

impl AssembledOperators {
    pub fn n(&self) -> usize {
        self.mass.n
    }

    /// Consistent mass matrix weighted by the nodal coefficient `c`.
    pub fn weighted_mass(&self, mesh: &Mesh2D, c: &[f64]) -> Csr<f64> {
        let mut trip = Vec::with_capacity(9 * mesh.triangles.len());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let ce = [c[tri[0]], c[tri[1]], c[tri[2]]];
            scatter3(&mut trip, tri, &element_weighted_mass(mesh.triangle_area(t), ce));
        }
        Csr::from_triplets(mesh.n_nodes(), &trip)
    }

    /// `K + γ B`: the Robin–Laplace operator.
    pub fn robin_laplacian(&self) -> Csr<f64> {
        super::sparse::add(&self.stiffness, &self.robin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::{generate_disk_mesh, SigmaArc};

    fn reference_triangle() -> Mesh2D {
        Mesh2D::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            |_| true,
        )
        .unwrap()
    }

    #[test]
    fn reference_element_matrices() {
        let mesh = reference_triangle();
        let ops = assemble(&mesh, 1.0, None).unwrap();
        let area = 0.5;
        let m_expect = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];
        let k_expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((ops.mass.get(i, j) - area / 12.0 * m_expect[i][j]).abs() < 1e-15);
                assert!((ops.stiffness.get(i, j) - k_expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn robin_edge_block() {
        let mesh = reference_triangle();
        let gamma = 2.5;
        let ops = assemble(&mesh, gamma, None).unwrap();
        // edge (0,1) has length 1 and is shared only with edge (2,0) at node 0
        let h: f64 = 1.0;
        assert!((ops.robin.get(0, 1) - gamma * h / 6.0).abs() < 1e-15);
        let hyp = 2f64.sqrt();
        assert!((ops.robin.get(1, 2) - gamma * hyp / 6.0).abs() < 1e-15);
        assert!((ops.robin.get(1, 1) - gamma * (h / 3.0 + hyp / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn unit_coefficient_reproduces_mass() {
        let mesh = generate_disk_mesh(0.2, 0.05, SigmaArc::full()).unwrap();
        let ones = vec![1.0; mesh.n_nodes()];
        let ops = assemble(&mesh, 1.0, Some(&ones)).unwrap();
        let cm = ops.coeff_mass.as_ref().unwrap();
        for (a, b) in cm.vals.iter().zip(&ops.mass.vals) {
            assert!((a - b).abs() <= 1e-16);
        }
    }

    #[test]
    fn operator_invariants() {
        let mesh = generate_disk_mesh(0.2, 0.04, SigmaArc::full()).unwrap();
        let ops = assemble(&mesh, 1.0, None).unwrap();
        assert!(ops.mass.is_symmetric(1e-16));
        assert!(ops.stiffness.is_symmetric(1e-14));
        assert!(ops.robin.is_symmetric(1e-16));
        let ones = vec![1.0; mesh.n_nodes()];
        // constants are in the stiffness nullspace
        assert!(ops.stiffness.matvec(&ones).iter().all(|v| v.abs() < 1e-12));
        let total: f64 = ops.lumped.iter().sum();
        assert!((total - mesh.total_area()).abs() < 1e-14);
        let x: Vec<f64> = (0..mesh.n_nodes()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        assert!(ops.mass.quad_form(&x) > 0.0);
        assert!(ops.stiffness.quad_form(&x) >= -1e-12);
        assert!(ops.robin.quad_form(&x) >= 0.0);
    }

    #[test]
    fn lumped_rows_equal_nodal_areas() {
        let mesh = generate_disk_mesh(0.2, 0.05, SigmaArc::full()).unwrap();
        let ops = assemble(&mesh, 1.0, None).unwrap();
        let mut areas = vec![0.0; mesh.n_nodes()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for &v in tri {
                areas[v] += mesh.triangle_area(t) / 3.0;
            }
        }
        for (a, b) in areas.iter().zip(&ops.lumped) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn inverted_triangle_is_named() {
        let mesh = Mesh2D {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 2, 1]],
            boundary_edges: vec![],
        };
        match assemble(&mesh, 1.0, None) {
            Err(Error::InvertedTriangle { index, .. }) => assert_eq!(index, 0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
