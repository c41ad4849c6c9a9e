//! Triangulated disk with boundary-edge markers.

use std::f64::consts::PI;

use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Closed angular interval `[start, end]` (radians, counter-clockwise from the
/// positive x axis). An interval of length `>= 2π` selects the whole circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaArc {
    pub start: f64,
    pub end: f64,
}

impl SigmaArc {
    pub fn full() -> Self {
        SigmaArc { start: 0.0, end: TWO_PI }
    }

    pub fn new(start: f64, end: f64) -> Self {
        SigmaArc { start, end }
    }

    pub fn is_full(&self) -> bool {
        self.end - self.start >= TWO_PI - 1e-14
    }

    pub fn length(&self) -> f64 {
        (self.end - self.start).min(TWO_PI)
    }

    pub fn contains(&self, angle: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let rel = (angle - self.start).rem_euclid(TWO_PI);
        rel <= self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    /// Outward unit normal of the straight edge.
    pub normal: [f64; 2],
    pub in_sigma: bool,
    /// Index of the unique triangle owning this edge.
    pub triangle: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh2D {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

pub fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Ring-based triangulation of the disk of the given radius. Ring `i` carries
/// `6 i` equispaced nodes, so all boundary nodes lie exactly on the circle.
pub fn generate_disk_mesh(radius: f64, target_h: f64, sigma_arc: SigmaArc) -> Result<Mesh2D> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    if !(target_h > 0.0 && target_h < radius) {
        return Err(Error::invalid(format!(
            "target_h must lie in (0, radius), got {target_h}"
        )));
    }
    if !(sigma_arc.start >= 0.0 && sigma_arc.end <= TWO_PI + 1e-12) || sigma_arc.end <= sigma_arc.start {
        return Err(Error::EmptySigma);
    }

    let rings = (radius / target_h).ceil() as usize;
    let mut nodes = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    let mut ring_len = vec![1usize];
    for i in 1..=rings {
        let r = radius * i as f64 / rings as f64;
        let n = 6 * i;
        ring_start.push(nodes.len());
        ring_len.push(n);
        for k in 0..n {
            let theta = TWO_PI * k as f64 / n as f64;
            let (sn, cs) = theta.sin_cos();
            if i == rings {
                nodes.push([radius * cs, radius * sn]);
            } else {
                nodes.push([r * cs, r * sn]);
            }
        }
    }

    let mut triangles = Vec::new();
    for i in 1..=rings {
        let (s_in, n_in) = (ring_start[i - 1], ring_len[i - 1]);
        let (s_out, n_out) = (ring_start[i], ring_len[i]);
        if n_in == 1 {
            for k in 0..n_out {
                triangles.push([0, s_out + k, s_out + (k + 1) % n_out]);
            }
            continue;
        }
        // zipper between the inner and outer ring, advancing by angle
        let (mut j, mut k) = (0usize, 0usize);
        while j < n_in || k < n_out {
            let next_in = (j + 1) as f64 / n_in as f64;
            let next_out = (k + 1) as f64 / n_out as f64;
            let a = s_in + j % n_in;
            let b = s_out + k % n_out;
            if k < n_out && (j == n_in || next_out <= next_in) {
                triangles.push([a, b, s_out + (k + 1) % n_out]);
                k += 1;
            } else {
                triangles.push([a, b, s_in + (j + 1) % n_in]);
                j += 1;
            }
        }
    }
    for t in triangles.iter_mut() {
        if signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]) < 0.0 {
            t.swap(1, 2);
        }
    }

    let mut mesh = Mesh2D { nodes, triangles, boundary_edges: Vec::new() };
    mesh.boundary_edges = mesh.extract_boundary(|mid| sigma_arc.contains(mid[1].atan2(mid[0])))?;
    if !mesh.boundary_edges.iter().any(|e| e.in_sigma) {
        return Err(Error::EmptySigma);
    }
    Ok(mesh)
}

impl Mesh2D {
    /// Builds a mesh from raw nodes and triangles, detecting the boundary and
    /// flagging edges whose midpoint satisfies `in_sigma`.
    pub fn from_parts(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        in_sigma: impl Fn([f64; 2]) -> bool,
    ) -> Result<Self> {
        let mut mesh = Mesh2D { nodes, triangles, boundary_edges: Vec::new() };
        mesh.boundary_edges = mesh.extract_boundary(in_sigma)?;
        Ok(mesh)
    }

    fn extract_boundary(&self, in_sigma: impl Fn([f64; 2]) -> bool) -> Result<Vec<BoundaryEdge>> {
        use std::collections::HashMap;
        let mut count: HashMap<(usize, usize), (usize, usize, [usize; 2])> = HashMap::new();
        for (ti, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let a = t[k];
                let b = t[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                let entry = count.entry(key).or_insert((0, ti, [a, b]));
                entry.0 += 1;
            }
        }
        let mut edges: Vec<BoundaryEdge> = count
            .into_values()
            .filter(|(c, _, _)| *c == 1)
            .map(|(_, tri, [a, b])| {
                // positively oriented triangle: boundary edge (a, b) has the
                // interior on its left, so the outward normal points right
                let pa = self.nodes[a];
                let pb = self.nodes[b];
                let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
                let len = (dx * dx + dy * dy).sqrt();
                let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                BoundaryEdge {
                    nodes: [a, b],
                    normal: [dy / len, -dx / len],
                    in_sigma: in_sigma(mid),
                    triangle: tri,
                }
            })
            .collect();
        // order the edges along the loop starting from the smallest node index
        edges.sort_by_key(|e| e.nodes[0]);
        if edges.is_empty() {
            return Err(Error::invalid("mesh has no boundary"));
        }
        let mut ordered = Vec::with_capacity(edges.len());
        let by_start: std::collections::HashMap<usize, usize> =
            edges.iter().enumerate().map(|(i, e)| (e.nodes[0], i)).collect();
        let mut cur = 0usize;
        for _ in 0..edges.len() {
            ordered.push(edges[cur].clone());
            match by_start.get(&edges[cur].nodes[1]) {
                Some(&next) => cur = next,
                None => return Err(Error::invalid("boundary edges do not form a closed loop")),
            }
        }
        if cur != 0 {
            return Err(Error::invalid("boundary consists of more than one loop"));
        }
        Ok(ordered)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        let pa = self.nodes[e.nodes[0]];
        let pb = self.nodes[e.nodes[1]];
        ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
    }

    /// Boundary nodes in loop order.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        self.boundary_edges.iter().map(|e| e.nodes[0]).collect()
    }

    /// Nodes touched by at least one Σ edge, in loop order.
    pub fn sigma_nodes(&self) -> Vec<usize> {
        let mut flag = vec![false; self.n_nodes()];
        for e in self.boundary_edges.iter().filter(|e| e.in_sigma) {
            flag[e.nodes[0]] = true;
            flag[e.nodes[1]] = true;
        }
        let mut out = Vec::new();
        for e in &self.boundary_edges {
            for &n in &e.nodes {
                if flag[n] && !out.contains(&n) {
                    out.push(n);
                }
            }
        }
        out
    }

    pub fn is_boundary_node(&self) -> Vec<bool> {
        let mut flag = vec![false; self.n_nodes()];
        for e in &self.boundary_edges {
            flag[e.nodes[0]] = true;
            flag[e.nodes[1]] = true;
        }
        flag
    }

    /// Gradients of the three barycentric basis functions on triangle `t`.
    pub fn basis_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        let (p0, p1, p2) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let two_area = 2.0 * signed_area(p0, p1, p2);
        [
            [(p1[1] - p2[1]) / two_area, (p2[0] - p1[0]) / two_area],
            [(p2[1] - p0[1]) / two_area, (p0[0] - p2[0]) / two_area],
            [(p0[1] - p1[1]) / two_area, (p1[0] - p0[0]) / two_area],
        ]
    }

    /// Checks the structural invariants: positive orientation, every boundary
    /// edge owned by one triangle, a single closed boundary loop and a
    /// contiguous Σ arc.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            let area = self.triangle_area(t);
            if !(area > 0.0) {
                return Err(Error::InvertedTriangle { index: t, area });
            }
        }
        let edges = &self.boundary_edges;
        for w in 0..edges.len() {
            let next = &edges[(w + 1) % edges.len()];
            if edges[w].nodes[1] != next.nodes[0] {
                return Err(Error::invalid("boundary edges do not form a single closed loop"));
            }
        }
        let switches = (0..edges.len())
            .filter(|&i| edges[i].in_sigma != edges[(i + 1) % edges.len()].in_sigma)
            .count();
        if !edges.iter().any(|e| e.in_sigma) {
            return Err(Error::EmptySigma);
        }
        if switches > 2 {
            return Err(Error::invalid("Σ edges do not form a contiguous arc"));
        }
        Ok(())
    }

    /// Locates the triangle containing `p` and returns its barycentric
    /// coordinates. Linear scan, intended for raster export.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        for (ti, t) in self.triangles.iter().enumerate() {
            let (a, b, c) = (self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]);
            let area = signed_area(a, b, c);
            let l0 = signed_area(p, b, c) / area;
            let l1 = signed_area(a, p, c) / area;
            let l2 = 1.0 - l0 - l1;
            let tol = -1e-12;
            if l0 >= tol && l1 >= tol && l2 >= tol {
                return Some((ti, [l0, l1, l2]));
            }
        }
        None
    }

    /// Evaluates the P1 interpolant of a nodal field at `p`.
    pub fn interpolate(&self, values: &[f64], p: [f64; 2]) -> Option<f64> {
        self.locate(p).map(|(t, l)| {
            let tri = self.triangles[t];
            l[0] * values[tri[0]] + l[1] * values[tri[1]] + l[2] * values[tri[2]]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_circle_flags_every_edge() {
        let mesh = generate_disk_mesh(0.2, 0.05, SigmaArc::full()).unwrap();
        mesh.validate().unwrap();
        assert!(mesh.boundary_edges.iter().all(|e| e.in_sigma));
        for n in mesh.boundary_nodes() {
            let p = mesh.nodes[n];
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - 0.2).abs() <= 1e-12 * 0.2);
        }
    }

    #[test]
    fn half_arc_fraction() {
        let mesh = generate_disk_mesh(0.2, 0.02, SigmaArc::new(0.0, PI)).unwrap();
        mesh.validate().unwrap();
        let total = mesh.boundary_edges.len();
        let in_sigma = mesh.boundary_edges.iter().filter(|e| e.in_sigma).count();
        assert!((in_sigma as f64 - 0.5 * total as f64).abs() <= 1.0);
    }

    #[test]
    fn sigma_mask_matches_midpoint_rule() {
        let arc = SigmaArc::new(1.0, 2.5);
        let mesh = generate_disk_mesh(0.2, 0.03, arc).unwrap();
        for e in &mesh.boundary_edges {
            let a = mesh.nodes[e.nodes[0]];
            let b = mesh.nodes[e.nodes[1]];
            let ang = (0.5 * (a[1] + b[1])).atan2(0.5 * (a[0] + b[0]));
            assert_eq!(e.in_sigma, arc.contains(ang));
        }
    }

    #[test]
    fn empty_arc_is_rejected() {
        assert!(matches!(
            generate_disk_mesh(0.2, 0.05, SigmaArc::new(1.0, 1.0)),
            Err(Error::EmptySigma)
        ));
        // too short to contain any edge midpoint
        assert!(matches!(
            generate_disk_mesh(0.2, 0.05, SigmaArc::new(0.0, 1e-6)),
            Err(Error::EmptySigma)
        ));
    }

    #[test]
    fn refinement_doubles_boundary_and_converges_area() {
        let exact = PI * 0.04;
        let coarse = generate_disk_mesh(0.2, 0.04, SigmaArc::full()).unwrap();
        let fine = generate_disk_mesh(0.2, 0.02, SigmaArc::full()).unwrap();
        assert_eq!(fine.boundary_edges.len(), 2 * coarse.boundary_edges.len());
        let e_coarse = exact - coarse.total_area();
        let e_fine = exact - fine.total_area();
        assert!(e_coarse > 0.0 && e_fine > 0.0);
        // inscribed polygon: error ratio 4 for halved edge length
        let ratio = e_coarse / e_fine;
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn normals_point_outward() {
        let mesh = generate_disk_mesh(0.2, 0.05, SigmaArc::full()).unwrap();
        for e in &mesh.boundary_edges {
            let p = mesh.nodes[e.nodes[0]];
            assert!(e.normal[0] * p[0] + e.normal[1] * p[1] > 0.0);
        }
    }

    #[test]
    fn interpolation_reproduces_linear_fields() {
        let mesh = generate_disk_mesh(0.2, 0.05, SigmaArc::full()).unwrap();
        let f: Vec<f64> = mesh.nodes.iter().map(|p| 1.0 + 2.0 * p[0] - 3.0 * p[1]).collect();
        let v = mesh.interpolate(&f, [0.05, -0.07]).unwrap();
        assert!((v - (1.0 + 0.1 + 0.21)).abs() < 1e-12);
        assert!(mesh.interpolate(&f, [0.3, 0.0]).is_none());
    }
}
