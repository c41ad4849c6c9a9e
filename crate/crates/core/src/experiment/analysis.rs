//! Scalar summaries of reconstructed fields.

use crate::fem::Mesh2D;

/// Nodes where `sign·(field − reference) ≥ level · max sign·(field − reference)`.
pub fn contrast_support(field: &[f64], reference: &[f64], sign: f64, level: f64) -> Vec<usize> {
    let con: Vec<f64> = field.iter().zip(reference).map(|(f, r)| sign * (f - r)).collect();
    let max = con.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    (0..con.len()).filter(|&i| con[i] >= level * max).collect()
}

/// Contrast-weighted centroid of the thresholded support.
pub fn contrast_centroid(
    mesh: &Mesh2D,
    lumped: &[f64],
    field: &[f64],
    reference: &[f64],
    sign: f64,
    level: f64,
) -> Option<[f64; 2]> {
    let (mut wx, mut wy, mut w) = (0.0, 0.0, 0.0);
    for i in contrast_support(field, reference, sign, level) {
        let c = lumped[i] * sign * (field[i] - reference[i]);
        wx += c * mesh.nodes[i][0];
        wy += c * mesh.nodes[i][1];
        w += c;
    }
    (w > 0.0).then(|| [wx / w, wy / w])
}

/// Area-weighted mean of `field − reference` over the disk.
pub fn mean_contrast(mesh: &Mesh2D, lumped: &[f64], field: &[f64], reference: &[f64], center: [f64; 2], radius: f64) -> f64 {
    let (mut acc, mut area) = (0.0, 0.0);
    for (i, p) in mesh.nodes.iter().enumerate() {
        if (p[0] - center[0]).hypot(p[1] - center[1]) <= radius {
            acc += lumped[i] * (field[i] - reference[i]);
            area += lumped[i];
        }
    }
    if area > 0.0 {
        acc / area
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, generate_disk_mesh, SigmaArc};

    #[test]
    fn centroid_of_a_bump() {
        let mesh = generate_disk_mesh(0.2, 0.01, SigmaArc::full()).unwrap();
        let ops = assemble(&mesh, 1.0, None).unwrap();
        let n = mesh.n_nodes();
        let reference = vec![5.0; n];
        let field: Vec<f64> = mesh
            .nodes
            .iter()
            .map(|p| 5.0 - (-((p[0] - 0.05).powi(2) + (p[1] + 0.04).powi(2)) / 1e-3).exp())
            .collect();
        let c = contrast_centroid(&mesh, &ops.lumped, &field, &reference, -1.0, 0.5).unwrap();
        assert!((c[0] - 0.05).abs() < 3e-3 && (c[1] + 0.04).abs() < 3e-3, "{c:?}");
        assert!(contrast_centroid(&mesh, &ops.lumped, &field, &reference, 1.0, 0.5).is_none());
        let m = mean_contrast(&mesh, &ops.lumped, &field, &reference, [0.05, -0.04], 0.01);
        assert!(m < -0.9);
    }
}
