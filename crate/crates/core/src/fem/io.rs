//! Text formats: the sectioned mesh file and the nodal field CSV.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use num_complex::Complex64;

use super::mesh::Mesh2D;
use crate::{Error, Result};

/// Serializes a mesh into the `NODES` / `TRIANGLES` / `BOUNDARY` text format.
pub fn write_mesh(mesh: &Mesh2D) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "NODES {}", mesh.nodes.len());
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{i} {:.17e} {:.17e}", p[0], p[1]);
    }
    let _ = writeln!(s, "TRIANGLES {}", mesh.triangles.len());
    for (i, t) in mesh.triangles.iter().enumerate() {
        let _ = writeln!(s, "{i} {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "BOUNDARY {}", mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let _ = writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], u8::from(e.in_sigma));
    }
    s
}

pub fn read_mesh(reader: impl Read) -> Result<Mesh2D> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Nodes,
        Triangles,
        Boundary,
    }
    let mut section = Section::None;
    let mut nodes = Vec::new();
    let mut triangles = Vec::new();
    let mut flags: Vec<([usize; 2], bool)> = Vec::new();
    let parse_err = |line: usize, what: &str| Error::Parse(format!("line {}: {what}", line + 1));
    for (ln, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let head = line.split_whitespace().next().unwrap_or("");
        match head {
            "NODES" => {
                section = Section::Nodes;
                continue;
            }
            "TRIANGLES" => {
                section = Section::Triangles;
                continue;
            }
            "BOUNDARY" => {
                section = Section::Boundary;
                continue;
            }
            _ => {}
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        match section {
            Section::Nodes => {
                if f.len() != 3 {
                    return Err(parse_err(ln, "expected `id x y`"));
                }
                let x = f[1].parse::<f64>().map_err(|_| parse_err(ln, "bad x"))?;
                let y = f[2].parse::<f64>().map_err(|_| parse_err(ln, "bad y"))?;
                nodes.push([x, y]);
            }
            Section::Triangles => {
                if f.len() != 4 {
                    return Err(parse_err(ln, "expected `id n1 n2 n3`"));
                }
                let mut t = [0usize; 3];
                for k in 0..3 {
                    t[k] = f[k + 1].parse().map_err(|_| parse_err(ln, "bad node index"))?;
                }
                triangles.push(t);
            }
            Section::Boundary => {
                if f.len() != 3 {
                    return Err(parse_err(ln, "expected `n1 n2 sigma_flag`"));
                }
                let a: usize = f[0].parse().map_err(|_| parse_err(ln, "bad node index"))?;
                let b: usize = f[1].parse().map_err(|_| parse_err(ln, "bad node index"))?;
                let flag = match f[2] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(parse_err(ln, "sigma_flag must be 0 or 1")),
                };
                flags.push(([a, b], flag));
            }
            Section::None => return Err(parse_err(ln, "data before any section header")),
        }
    }
    if let Some(t) = triangles.iter().flatten().find(|&&i| i >= nodes.len()) {
        return Err(Error::Parse(format!("triangle references missing node {t}")));
    }
    let lookup: std::collections::HashMap<(usize, usize), bool> =
        flags.iter().map(|(e, f)| ((e[0].min(e[1]), e[0].max(e[1])), *f)).collect();
    let mut mesh = Mesh2D::from_parts(nodes, triangles, |_| false)?;
    for e in mesh.boundary_edges.iter_mut() {
        let key = (e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1]));
        e.in_sigma = *lookup
            .get(&key)
            .ok_or_else(|| Error::Parse(format!("boundary edge {key:?} missing from BOUNDARY section")))?;
    }
    if lookup.len() != mesh.boundary_edges.len() {
        return Err(Error::Parse("BOUNDARY section lists non-boundary edges".into()));
    }
    Ok(mesh)
}

/// Header `node_id,x,y,re_m0,im_m0,...,re_mN,im_mN`.
pub fn field_header(order: usize) -> String {
    let mut s = String::from("node_id,x,y");
    for m in 0..=order {
        let _ = write!(s, ",re_m{m},im_m{m}");
    }
    s
}

/// Writes harmonic coefficients (`coeffs[m][k]` for node `nodes[k]`) as CSV.
pub fn write_field_csv(mesh: &Mesh2D, nodes: &[usize], coeffs: &[Vec<Complex64>]) -> String {
    let order = coeffs.len().saturating_sub(1);
    let mut s = field_header(order);
    s.push('\n');
    for (k, &node) in nodes.iter().enumerate() {
        let p = mesh.nodes[node];
        let _ = write!(s, "{node},{:.17e},{:.17e}", p[0], p[1]);
        for c in coeffs {
            let _ = write!(s, ",{:.17e},{:.17e}", c[k].re, c[k].im);
        }
        s.push('\n');
    }
    s
}

/// Parses a field CSV; returns node ids and `coeffs[m][k]`.
pub fn read_field_csv(reader: impl Read) -> Result<(Vec<usize>, Vec<Vec<Complex64>>)> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty field file".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 5 || cols[0] != "node_id" || (cols.len() - 3) % 2 != 0 {
        return Err(Error::Parse(format!("bad field header `{header}`")));
    }
    let harmonics = (cols.len() - 3) / 2;
    let mut ids = Vec::new();
    let mut coeffs = vec![Vec::new(); harmonics];
    for (ln, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != cols.len() {
            return Err(Error::Parse(format!("row {}: expected {} columns", ln + 2, cols.len())));
        }
        ids.push(f[0].parse().map_err(|_| Error::Parse(format!("row {}: bad node id", ln + 2)))?);
        for m in 0..harmonics {
            let re: f64 = f[3 + 2 * m].parse().map_err(|_| Error::Parse(format!("row {}", ln + 2)))?;
            let im: f64 = f[4 + 2 * m].parse().map_err(|_| Error::Parse(format!("row {}", ln + 2)))?;
            coeffs[m].push(Complex64::new(re, im));
        }
    }
    Ok((ids, coeffs))
}
