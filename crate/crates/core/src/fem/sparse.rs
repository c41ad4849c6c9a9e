//! Minimal compressed-sparse-row storage for assembled FE operators.

use std::ops::{Add, AddAssign, Mul};

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Csr<T> {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<T>,
}

impl<T> Csr<T>
where
    T: Copy + Default + AddAssign + Add<Output = T> + Mul<Output = T>,
{
    /// Square matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    vals.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Csr { n, row_ptr, col_idx, vals }
    }

    pub fn zeros(n: usize) -> Self {
        Csr { n, row_ptr: vec![0; n + 1], col_idx: Vec::new(), vals: Vec::new() }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.vals[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i).find(|&(c, _)| c == j).map(|(_, v)| v).unwrap_or_default()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        (0..self.n).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n)
            .map(|i| self.row(i).fold(T::default(), |acc, (_, v)| acc + v))
            .collect()
    }
}

impl Csr<f64> {
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// Real matrix applied to a complex vector.
    pub fn matvec_c(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| x[j] * v).sum())
            .collect()
    }

    pub fn to_complex(&self) -> Csr<Complex64> {
        Csr {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            vals: self.vals.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Csr { vals: self.vals.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol))
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.matvec(x)).map(|(a, b)| a * b).sum()
    }
}

impl Csr<Complex64> {
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }
}

/// Sum of two matrices with possibly different patterns.
pub fn add<T>(a: &Csr<T>, b: &Csr<T>) -> Csr<T>
where
    T: Copy + Default + AddAssign + Add<Output = T> + Mul<Output = T>,
{
    assert_eq!(a.n, b.n);
    let mut trip = a.triplets();
    trip.extend(b.triplets());
    Csr::from_triplets(a.n, &trip)
}
