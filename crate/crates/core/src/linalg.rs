//! Dense row-major matrices and a Householder QR with rank detection.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must equal rows * cols");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| libm::fabs(self[(i, j)] - self[(j, i)]) <= tol))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Relative threshold below which a column counts as a combination of earlier ones.
pub(crate) const RANK_TOL: f64 = 1e-9;

/// Thin QR factorization `A = Q R` by Householder reflections, columns in order.
pub(crate) struct Qr {
    /// `R`, upper triangular, `k x k`.
    pub r: Matrix,
    /// `Q^T b` (first `k` entries) for the right-hand side factored alongside.
    pub qtb: Vec<f64>,
}

/// Columns that are (numerically) linear combinations of earlier ones. Each
/// group lists the earlier columns involved, then the dependent column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct RankDeficiency {
    pub groups: Vec<Vec<usize>>,
}

/// Factors `a` together with a right-hand side `b`.
pub(crate) fn householder_qr(a: &Matrix, b: &[f64]) -> Result<Qr, RankDeficiency> {
    let (n, k) = (a.rows(), a.cols());
    assert_eq!(b.len(), n, "right-hand side length must equal rows");
    // column-major working copy, rhs appended
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| a.column(j)).collect();
    cols.push(b.to_vec());
    let norms: Vec<f64> = cols.iter().map(|c| libm::sqrt(c.iter().map(|x| x * x).sum())).collect();

    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut r = Matrix::zeros(k, k);
    let mut groups = Vec::new();
    let mut accepted: Vec<usize> = Vec::new();

    for j in 0..=k {
        for (h, v) in reflectors.iter().enumerate() {
            let col = &mut cols[j];
            let dot: f64 = v.iter().zip(&col[h..]).map(|(a, b)| a * b).sum();
            for (x, vi) in col[h..].iter_mut().zip(v) {
                *x -= 2.0 * dot * vi;
            }
        }
        if j == k {
            break;
        }
        let h = reflectors.len();
        let col = &cols[j];
        let tail: f64 = libm::sqrt(col[h..].iter().map(|x| x * x).sum());
        if norms[j] == 0.0 || tail <= RANK_TOL * norms[j] || h == n {
            // solve the accepted triangle for the representation of column j
            let top = &col[..h];
            let mut z = vec![0.0; h];
            for i in (0..h).rev() {
                let s: f64 = (i + 1..h).map(|m| r[(i, m)] * z[m]).sum();
                z[i] = (top[i] - s) / r[(i, i)];
            }
            // members are columns whose share of column j is not negligible
            let mut g: Vec<usize> = z
                .iter()
                .zip(&accepted)
                .filter(|(c, &m)| libm::fabs(**c) * norms[m] > 1e-8 * norms[j])
                .map(|(_, &m)| m)
                .collect();
            g.push(j);
            groups.push(g);
            continue;
        }
        let alpha = if col[h] > 0.0 { -tail } else { tail };
        let mut v: Vec<f64> = col[h..].to_vec();
        v[0] -= alpha;
        let vn = libm::sqrt(v.iter().map(|x| x * x).sum());
        for x in &mut v {
            *x /= vn;
        }
        let col = &mut cols[j];
        col[h] = alpha;
        for x in &mut col[h + 1..] {
            *x = 0.0;
        }
        for (i, &x) in col[..=h].iter().enumerate() {
            r[(i, h)] = x;
        }
        reflectors.push(v);
        accepted.push(j);
    }

    if !groups.is_empty() {
        return Err(RankDeficiency { groups });
    }
    let rhs = &cols[k];
    Ok(Qr { r, qtb: rhs[..k].to_vec() })
}

/// Solves `R x = b` for upper-triangular `R`.
pub(crate) fn solve_upper(r: &Matrix, b: &[f64]) -> Vec<f64> {
    let k = r.rows();
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|m| r[(i, m)] * x[m]).sum();
        x[i] = (b[i] - s) / r[(i, i)];
    }
    x
}

/// `(R^T R)^{-1} = R^{-1} R^{-T}` for upper-triangular `R`.
pub(crate) fn gram_inverse(r: &Matrix) -> Matrix {
    let k = r.rows();
    let mut rinv = Matrix::zeros(k, k);
    let mut e = vec![0.0; k];
    for j in 0..k {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[j] = 1.0;
        let col = solve_upper(r, &e);
        for (i, v) in col.into_iter().enumerate() {
            rinv[(i, j)] = v;
        }
    }
    rinv.matmul(&rinv.transpose())
}
