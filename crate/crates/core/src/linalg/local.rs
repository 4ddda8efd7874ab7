//! Serial building blocks: a plain CSR block with `usize` indices and a
//! dense LU factorization with partial pivoting for small direct solves
//! (subdomain problems, coarse levels).

use crate::error::{Error, Result};

/// Rank-local sparse block with sorted rows.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalCsr {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl LocalCsr {
    /// From unsorted row lists; duplicates are summed.
    pub fn from_rows(ncols: usize, mut rows: Vec<Vec<(usize, f64)>>) -> LocalCsr {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            let start = col_idx.len();
            for &(c, v) in row.iter() {
                debug_assert!(c < ncols);
                if col_idx.len() > start && *col_idx.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        LocalCsr {
            nrows: rows.len(),
            ncols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn from_dense(nrows: usize, ncols: usize, a: &[f64]) -> LocalCsr {
        let rows = (0..nrows)
            .map(|i| {
                (0..ncols)
                    .filter(|&j| a[i * ncols + j] != 0.0)
                    .map(|j| (j, a[i * ncols + j]))
                    .collect()
            })
            .collect();
        LocalCsr::from_rows(ncols, rows)
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.vals[r])
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map(|k| v[k]).unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.nrows * self.ncols];
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                a[i * self.ncols + j] += x;
            }
        }
        a
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Dense LU with partial pivoting, `P A = L U`, stored in place.
#[derive(Clone, Debug)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    /// Factor the row-major `n x n` matrix `a`.
    pub fn factor(n: usize, mut a: Vec<f64>) -> Result<DenseLu> {
        if a.len() != n * n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                found: a.len(),
            });
        }
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * f64::EPSILON * n.max(1) as f64;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pv <= tiny || pv == 0.0 {
                return Err(Error::Singular(format!("zero pivot in column {k}")));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let d = a[k * n + k];
            for i in k + 1..n {
                let l = a[i * n + k] / d;
                if l == 0.0 {
                    continue;
                }
                a[i * n + k] = l;
                for j in k + 1..n {
                    a[i * n + j] -= l * a[k * n + j];
                }
            }
        }
        Ok(DenseLu { n, lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Overwrite `b` with `A^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * y[j];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * y[j];
            }
            y[i] = s / self.lu[i * n + i];
        }
        b[..n].copy_from_slice(&y);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
