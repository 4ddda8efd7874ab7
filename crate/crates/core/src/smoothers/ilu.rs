use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::linalg::{CsrMatrix, LocalCsr, Map, MultiVector};

use super::{correct, require_square, Smoother};

/// Incomplete LU factors of a square local block with level-of-fill `k`.
///
/// `L` (unit lower, diagonal not stored) and `U` (upper, diagonal stored
/// first in each row) share one row-wise layout.
#[derive(Clone, Debug)]
pub struct IluFactors {
    n: usize,
    level: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    levels: Vec<usize>,
    /// Position of the diagonal in each row.
    diag: Vec<usize>,
}

impl IluFactors {
    /// Symbolic and numeric factorization. A pivot smaller than
    /// `1e-14 · ‖A‖_F` fails with [`Error::ZeroPivot`] carrying the local
    /// row index.
    pub fn factor(a: &LocalCsr, k: usize) -> Result<IluFactors> {
        if a.nrows != a.ncols {
            return Err(Error::InvalidArgument(format!(
                "ILU needs a square block, got {}x{}",
                a.nrows, a.ncols
            )));
        }
        let n = a.nrows;
        let tiny = 1e-14 * a.frobenius_norm();

        // symbolic: fill levels row by row with the min-path rule
        let mut row_ptr = vec![0];
        let mut col_idx: Vec<usize> = Vec::new();
        let mut levels: Vec<usize> = Vec::new();
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            let mut row: BTreeMap<usize, usize> = BTreeMap::new();
            let (c, _) = a.row(i);
            for &j in c {
                row.insert(j, 0);
            }
            row.insert(i, row.get(&i).copied().unwrap_or(0));
            let mut cursor = 0usize;
            while let Some((&kk, &lik)) = row.range(cursor..i).next() {
                cursor = kk + 1;
                let ke = row_ptr[kk + 1];
                for p in diag[kk] + 1..ke {
                    let j = col_idx[p];
                    let lev = lik + levels[p] + 1;
                    if lev <= k {
                        let e = row.entry(j).or_insert(lev);
                        *e = (*e).min(lev);
                    }
                }
            }
            for (j, lev) in row {
                if j == i {
                    diag.push(col_idx.len());
                }
                col_idx.push(j);
                levels.push(lev);
            }
            row_ptr.push(col_idx.len());
        }

        // numeric: IKJ elimination restricted to the pattern
        let mut vals = vec![0.0; col_idx.len()];
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (s, e) = (row_ptr[i], row_ptr[i + 1]);
            for p in s..e {
                pos[col_idx[p]] = p;
            }
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                vals[pos[j]] += x;
            }
            for p in s..diag[i] {
                let kk = col_idx[p];
                let lik = vals[p] / vals[diag[kk]];
                vals[p] = lik;
                for q in diag[kk] + 1..row_ptr[kk + 1] {
                    let j = col_idx[q];
                    if pos[j] != usize::MAX {
                        vals[pos[j]] -= lik * vals[q];
                    }
                }
            }
            let piv = vals[diag[i]];
            for p in s..e {
                pos[col_idx[p]] = usize::MAX;
            }
            if !(piv.abs() >= tiny) || piv == 0.0 {
                return Err(Error::ZeroPivot(i as u64));
            }
        }
        Ok(IluFactors {
            n,
            level: k,
            row_ptr,
            col_idx,
            vals,
            levels,
            diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn fill_level(&self) -> usize {
        self.level
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Largest stored fill level.
    pub fn max_level(&self) -> usize {
        self.levels.iter().copied().max().unwrap_or(0)
    }

    /// Forward then backward substitution, in place.
    pub fn solve_in_place(&self, r: &mut [f64]) {
        for i in 0..self.n {
            let mut s = r[i];
            for p in self.row_ptr[i]..self.diag[i] {
                s -= self.vals[p] * r[self.col_idx[p]];
            }
            r[i] = s;
        }
        for i in (0..self.n).rev() {
            let mut s = r[i];
            for p in self.diag[i] + 1..self.row_ptr[i + 1] {
                s -= self.vals[p] * r[self.col_idx[p]];
            }
            r[i] = s / self.vals[self.diag[i]];
        }
    }

    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let mut z = r.to_vec();
        self.solve_in_place(&mut z);
        z
    }

    /// Dense `L` and `U` (row-major) for inspection.
    pub fn to_dense(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        let mut u = vec![0.0; n * n];
        for i in 0..n {
            l[i * n + i] = 1.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                if p < self.diag[i] {
                    l[i * n + j] = self.vals[p];
                } else {
                    u[i * n + j] = self.vals[p];
                }
            }
        }
        (l, u)
    }
}

/// Block-Jacobi ILU(k): every rank factors its diagonal block.
#[derive(Clone, Debug)]
pub struct Ilu {
    a: Arc<CsrMatrix>,
    factors: IluFactors,
}

impl Ilu {
    pub fn new(a: Arc<CsrMatrix>, k: usize) -> Result<Ilu> {
        require_square(&a)?;
        let factors = IluFactors::factor(&a.local_block(), k).map_err(|e| match e {
            Error::ZeroPivot(i) => Error::ZeroPivot(a.row_map().gid(i as usize)),
            e => e,
        })?;
        Ok(Ilu { a, factors })
    }

    pub fn factors(&self) -> &IluFactors {
        &self.factors
    }
}

impl LinearOperator for Ilu {
    fn domain_map(&self) -> &Map {
        self.a.row_map()
    }

    fn range_map(&self) -> &Map {
        self.a.row_map()
    }

    fn apply(&self, r: &MultiVector, z: &mut MultiVector) -> Result<()> {
        z.assign(r)?;
        for j in 0..z.ncols() {
            self.factors.solve_in_place(z.col_mut(j));
        }
        Ok(())
    }
}

impl Smoother for Ilu {
    fn smooth(&self, b: &MultiVector, x: &mut MultiVector) -> Result<()> {
        correct(&*self.a, self, b, x)
    }
}
