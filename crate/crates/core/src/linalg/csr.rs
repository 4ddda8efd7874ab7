use std::collections::HashSet;
use std::sync::Arc;

use crate::codec;
use crate::comm::ReduceOp;
use crate::error::{Error, Result};

use super::local::LocalCsr;
use super::map::{Gid, Lid, Map};
use super::multivector::MultiVector;
use super::plan::{normalize_row, pack_row, CombineMode, ImportPlan, Pack, RowSet};

/// Row-distributed sparse matrix in compressed-row form.
///
/// Rows follow a one-to-one row map (which is also the range map).
/// Column indices are local to the column map, which lists every owned
/// domain index first (in domain order, so column-local `l` below the
/// domain's local length is domain-local `l`) and then the referenced
/// ghost indices sorted by owning rank and global index. Column indices are strictly increasing
/// within each row. The import plan from the domain map to the column map
/// is built once at construction.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    row_map: Map,
    col_map: Map,
    domain_map: Map,
    row_ptr: Vec<usize>,
    col_idx: Vec<Lid>,
    vals: Vec<f64>,
    importer: Arc<ImportPlan>,
}

impl CsrMatrix {
    /// Assemble from owned rows given as `(global column, value)` lists.
    /// Duplicates are summed; explicit zeros are kept. Collective.
    pub fn from_rows(
        row_map: &Map,
        domain_map: &Map,
        mut rows: Vec<Vec<(Gid, f64)>>,
    ) -> Result<CsrMatrix> {
        if !row_map.is_one_to_one() || !domain_map.is_one_to_one() {
            return Err(Error::NotOneToOne(
                "row and domain maps must be one-to-one".into(),
            ));
        }
        if rows.len() != row_map.local_len() {
            return Err(Error::LengthMismatch {
                expected: row_map.local_len(),
                found: rows.len(),
            });
        }
        let n_domain = domain_map.global_len();
        let mut bad = None;
        let mut seen = HashSet::new();
        let mut ghosts: Vec<Gid> = Vec::new();
        for row in &mut rows {
            normalize_row(row);
            for &(g, _) in row.iter() {
                if g >= n_domain {
                    bad.get_or_insert(g);
                    continue;
                }
                if domain_map.lid(g).is_none() && seen.insert(g) {
                    ghosts.push(g);
                }
            }
        }
        let ghost_owners = domain_map.owners(&ghosts)?;
        let mut ghost_order: Vec<usize> = (0..ghosts.len()).collect();
        ghost_order.sort_by_key(|&i| (ghost_owners[i], ghosts[i]));
        let col_gids: Vec<Gid> = domain_map
            .gids()
            .iter()
            .copied()
            .chain(ghost_order.iter().map(|&i| ghosts[i]))
            .collect();
        let col_map = Map::overlapping(n_domain, col_gids, domain_map.comm())?;
        let importer = ImportPlan::build(domain_map, &col_map)?;
        if let Some(g) = bad {
            return Err(Error::IndexNotFound(g));
        }

        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        let mut buf: Vec<(Lid, f64)> = Vec::new();
        for row in &rows {
            buf.clear();
            buf.extend(
                row.iter()
                    .map(|&(g, v)| (col_map.lid(g).expect("column map covers row"), v)),
            );
            buf.sort_unstable_by_key(|e| e.0);
            for &(c, v) in &buf {
                col_idx.push(c);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            row_map: row_map.clone(),
            col_map,
            domain_map: domain_map.clone(),
            row_ptr,
            col_idx,
            vals,
            importer: Arc::new(importer),
        })
    }

    /// Each rank keeps the triplets `(row, col, value)` whose row it owns.
    /// Convenient when every rank holds the same global triplet list.
    pub fn from_triplets(
        row_map: &Map,
        domain_map: &Map,
        triplets: &[(Gid, Gid, f64)],
    ) -> Result<CsrMatrix> {
        let mut rows = vec![Vec::new(); row_map.local_len()];
        for &(i, j, v) in triplets {
            if i >= row_map.global_len() {
                return Err(Error::IndexNotFound(i));
            }
            if let Some(l) = row_map.lid(i) {
                rows[l as usize].push((j, v));
            }
        }
        CsrMatrix::from_rows(row_map, domain_map, rows)
    }

    pub fn row_map(&self) -> &Map {
        &self.row_map
    }

    pub fn range_map(&self) -> &Map {
        &self.row_map
    }

    pub fn col_map(&self) -> &Map {
        &self.col_map
    }

    pub fn domain_map(&self) -> &Map {
        &self.domain_map
    }

    pub fn importer(&self) -> &ImportPlan {
        &self.importer
    }

    pub fn local_rows(&self) -> usize {
        self.row_map.local_len()
    }

    pub fn local_nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn global_nnz(&self) -> Result<u64> {
        Ok(self
            .row_map
            .comm()
            .all_reduce_scalar(self.vals.len() as f64, ReduceOp::Sum)? as u64)
    }

    /// Column-map local indices and values of local row `i`.
    pub fn row(&self, i: usize) -> (&[Lid], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.vals[r])
    }

    pub fn row_mut_values(&mut self, i: usize) -> &mut [f64] {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        &mut self.vals[r]
    }

    /// Row `i` with global column indices, sorted by global index.
    pub fn row_global(&self, i: usize) -> Vec<(Gid, f64)> {
        let (c, v) = self.row(i);
        let mut out: Vec<(Gid, f64)> = c
            .iter()
            .zip(v)
            .map(|(&l, &x)| (self.col_map.gid(l as usize), x))
            .collect();
        out.sort_by_key(|e| e.0);
        out
    }

    pub fn rows_global(&self) -> Vec<Vec<(Gid, f64)>> {
        (0..self.local_rows()).map(|i| self.row_global(i)).collect()
    }

    /// `x` imported onto the column map.
    pub fn ghosted(&self, x: &MultiVector) -> Result<MultiVector> {
        x.import(&self.importer, CombineMode::Insert)
    }

    /// `y = alpha * A x + beta * y`. Collective.
    pub fn apply(&self, x: &MultiVector, y: &mut MultiVector, alpha: f64, beta: f64) -> Result<()> {
        x.map().require_same(&self.domain_map, "spmv input must live on the domain map")?;
        y.map().require_same(&self.row_map, "spmv output must live on the range map")?;
        if x.ncols() != y.ncols() {
            return Err(Error::LengthMismatch {
                expected: x.ncols(),
                found: y.ncols(),
            });
        }
        let xc = self.ghosted(x)?;
        self.apply_local(&xc, y, alpha, beta);
        Ok(())
    }

    /// Local kernel on an already ghosted input.
    pub fn apply_local(&self, xc: &MultiVector, y: &mut MultiVector, alpha: f64, beta: f64) {
        for j in 0..y.ncols() {
            let xj = xc.col(j);
            let yj = y.col_mut(j);
            for (i, yi) in yj.iter_mut().enumerate() {
                let r = self.row_ptr[i]..self.row_ptr[i + 1];
                let s: f64 = self.col_idx[r.clone()]
                    .iter()
                    .zip(&self.vals[r])
                    .map(|(&c, &a)| a * xj[c as usize])
                    .sum();
                *yi = if beta == 0.0 {
                    alpha * s
                } else {
                    alpha * s + beta * *yi
                };
            }
        }
    }

    /// `A * x` as a new multivector.
    pub fn mul_vec(&self, x: &MultiVector) -> Result<MultiVector> {
        let mut y = MultiVector::zeros(&self.row_map, x.ncols());
        self.apply(x, &mut y, 1.0, 0.0)?;
        Ok(y)
    }

    /// Sparse product `self * b`. Requires `self.domain_map == b.row_map`.
    /// Collective.
    pub fn multiply(&self, b: &CsrMatrix) -> Result<CsrMatrix> {
        self.domain_map
            .require_same(&b.row_map, "spgemm needs A's domain map equal to B's row map")?;
        let mut b_rows = RowSet::new(&self.col_map);
        self.importer.forward(b, &mut b_rows, CombineMode::Insert)?;
        let mut rows = Vec::with_capacity(self.local_rows());
        let mut acc: Vec<(Gid, f64)> = Vec::new();
        for i in 0..self.local_rows() {
            acc.clear();
            let (c, v) = self.row(i);
            for (&k, &a) in c.iter().zip(v) {
                acc.extend(b_rows.rows[k as usize].iter().map(|&(g, bv)| (g, a * bv)));
            }
            let mut row = acc.clone();
            normalize_row(&mut row);
            rows.push(row);
        }
        CsrMatrix::from_rows(&self.row_map, &b.domain_map, rows)
    }

    /// `A^T`, with row map equal to this matrix's domain map. Collective.
    pub fn transpose(&self) -> Result<CsrMatrix> {
        let mut local = RowSet::new(&self.col_map);
        for i in 0..self.local_rows() {
            let gi = self.row_map.gid(i);
            let (c, v) = self.row(i);
            for (&k, &a) in c.iter().zip(v) {
                local.rows[k as usize].push((gi, a));
            }
        }
        let mut owned = RowSet::new(&self.domain_map);
        self.importer.reverse(&local, &mut owned, CombineMode::Add)?;
        CsrMatrix::from_rows(&self.domain_map, &self.row_map, owned.rows)
    }

    /// `alpha * A + beta * B` on identical row and domain maps.
    pub fn add(a: &CsrMatrix, b: &CsrMatrix, alpha: f64, beta: f64) -> Result<CsrMatrix> {
        a.row_map.require_same(&b.row_map, "matrix add needs equal row maps")?;
        a.domain_map
            .require_same(&b.domain_map, "matrix add needs equal domain maps")?;
        let rows = (0..a.local_rows())
            .map(|i| {
                let mut r: Vec<(Gid, f64)> = a
                    .row_global(i)
                    .into_iter()
                    .map(|(g, v)| (g, alpha * v))
                    .chain(b.row_global(i).into_iter().map(|(g, v)| (g, beta * v)))
                    .collect();
                normalize_row(&mut r);
                r
            })
            .collect();
        CsrMatrix::from_rows(&a.row_map, &a.domain_map, rows)
    }

    /// Diagonal entries as a vector on the row map (zero where absent).
    pub fn diagonal(&self) -> MultiVector {
        let mut d = MultiVector::zeros(&self.row_map, 1);
        let out = d.col_mut(0);
        for (i, slot) in out.iter_mut().enumerate() {
            let gi = self.row_map.gid(i);
            let (c, v) = self.row(i);
            if let Some(k) = c.iter().position(|&l| self.col_map.gid(l as usize) == gi) {
                *slot = v[k];
            }
        }
        d
    }

    pub fn frobenius_norm(&self) -> Result<f64> {
        let local: f64 = self.vals.iter().map(|v| v * v).sum();
        Ok(self
            .row_map
            .comm()
            .all_reduce_scalar(local, ReduceOp::Sum)?
            .sqrt())
    }

    pub fn max_abs(&self) -> Result<f64> {
        let local = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.row_map.comm().all_reduce_scalar(local, ReduceOp::Max)
    }

    /// Multiply row `i` by `d[i]`.
    pub fn scale_rows(&mut self, d: &[f64]) {
        for (i, &s) in d.iter().enumerate().take(self.local_rows()) {
            for v in self.row_mut_values(i) {
                *v *= s;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.vals {
            *v *= alpha;
        }
    }

    /// Owned rows restricted to columns owned in the domain map, indexed by
    /// domain local index. For square matrices with equal row and domain
    /// maps this is the rank's diagonal block.
    pub fn local_block(&self) -> LocalCsr {
        let nd = self.domain_map.local_len();
        let rows = (0..self.local_rows())
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter()
                    .zip(v)
                    .filter(|(&l, _)| (l as usize) < nd)
                    .map(|(&l, &x)| (l as usize, x))
                    .collect()
            })
            .collect();
        LocalCsr::from_rows(nd, rows)
    }

    /// All entries as sorted `(row, col, value)` triplets on every rank.
    /// Collective; meant for tests, output and small problems.
    pub fn gather_triplets(&self) -> Result<Vec<(Gid, Gid, f64)>> {
        let mut payload = Vec::new();
        for i in 0..self.local_rows() {
            for (g, v) in self.row_global(i) {
                codec::put_u64(&mut payload, self.row_map.gid(i));
                codec::put_u64(&mut payload, g);
                codec::put_f64(&mut payload, v);
            }
        }
        let parts = self.row_map.comm().all_gather(&payload)?;
        let mut out = Vec::new();
        for p in parts {
            let mut rd = codec::Reader::new(&p);
            while !rd.is_empty() {
                out.push((rd.u64(), rd.u64(), rd.f64()));
            }
        }
        out.sort_by_key(|t| (t.0, t.1));
        Ok(out)
    }

    /// Dense row-major copy of the global matrix on every rank. Collective.
    pub fn gather_dense(&self) -> Result<Vec<f64>> {
        let n = self.row_map.global_len() as usize;
        let m = self.domain_map.global_len() as usize;
        let mut a = vec![0.0; n * m];
        for (i, j, v) in self.gather_triplets()? {
            a[i as usize * m + j as usize] += v;
        }
        Ok(a)
    }
}

impl Pack for CsrMatrix {
    fn pack(&self, lids: &[Lid], buf: &mut Vec<u8>) {
        for &l in lids {
            let (c, v) = self.row(l as usize);
            pack_row(
                buf,
                c.iter()
                    .zip(v)
                    .map(|(&k, &x)| (self.col_map.gid(k as usize), x)),
            );
        }
    }
}
