use crate::codec;
use crate::comm::ReduceOp;
use crate::error::{Error, Result};

use super::map::{Gid, Lid, Map};
use super::plan::{CombineMode, ImportPlan, Pack, Unpack};

/// Dense block of `ncols` distributed column vectors sharing one map.
/// Local storage is column-major.
#[derive(Clone, Debug)]
pub struct MultiVector {
    map: Map,
    ncols: usize,
    data: Vec<f64>,
}

impl MultiVector {
    pub fn zeros(map: &Map, ncols: usize) -> MultiVector {
        assert!(ncols >= 1, "a multivector needs at least one column");
        MultiVector {
            map: map.clone(),
            ncols,
            data: vec![0.0; map.local_len() * ncols],
        }
    }

    pub fn from_local(map: &Map, ncols: usize, data: Vec<f64>) -> Result<MultiVector> {
        if ncols == 0 || data.len() != map.local_len() * ncols {
            return Err(Error::LengthMismatch {
                expected: map.local_len() * ncols,
                found: data.len(),
            });
        }
        Ok(MultiVector {
            map: map.clone(),
            ncols,
            data,
        })
    }

    /// Entries given as a function of (global index, column).
    pub fn from_fn(map: &Map, ncols: usize, f: impl Fn(Gid, usize) -> f64) -> MultiVector {
        let mut mv = MultiVector::zeros(map, ncols);
        let n = map.local_len();
        for j in 0..ncols {
            for i in 0..n {
                mv.data[j * n + i] = f(map.gid(i), j);
            }
        }
        mv
    }

    pub fn constant(map: &Map, ncols: usize, value: f64) -> MultiVector {
        MultiVector {
            map: map.clone(),
            ncols,
            data: vec![value; map.local_len() * ncols],
        }
    }

    pub fn map(&self) -> &Map {
        &self.map
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn local_len(&self) -> usize {
        self.map.local_len()
    }

    pub fn col(&self, j: usize) -> &[f64] {
        let n = self.local_len();
        &self.data[j * n..(j + 1) * n]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.local_len();
        &mut self.data[j * n..(j + 1) * n]
    }

    pub fn local_data(&self) -> &[f64] {
        &self.data
    }

    pub fn local_data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Copy of column `j` as a single-column multivector.
    pub fn column(&self, j: usize) -> MultiVector {
        MultiVector {
            map: self.map.clone(),
            ncols: 1,
            data: self.col(j).to_vec(),
        }
    }

    pub fn set_column(&mut self, j: usize, src: &MultiVector) -> Result<()> {
        self.check_map(src)?;
        self.col_mut(j).copy_from_slice(src.col(0));
        Ok(())
    }

    fn check(&self, other: &MultiVector) -> Result<()> {
        self.check_map(other)?;
        if self.ncols != other.ncols {
            return Err(Error::LengthMismatch {
                expected: self.ncols,
                found: other.ncols,
            });
        }
        Ok(())
    }

    fn check_map(&self, other: &MultiVector) -> Result<()> {
        self.map.require_same(&other.map, "multivector maps differ")
    }

    /// Per-column global dot products.
    pub fn dot(&self, other: &MultiVector) -> Result<Vec<f64>> {
        self.check(other)?;
        let local: Vec<f64> = (0..self.ncols)
            .map(|j| {
                self.col(j)
                    .iter()
                    .zip(other.col(j))
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        self.map.comm().all_reduce(&local, ReduceOp::Sum)
    }

    pub fn norm2(&self) -> Result<Vec<f64>> {
        let local: Vec<f64> = (0..self.ncols)
            .map(|j| self.col(j).iter().map(|a| a * a).sum())
            .collect();
        Ok(self
            .map
            .comm()
            .all_reduce(&local, ReduceOp::Sum)?
            .into_iter()
            .map(f64::sqrt)
            .collect())
    }

    pub fn norm_inf(&self) -> Result<Vec<f64>> {
        let local: Vec<f64> = (0..self.ncols)
            .map(|j| self.col(j).iter().fold(0.0f64, |m, a| m.max(a.abs())))
            .collect();
        self.map.comm().all_reduce(&local, ReduceOp::Max)
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &MultiVector) -> Result<()> {
        self.check(x)?;
        for (y, xv) in self.data.iter_mut().zip(&x.data) {
            *y += alpha * xv;
        }
        Ok(())
    }

    /// `self = alpha * x + beta * self`. With `beta == 0` the old contents
    /// are ignored, including non-finite values.
    pub fn update(&mut self, alpha: f64, x: &MultiVector, beta: f64) -> Result<()> {
        self.check(x)?;
        if beta == 0.0 {
            for (y, xv) in self.data.iter_mut().zip(&x.data) {
                *y = alpha * xv;
            }
        } else {
            for (y, xv) in self.data.iter_mut().zip(&x.data) {
                *y = alpha * xv + beta * *y;
            }
        }
        Ok(())
    }

    /// Column-wise `self[:, j] += alphas[j] * x[:, j]`.
    pub fn axpy_cols(&mut self, alphas: &[f64], x: &MultiVector) -> Result<()> {
        self.check(x)?;
        let n = self.local_len();
        for (j, &a) in alphas.iter().enumerate().take(self.ncols) {
            for i in 0..n {
                self.data[j * n + i] += a * x.data[j * n + i];
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    pub fn assign(&mut self, src: &MultiVector) -> Result<()> {
        self.check(src)?;
        self.data.copy_from_slice(&src.data);
        Ok(())
    }

    /// Entrywise product `x .* y`.
    pub fn elementwise_multiply(x: &MultiVector, y: &MultiVector) -> Result<MultiVector> {
        x.check(y)?;
        Ok(MultiVector {
            map: x.map.clone(),
            ncols: x.ncols,
            data: x.data.iter().zip(&y.data).map(|(a, b)| a * b).collect(),
        })
    }

    /// New multivector on `plan.target()` filled from `self` (on
    /// `plan.source()`).
    pub fn import(&self, plan: &ImportPlan, mode: CombineMode) -> Result<MultiVector> {
        self.map.require_same(plan.source(), "import source map")?;
        let mut out = MultiVector::zeros(plan.target(), self.ncols);
        plan.forward(self, &mut out, mode)?;
        Ok(out)
    }

    /// Import into an existing target multivector.
    pub fn import_into(
        &self,
        plan: &ImportPlan,
        target: &mut MultiVector,
        mode: CombineMode,
    ) -> Result<()> {
        self.map.require_same(plan.source(), "import source map")?;
        target.map.require_same(plan.target(), "import target map")?;
        plan.forward(self, target, mode)
    }

    /// Reverse application: `self` lives on `plan.target()` and is
    /// combined into `target` on `plan.source()`.
    pub fn export_into(
        &self,
        plan: &ImportPlan,
        target: &mut MultiVector,
        mode: CombineMode,
    ) -> Result<()> {
        self.map.require_same(plan.target(), "export source map")?;
        target.map.require_same(plan.source(), "export target map")?;
        plan.reverse(self, target, mode)
    }

    /// Gather all columns to every rank, ordered by global index. Requires a
    /// one-to-one map. Collective; meant for tests and small problems.
    pub fn gather_global(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.map.global_len() as usize;
        let mut payload = Vec::new();
        codec::put_u64s(&mut payload, self.map.gids());
        codec::put_f64s(&mut payload, &self.data);
        let parts = self.map.comm().all_gather(&payload)?;
        let mut out = vec![vec![0.0; n]; self.ncols];
        for p in parts {
            let mut rd = codec::Reader::new(&p);
            let gids = rd.u64s();
            let vals = rd.f64s();
            let m = gids.len();
            for (j, col) in out.iter_mut().enumerate() {
                for (i, &g) in gids.iter().enumerate() {
                    col[g as usize] = vals[j * m + i];
                }
            }
        }
        Ok(out)
    }
}

impl Pack for MultiVector {
    fn pack(&self, lids: &[Lid], buf: &mut Vec<u8>) {
        let n = self.local_len();
        for &l in lids {
            for j in 0..self.ncols {
                codec::put_f64(buf, self.data[j * n + l as usize]);
            }
        }
    }
}

impl Unpack for MultiVector {
    fn unpack(&mut self, lids: &[Lid], buf: &[u8], mode: CombineMode) -> Result<()> {
        if buf.len() != lids.len() * self.ncols * 8 {
            return Err(Error::LengthMismatch {
                expected: lids.len() * self.ncols * 8,
                found: buf.len(),
            });
        }
        let n = self.local_len();
        let mut rd = codec::Reader::new(buf);
        for &l in lids {
            for j in 0..self.ncols {
                let v = rd.f64();
                let slot = &mut self.data[j * n + l as usize];
                match mode {
                    CombineMode::Insert => *slot = v,
                    CombineMode::Add => *slot += v,
                }
            }
        }
        Ok(())
    }
}
