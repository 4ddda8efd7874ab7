use std::sync::Arc;

use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::linalg::{CsrMatrix, Map, MultiVector};

use super::{require_square, Smoother};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelaxationKind {
    Jacobi,
    GaussSeidelForward,
    GaussSeidelBackward,
    /// Forward sweep followed by a backward sweep.
    GaussSeidelSymmetric,
}

impl RelaxationKind {
    pub fn parse(name: &str) -> Option<RelaxationKind> {
        Some(match name.to_ascii_lowercase().as_str() {
            "jacobi" => RelaxationKind::Jacobi,
            "gauss_seidel" | "gauss-seidel" | "gauss_seidel_forward" => {
                RelaxationKind::GaussSeidelForward
            }
            "gauss_seidel_backward" => RelaxationKind::GaussSeidelBackward,
            "gauss_seidel_symmetric" | "symmetric_gauss_seidel" | "sgs" => {
                RelaxationKind::GaussSeidelSymmetric
            }
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxationConfig {
    pub kind: RelaxationKind,
    pub sweeps: usize,
    pub damping: f64,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        RelaxationConfig {
            kind: RelaxationKind::Jacobi,
            sweeps: 1,
            damping: 1.0,
        }
    }
}

/// Point relaxation. Gauss-Seidel sweeps are exact on the rank's rows and
/// see off-rank values as they were when the sweep started.
#[derive(Clone, Debug)]
pub struct Relaxation {
    a: Arc<CsrMatrix>,
    cfg: RelaxationConfig,
    inv_diag: Vec<f64>,
}

impl Relaxation {
    pub fn new(a: Arc<CsrMatrix>, cfg: RelaxationConfig) -> Result<Relaxation> {
        require_square(&a)?;
        if cfg.sweeps == 0 || !(cfg.damping > 0.0) {
            return Err(Error::InvalidArgument(
                "relaxation needs at least one sweep and positive damping".into(),
            ));
        }
        let inv_diag = inverse_diagonal(&a)?;
        Ok(Relaxation { a, cfg, inv_diag })
    }

    pub fn config(&self) -> &RelaxationConfig {
        &self.cfg
    }

    fn jacobi_sweep(&self, b: &MultiVector, x: &mut MultiVector) -> Result<()> {
        let mut r = b.clone();
        self.a.apply(x, &mut r, -1.0, 1.0)?;
        let w = self.cfg.damping;
        for j in 0..x.ncols() {
            let rj = r.col(j);
            for ((xi, ri), di) in x.col_mut(j).iter_mut().zip(rj).zip(&self.inv_diag) {
                *xi += w * di * ri;
            }
        }
        Ok(())
    }

    fn gs_sweep(&self, b: &MultiVector, x: &mut MultiVector, forward: bool) -> Result<()> {
        let mut xc = self.a.ghosted(x)?;
        let n = x.local_len();
        let w = self.cfg.damping;
        for j in 0..x.ncols() {
            let bj = b.col(j);
            let xcj = xc.col_mut(j);
            let mut relax = |i: usize| {
                let (cols, vals) = self.a.row(i);
                let mut s = bj[i];
                for (&c, &v) in cols.iter().zip(vals) {
                    if c as usize != i {
                        s -= v * xcj[c as usize];
                    }
                }
                xcj[i] += w * (s * self.inv_diag[i] - xcj[i]);
            };
            if forward {
                (0..n).for_each(&mut relax);
            } else {
                (0..n).rev().for_each(&mut relax);
            }
            x.col_mut(j).copy_from_slice(&xcj[..n]);
        }
        Ok(())
    }
}

impl Smoother for Relaxation {
    fn smooth(&self, b: &MultiVector, x: &mut MultiVector) -> Result<()> {
        for _ in 0..self.cfg.sweeps {
            match self.cfg.kind {
                RelaxationKind::Jacobi => self.jacobi_sweep(b, x)?,
                RelaxationKind::GaussSeidelForward => self.gs_sweep(b, x, true)?,
                RelaxationKind::GaussSeidelBackward => self.gs_sweep(b, x, false)?,
                RelaxationKind::GaussSeidelSymmetric => {
                    self.gs_sweep(b, x, true)?;
                    self.gs_sweep(b, x, false)?;
                }
            }
        }
        Ok(())
    }
}

impl LinearOperator for Relaxation {
    fn domain_map(&self) -> &Map {
        self.a.row_map()
    }

    fn range_map(&self) -> &Map {
        self.a.row_map()
    }

    fn apply(&self, r: &MultiVector, z: &mut MultiVector) -> Result<()> {
        z.fill(0.0);
        self.smooth(r, z)
    }
}

/// `1 / a_ii` for every owned row; a missing or zero diagonal is an error
/// naming the global row.
pub(crate) fn inverse_diagonal(a: &CsrMatrix) -> Result<Vec<f64>> {
    let d = a.diagonal();
    d.col(0)
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v == 0.0 {
                Err(Error::ZeroDiagonal(a.row_map().gid(i)))
            } else {
                Ok(1.0 / v)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::{launch, Comm};

    fn poisson_1d(c: &Comm, n: u64) -> Arc<CsrMatrix> {
        let m = Map::contiguous(n, c);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        Arc::new(CsrMatrix::from_triplets(&m, &m, &t).unwrap())
    }

    #[test]
    fn jacobi_on_identity_is_exact() {
        let c = Comm::serial();
        let m = Map::contiguous(4, &c);
        let t: Vec<_> = (0..4).map(|i| (i, i, 1.0)).collect();
        let a = Arc::new(CsrMatrix::from_triplets(&m, &m, &t).unwrap());
        let r = Relaxation::new(a, RelaxationConfig::default()).unwrap();
        let b = MultiVector::from_fn(&m, 1, |g, _| g as f64 - 1.5);
        let mut x = MultiVector::constant(&m, 1, 7.0);
        r.smooth(&b, &mut x).unwrap();
        assert_eq!(x.col(0), b.col(0));
    }

    #[test]
    fn forward_gs_solves_lower_triangular() {
        let c = Comm::serial();
        let m = Map::contiguous(3, &c);
        let t = [
            (0, 0, 2.0),
            (1, 0, 1.0),
            (1, 1, 4.0),
            (2, 0, -1.0),
            (2, 1, 3.0),
            (2, 2, 5.0),
        ];
        let a = Arc::new(CsrMatrix::from_triplets(&m, &m, &t).unwrap());
        let cfg = RelaxationConfig {
            kind: RelaxationKind::GaussSeidelForward,
            ..Default::default()
        };
        let r = Relaxation::new(a, cfg).unwrap();
        let b = MultiVector::from_local(&m, 1, vec![2.0, 9.0, 11.0]).unwrap();
        let mut x = MultiVector::zeros(&m, 1);
        r.smooth(&b, &mut x).unwrap();
        // forward substitution by hand: x0 = 1, x1 = 2, x2 = (11 + 1 - 6) / 5
        for (u, v) in x.col(0).iter().zip([1.0, 2.0, 1.2]) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_diagonal_names_row() {
        let c = Comm::serial();
        let m = Map::contiguous(2, &c);
        let a = CsrMatrix::from_triplets(&m, &m, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        assert_eq!(
            Relaxation::new(Arc::new(a), RelaxationConfig::default()).unwrap_err(),
            Error::ZeroDiagonal(1)
        );
    }

    /// Two ranks: each rank sweeps its block exactly while the other block's
    /// values are frozen at the sweep start, i.e. block Jacobi whose blocks
    /// are solved by one Gauss-Seidel sweep each.
    #[test]
    fn hybrid_gs_matches_two_block_oracle() {
        let n = 8usize;
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let x0: Vec<f64> = (0..n).map(|i| 0.1 * i as f64).collect();
        let out = launch(2, |c| {
            let a = poisson_1d(c, n as u64);
            let m = a.row_map().clone();
            let cfg = RelaxationConfig {
                kind: RelaxationKind::GaussSeidelSymmetric,
                sweeps: 2,
                damping: 1.0,
            };
            let r = Relaxation::new(a, cfg)?;
            let bv = MultiVector::from_fn(&m, 1, |g, _| b[g as usize]);
            let mut x = MultiVector::from_fn(&m, 1, |g, _| x0[g as usize]);
            r.smooth(&bv, &mut x)?;
            Ok(x.gather_global()?.remove(0))
        })
        .unwrap();

        let dense = |i: usize, j: usize| -> f64 {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        };
        let blocks = [0..4usize, 4..8usize];
        let mut x = x0.clone();
        let sweep = |x: &mut Vec<f64>, forward: bool| {
            let frozen = x.clone();
            for blk in &blocks {
                let order: Vec<usize> = if forward {
                    blk.clone().collect()
                } else {
                    blk.clone().rev().collect()
                };
                for i in order {
                    let mut s = b[i];
                    for j in 0..n {
                        if j != i {
                            let xj = if blk.contains(&j) { x[j] } else { frozen[j] };
                            s -= dense(i, j) * xj;
                        }
                    }
                    x[i] = s / dense(i, i);
                }
            }
        };
        for _ in 0..2 {
            sweep(&mut x, true);
            sweep(&mut x, false);
        }
        for (u, v) in out[0].iter().zip(&x) {
            assert!((u - v).abs() < 1e-14, "{u} vs {v}");
        }
    }
}
