//! Smoothed-aggregation algebraic multigrid.
//!
//! Setup repeats aggregation, tentative prolongation, prolongator smoothing
//! and a Galerkin product until the operator is small enough to factor
//! densely. The hierarchy is applied as a V-cycle with a zero initial guess
//! on every level, which makes it a fixed linear operator usable as a
//! preconditioner.

mod aggregation;
mod prolongator;

pub use aggregation::{aggregate, filtered_graph, Aggregates};
pub use prolongator::{prolongator_omega, smooth_prolongator, tentative_prolongator};

use std::sync::Arc;

use log::warn;

use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::linalg::{CsrMatrix, DenseLu, Map, MultiVector};
use crate::paramlist::ParameterList;
use crate::smoothers::{build_smoother, Smoother};

#[derive(Clone, Debug, PartialEq)]
pub struct AmgConfig {
    pub drop_tolerance: f64,
    pub coarse_size: u64,
    pub max_levels: usize,
    /// `ω = damping / λmax(D⁻¹A)`; zero gives plain aggregation.
    pub prolongator_damping: f64,
    /// Smoother parameters for `build_smoother`; `None` disables smoothing.
    pub smoother: Option<ParameterList>,
}

impl Default for AmgConfig {
    fn default() -> Self {
        AmgConfig {
            drop_tolerance: 0.0,
            coarse_size: 16,
            max_levels: 10,
            prolongator_damping: 4.0 / 3.0,
            smoother: Some(ParameterList::new().with("smoother type", "symmetric_gauss_seidel")),
        }
    }
}

impl AmgConfig {
    /// Keys: "multigrid: drop tolerance", "multigrid: coarse size",
    /// "multigrid: max levels", "multigrid: prolongator damping" and
    /// "multigrid: smoother", either a smoother type name ("none" turns
    /// smoothing off) or a sublist of smoother parameters.
    pub fn from_params(p: &ParameterList) -> Result<AmgConfig> {
        let d = AmgConfig::default();
        let smoother = match p.get("multigrid: smoother") {
            None => d.smoother,
            Some(crate::ParameterValue::List(_)) => p.sublist("multigrid: smoother")?.cloned(),
            Some(_) => {
                let name = p.get_text("multigrid: smoother", "")?;
                if name.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(ParameterList::new().with("smoother type", name.as_str()))
                }
            }
        };
        let cfg = AmgConfig {
            drop_tolerance: p.get_real("multigrid: drop tolerance", d.drop_tolerance)?,
            coarse_size: p.get_count("multigrid: coarse size", d.coarse_size as usize)? as u64,
            max_levels: p.get_count("multigrid: max levels", d.max_levels)?,
            prolongator_damping: p.get_real(
                "multigrid: prolongator damping",
                d.prolongator_damping,
            )?,
            smoother,
        };
        if cfg.max_levels == 0 || !(cfg.drop_tolerance >= 0.0) {
            return Err(Error::InvalidArgument(
                "multigrid needs at least one level and a nonnegative drop tolerance".into(),
            ));
        }
        Ok(cfg)
    }
}

pub struct Level {
    pub a: Arc<CsrMatrix>,
    /// Prolongator to this level from the next coarser one.
    pub p: Option<CsrMatrix>,
    /// `Pᵀ`.
    pub r: Option<CsrMatrix>,
    smoother: Option<Box<dyn Smoother>>,
}

/// Multigrid hierarchy, finest level first.
pub struct Hierarchy {
    levels: Vec<Level>,
    coarse: DenseLu,
}

impl Hierarchy {
    /// Build the hierarchy for `a` with a constant nullspace. Collective.
    pub fn setup(a: Arc<CsrMatrix>, cfg: &AmgConfig) -> Result<Hierarchy> {
        crate::smoothers::require_square(&a)?;
        let mut levels = Vec::new();
        let mut cur = a;
        let mut ns = MultiVector::constant(cur.row_map(), 1, 1.0);
        loop {
            let n = cur.row_map().global_len();
            if n <= cfg.coarse_size || levels.len() + 1 >= cfg.max_levels {
                break;
            }
            let agg = aggregate(&cur, cfg.drop_tolerance);
            let (pt, coarse_ns) = tentative_prolongator(&agg, &ns)?;
            let nc = pt.domain_map().global_len();
            if nc as f64 > 0.95 * n as f64 {
                warn!(
                    "multigrid coarsening stalled at level {} ({} -> {} rows); stopping",
                    levels.len(),
                    n,
                    nc
                );
                break;
            }
            let omega = prolongator_omega(&cur, cfg.prolongator_damping)?;
            let p = smooth_prolongator(&cur, &pt, omega)?;
            let r = p.transpose()?;
            let ac = Arc::new(r.multiply(&cur.multiply(&p)?)?);
            let smoother = match &cfg.smoother {
                Some(sp) => Some(build_smoother(cur.clone(), sp)?),
                None => None,
            };
            levels.push(Level {
                a: cur,
                p: Some(p),
                r: Some(r),
                smoother,
            });
            cur = ac;
            ns = coarse_ns;
        }
        let n = cur.row_map().global_len() as usize;
        let coarse = DenseLu::factor(n, cur.gather_dense()?).map_err(|e| match e {
            Error::Singular(m) => Error::Singular(format!("coarsest multigrid level: {m}")),
            e => e,
        })?;
        levels.push(Level {
            a: cur,
            p: None,
            r: None,
            smoother: None,
        });
        Ok(Hierarchy { levels, coarse })
    }

    pub fn from_params(a: Arc<CsrMatrix>, p: &ParameterList) -> Result<Hierarchy> {
        Hierarchy::setup(a, &AmgConfig::from_params(p)?)
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Global operator dimension of every level.
    pub fn level_dims(&self) -> Vec<u64> {
        self.levels
            .iter()
            .map(|l| l.a.row_map().global_len())
            .collect()
    }

    /// Sum of nonzeros over all levels divided by the finest level's.
    pub fn operator_complexity(&self) -> Result<f64> {
        let mut total = 0.0;
        for l in &self.levels {
            total += l.a.global_nnz()? as f64;
        }
        Ok(total / self.levels[0].a.global_nnz()? as f64)
    }

    fn coarse_solve(&self, a: &CsrMatrix, b: &MultiVector, x: &mut MultiVector) -> Result<()> {
        let cols = b.gather_global()?;
        let map = a.row_map();
        for (j, mut c) in cols.into_iter().enumerate() {
            self.coarse.solve_in_place(&mut c);
            for (i, xi) in x.col_mut(j).iter_mut().enumerate() {
                *xi = c[map.gid(i) as usize];
            }
        }
        Ok(())
    }

    fn vcycle(&self, l: usize, b: &MultiVector, x: &mut MultiVector) -> Result<()> {
        let lev = &self.levels[l];
        let (Some(p), Some(r)) = (&lev.p, &lev.r) else {
            return self.coarse_solve(&lev.a, b, x);
        };
        x.fill(0.0);
        if let Some(s) = &lev.smoother {
            s.smooth(b, x)?;
        }
        let mut res = b.clone();
        lev.a.apply(x, &mut res, -1.0, 1.0)?;
        let mut bc = MultiVector::zeros(r.row_map(), b.ncols());
        r.apply(&res, &mut bc, 1.0, 0.0)?;
        let mut xc = MultiVector::zeros(r.row_map(), b.ncols());
        self.vcycle(l + 1, &bc, &mut xc)?;
        p.apply(&xc, x, 1.0, 1.0)?;
        if let Some(s) = &lev.smoother {
            s.smooth(b, x)?;
        }
        Ok(())
    }
}

impl LinearOperator for Hierarchy {
    fn domain_map(&self) -> &Map {
        self.levels[0].a.row_map()
    }

    fn range_map(&self) -> &Map {
        self.levels[0].a.row_map()
    }

    /// One V-cycle from a zero guess.
    fn apply(&self, r: &MultiVector, z: &mut MultiVector) -> Result<()> {
        self.vcycle(0, r, z)
    }
}

impl Smoother for Hierarchy {
    fn smooth(&self, b: &MultiVector, x: &mut MultiVector) -> Result<()> {
        let mut r = b.clone();
        self.levels[0].a.apply(x, &mut r, -1.0, 1.0)?;
        let mut z = MultiVector::zeros(x.map(), x.ncols());
        self.vcycle(0, &r, &mut z)?;
        x.axpy(1.0, &z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::{launch, Comm};

    fn tridiag(c: &Comm, n: u64) -> Arc<CsrMatrix> {
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
    fn small_problem_is_a_direct_solve() {
        let c = Comm::serial();
        let a = tridiag(&c, 12);
        let h = Hierarchy::setup(a.clone(), &AmgConfig::default()).unwrap();
        assert_eq!(h.num_levels(), 1);
        let b = MultiVector::from_fn(a.row_map(), 1, |g, _| (g as f64).sin());
        let mut z = MultiVector::zeros(a.row_map(), 1);
        h.apply(&b, &mut z).unwrap();
        let az = a.mul_vec(&z).unwrap();
        for (u, v) in az.col(0).iter().zip(b.col(0)) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn dims_shrink_and_galerkin_holds() {
        let out = launch(3, |c| {
            let a = tridiag(c, 81);
            let h = Hierarchy::setup(a, &AmgConfig::default())?;
            let mut errs = Vec::new();
            for w in h.levels().windows(2) {
                let p = w[0].p.as_ref().unwrap();
                let rap = p.transpose()?.multiply(&w[0].a.multiply(p)?)?;
                let diff = CsrMatrix::add(&rap, &w[1].a, 1.0, -1.0)?;
                errs.push(diff.frobenius_norm()? / w[1].a.frobenius_norm()?);
            }
            Ok((h.level_dims(), errs))
        })
        .unwrap();
        let (dims, errs) = &out[0];
        assert!(dims.len() >= 2);
        assert!(*dims.last().unwrap() <= 16);
        for w in dims.windows(2) {
            let ratio = w[0] as f64 / w[1] as f64;
            assert!((1.5..=3.5).contains(&ratio), "{dims:?}");
        }
        for e in errs {
            assert!(*e <= 1e-12);
        }
    }

    #[test]
    fn zero_residual_and_params() {
        let c = Comm::serial();
        let a = tridiag(&c, 50);
        let p = ParameterList::new()
            .with("multigrid: coarse size", 4i64)
            .with("multigrid: smoother", "chebyshev")
            .with("multigrid: max levels", 3i64);
        let h = Hierarchy::from_params(a.clone(), &p).unwrap();
        assert_eq!(h.num_levels(), 3);
        let r = MultiVector::zeros(a.row_map(), 2);
        let mut z = MultiVector::constant(a.row_map(), 2, 1.0);
        h.apply(&r, &mut z).unwrap();
        assert_eq!(z.norm_inf().unwrap(), [0.0, 0.0]);
    }
}
