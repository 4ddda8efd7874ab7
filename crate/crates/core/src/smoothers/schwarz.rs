use std::collections::HashSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::linalg::{
    CombineMode, CsrMatrix, DenseLu, Gid, ImportPlan, LocalCsr, Map, MultiVector, RowSet,
};

use super::ilu::IluFactors;
use super::{correct, require_square, Smoother};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubdomainSolver {
    DenseLu,
    Ilu(usize),
}

/// How overlapping subdomain corrections are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchwarzCombine {
    /// Sum every subdomain's contribution.
    Additive,
    /// Keep only each rank's owned part of its own correction.
    RestrictedAdditive,
}

impl SchwarzCombine {
    pub fn parse(name: &str) -> Result<SchwarzCombine> {
        match name.to_ascii_lowercase().as_str() {
            "additive" => Ok(SchwarzCombine::Additive),
            "restricted_additive" | "restricted additive" | "ras" => {
                Ok(SchwarzCombine::RestrictedAdditive)
            }
            _ => Err(Error::UnknownType {
                key: "combine mode".into(),
                value: name.into(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SchwarzConfig {
    pub overlap: usize,
    pub solver: SubdomainSolver,
    pub combine: SchwarzCombine,
}

impl Default for SchwarzConfig {
    fn default() -> Self {
        SchwarzConfig {
            overlap: 1,
            solver: SubdomainSolver::DenseLu,
            combine: SchwarzCombine::Additive,
        }
    }
}

/// Owned rows plus every row within `delta` edges in the symmetrized graph
/// of `a`. Owned indices come first in row-map order, then each layer's
/// new indices sorted ascending. Collective.
pub fn overlap_map(a: &CsrMatrix, delta: usize) -> Result<Map> {
    require_square(a)?;
    let row_map = a.row_map();
    let mut gids: Vec<Gid> = row_map.gids().to_vec();
    if delta == 0 {
        return Map::overlapping(row_map.global_len(), gids, row_map.comm());
    }
    let at = a.transpose()?;
    let graph = CsrMatrix::add(a, &at, 1.0, 1.0)?;
    let mut seen: HashSet<Gid> = gids.iter().copied().collect();
    let mut frontier_start = 0;
    for _ in 0..delta {
        let map = Map::overlapping(row_map.global_len(), gids.clone(), row_map.comm())?;
        let rows = import_rows(&graph, &map)?;
        let mut layer: Vec<Gid> = Vec::new();
        for row in &rows.rows[frontier_start..] {
            for &(g, _) in row {
                if seen.insert(g) {
                    layer.push(g);
                }
            }
        }
        layer.sort_unstable();
        frontier_start = gids.len();
        gids.extend(layer);
    }
    Map::overlapping(row_map.global_len(), gids, row_map.comm())
}

/// Rows of `a` for every index of `target`. Collective.
pub(crate) fn import_rows(a: &CsrMatrix, target: &Map) -> Result<RowSet> {
    let plan = ImportPlan::build(a.row_map(), target)?;
    let mut rows = RowSet::new(target);
    plan.forward(a, &mut rows, CombineMode::Insert)?;
    Ok(rows)
}

/// `R A Rᵀ` for the overlapping index set `sub`, i.e. the imported rows
/// with columns outside `sub` dropped. Collective.
pub(crate) fn restricted_block(a: &CsrMatrix, sub: &Map) -> Result<LocalCsr> {
    let rows = import_rows(a, sub)?;
    let local = rows
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .filter_map(|&(g, v)| sub.lid(g).map(|l| (l as usize, v)))
                .collect()
        })
        .collect();
    Ok(LocalCsr::from_rows(sub.local_len(), local))
}

#[derive(Clone, Debug)]
pub(crate) enum LocalSolver {
    Lu(DenseLu),
    Ilu(IluFactors),
}

impl LocalSolver {
    /// Factor a subdomain block; failures name the rank and, for pivots,
    /// the global row.
    pub(crate) fn factor(block: &LocalCsr, kind: SubdomainSolver, map: &Map) -> Result<Self> {
        let rank = map.comm().rank();
        match kind {
            SubdomainSolver::DenseLu => DenseLu::factor(block.nrows, block.to_dense())
                .map(LocalSolver::Lu)
                .map_err(|e| match e {
                    Error::Singular(m) => Error::Singular(format!("subdomain on rank {rank}: {m}")),
                    e => e,
                }),
            SubdomainSolver::Ilu(k) => IluFactors::factor(block, k)
                .map(LocalSolver::Ilu)
                .map_err(|e| match e {
                    Error::ZeroPivot(i) => Error::ZeroPivot(map.gid(i as usize)),
                    e => e,
                }),
        }
    }

    pub(crate) fn solve_in_place(&self, r: &mut [f64]) {
        match self {
            LocalSolver::Lu(lu) => lu.solve_in_place(r),
            LocalSolver::Ilu(f) => f.solve_in_place(r),
        }
    }
}

/// One-level overlapping Schwarz preconditioner, one subdomain per rank.
#[derive(Clone, Debug)]
pub struct Schwarz {
    a: Arc<CsrMatrix>,
    sub_map: Map,
    plan: ImportPlan,
    solver: LocalSolver,
    combine: SchwarzCombine,
}

impl Schwarz {
    pub fn new(a: Arc<CsrMatrix>, cfg: SchwarzConfig) -> Result<Schwarz> {
        let sub_map = overlap_map(&a, cfg.overlap)?;
        let block = restricted_block(&a, &sub_map)?;
        let plan = ImportPlan::build(a.row_map(), &sub_map)?;
        let solver = LocalSolver::factor(&block, cfg.solver, &sub_map)?;
        Ok(Schwarz {
            a,
            sub_map,
            plan,
            solver,
            combine: cfg.combine,
        })
    }

    /// The rank's overlapping index set.
    pub fn subdomain(&self) -> &Map {
        &self.sub_map
    }
}

impl LinearOperator for Schwarz {
    fn domain_map(&self) -> &Map {
        self.a.row_map()
    }

    fn range_map(&self) -> &Map {
        self.a.row_map()
    }

    fn apply(&self, r: &MultiVector, z: &mut MultiVector) -> Result<()> {
        let mut rl = r.import(&self.plan, CombineMode::Insert)?;
        for j in 0..rl.ncols() {
            self.solver.solve_in_place(rl.col_mut(j));
        }
        match self.combine {
            SchwarzCombine::Additive => {
                z.fill(0.0);
                rl.export_into(&self.plan, z, CombineMode::Add)
            }
            SchwarzCombine::RestrictedAdditive => {
                let n = z.local_len();
                for j in 0..z.ncols() {
                    z.col_mut(j).copy_from_slice(&rl.col(j)[..n]);
                }
                Ok(())
            }
        }
    }
}

impl Smoother for Schwarz {
    fn smooth(&self, b: &MultiVector, x: &mut MultiVector) -> Result<()> {
        correct(&*self.a, self, b, x)
    }
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
    fn overlap_layers_follow_graph_distance() {
        let out = launch(3, |c| {
            let a = poisson_1d(c, 12);
            Ok((
                overlap_map(&a, 0)?.gids().to_vec(),
                overlap_map(&a, 2)?.gids().to_vec(),
            ))
        })
        .unwrap();
        assert_eq!(out[1].0, [4, 5, 6, 7]);
        assert_eq!(out[1].1, [4, 5, 6, 7, 3, 8, 2, 9]);
        assert_eq!(out[0].1, [0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn single_domain_is_exact() {
        let c = Comm::serial();
        let a = poisson_1d(&c, 10);
        let cfg = SchwarzConfig {
            overlap: 0,
            ..Default::default()
        };
        let s = Schwarz::new(a.clone(), cfg).unwrap();
        let map = a.row_map().clone();
        let r = MultiVector::from_fn(&map, 1, |g, _| g as f64);
        let mut z = MultiVector::zeros(&map, 1);
        s.apply(&r, &mut z).unwrap();
        let az = a.mul_vec(&z).unwrap();
        for (u, v) in az.col(0).iter().zip(r.col(0)) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_overlap_is_block_jacobi_in_both_modes() {
        let n = 10usize;
        let out = launch(2, |c| {
            let a = poisson_1d(c, n as u64);
            let map = a.row_map().clone();
            let r = MultiVector::from_fn(&map, 1, |g, _| (g as f64 + 1.0).ln());
            let mut res = Vec::new();
            for combine in [SchwarzCombine::Additive, SchwarzCombine::RestrictedAdditive] {
                let cfg = SchwarzConfig {
                    overlap: 0,
                    solver: SubdomainSolver::DenseLu,
                    combine,
                };
                let s = Schwarz::new(a.clone(), cfg)?;
                let mut z = MultiVector::zeros(&map, 1);
                s.apply(&r, &mut z)?;
                res.push(z.gather_global()?.remove(0));
            }
            Ok(res)
        })
        .unwrap();
        assert_eq!(out[0][0], out[0][1]);

        // oracle: invert each 5x5 diagonal block independently
        let r: Vec<f64> = (0..n).map(|g| (g as f64 + 1.0).ln()).collect();
        let mut expect = vec![0.0; n];
        for blk in [0..5usize, 5..10] {
            let m = blk.len();
            let mut d = vec![0.0; m * m];
            for i in 0..m {
                d[i * m + i] = 2.0;
                if i > 0 {
                    d[i * m + i - 1] = -1.0;
                }
                if i + 1 < m {
                    d[i * m + i + 1] = -1.0;
                }
            }
            let z = DenseLu::factor(m, d).unwrap().solve(&r[blk.clone()]);
            expect[blk].copy_from_slice(&z);
        }
        for (u, v) in out[0][0].iter().zip(&expect) {
            assert!((u - v).abs() < 1e-13);
        }
    }
}
