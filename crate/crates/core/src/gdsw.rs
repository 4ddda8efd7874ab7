//! Two-level overlapping Schwarz with an energy-minimizing coarse space
//! built from the interface between rank subdomains.
//!
//! Interface nodes are grouped by the set of subdomains their graph
//! neighborhood touches (the signature); connected nodes of equal signature
//! form one component. Each component contributes one coarse basis function
//! equal to one on the component and extended into subdomain interiors by
//! solving the local Dirichlet problem.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::codec;
use crate::comm::ReduceOp;
use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::linalg::{CsrMatrix, DenseLu, Gid, LocalCsr, Map, MultiVector};
use crate::paramlist::ParameterList;
use crate::smoothers::{schwarz_config, Schwarz, SchwarzCombine, SchwarzConfig, Smoother};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeClass {
    Vertex,
    Edge,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterfaceComponent {
    /// Lowest global index in the component.
    pub id: Gid,
    pub signature: Vec<usize>,
    pub nodes: Vec<Gid>,
    pub class: NodeClass,
}

/// Interface nodes and their components, replicated on every rank.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InterfaceClassification {
    /// Sorted by id.
    pub components: Vec<InterfaceComponent>,
    /// Interface node → index into `components`.
    pub component_of: BTreeMap<Gid, usize>,
}

impl InterfaceClassification {
    pub fn is_interface(&self, g: Gid) -> bool {
        self.component_of.contains_key(&g)
    }

    pub fn component(&self, g: Gid) -> Option<&InterfaceComponent> {
        self.component_of.get(&g).map(|&c| &self.components[c])
    }

    pub fn signature(&self, g: Gid) -> Option<&[usize]> {
        self.component(g).map(|c| c.signature.as_slice())
    }
}

/// Symmetrized pattern of `a`, as global-index neighbor lists of owned
/// rows (self excluded). Collective.
fn neighbors(a: &CsrMatrix) -> Result<Vec<Vec<Gid>>> {
    let at = a.transpose()?;
    let g = CsrMatrix::add(a, &at, 1.0, 1.0)?;
    Ok((0..g.local_rows())
        .map(|i| {
            let gi = g.row_map().gid(i);
            g.row_global(i)
                .into_iter()
                .map(|(j, _)| j)
                .filter(|&j| j != gi)
                .collect()
        })
        .collect())
}

/// Classify interface nodes for the one-subdomain-per-rank decomposition
/// given by `a`'s row map. Collective.
pub fn identify_interface(a: &CsrMatrix) -> Result<InterfaceClassification> {
    let map = a.row_map();
    map.require_same(a.domain_map(), "interface detection needs a square matrix")?;
    let comm = map.comm();
    let empty = comm.all_reduce_scalar((map.local_len() == 0) as u8 as f64, ReduceOp::Max)?;
    if empty > 0.0 {
        return Err(Error::InvalidArgument(
            "every rank needs a nonempty subdomain".into(),
        ));
    }
    let nbrs = neighbors(a)?;
    let me = comm.rank();

    // local interface nodes with signature and same-signature neighbors
    let mut payload = Vec::new();
    let mut local: Vec<(Gid, Vec<usize>, Vec<Gid>)> = Vec::new();
    for (i, nb) in nbrs.iter().enumerate() {
        let owners = map.owners(nb)?;
        let mut sig: BTreeSet<usize> = owners.iter().copied().collect();
        sig.insert(me);
        if sig.len() >= 2 {
            local.push((map.gid(i), sig.into_iter().collect(), nb.clone()));
        }
    }
    for (g, sig, nb) in &local {
        codec::put_u64(&mut payload, *g);
        codec::put_u64s(&mut payload, &sig.iter().map(|&s| s as u64).collect::<Vec<_>>());
        codec::put_u64s(&mut payload, nb);
    }
    let parts = comm.all_gather(&payload)?;
    let mut nodes: BTreeMap<Gid, (Vec<usize>, Vec<Gid>)> = BTreeMap::new();
    for p in parts {
        let mut rd = codec::Reader::new(&p);
        while !rd.is_empty() {
            let g = rd.u64();
            let sig = rd.u64s().into_iter().map(|s| s as usize).collect();
            let nb = rd.u64s();
            nodes.insert(g, (sig, nb));
        }
    }

    // union-find over edges between interface nodes of equal signature
    let index: HashMap<Gid, usize> = nodes.keys().enumerate().map(|(k, &g)| (g, k)).collect();
    let gids: Vec<Gid> = nodes.keys().copied().collect();
    let mut parent: Vec<usize> = (0..gids.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (k, (sig, nb)) in nodes.values().enumerate() {
        for j in nb {
            if let Some(&l) = index.get(j) {
                if nodes[j].0 == *sig {
                    let (ra, rb) = (find(&mut parent, k), find(&mut parent, l));
                    // the smaller index is the lower gid, so roots stay minimal
                    let (lo, hi) = (ra.min(rb), ra.max(rb));
                    parent[hi] = lo;
                }
            }
        }
    }
    let mut by_root: BTreeMap<usize, Vec<Gid>> = BTreeMap::new();
    for k in 0..gids.len() {
        let r = find(&mut parent, k);
        by_root.entry(r).or_default().push(gids[k]);
    }
    let mut out = InterfaceClassification::default();
    for (root, members) in by_root {
        let signature = nodes[&gids[root]].0.clone();
        let class = if signature.len() >= 3 || members.len() == 1 {
            NodeClass::Vertex
        } else {
            NodeClass::Edge
        };
        let c = out.components.len();
        for &g in &members {
            out.component_of.insert(g, c);
        }
        out.components.push(InterfaceComponent {
            id: gids[root],
            signature,
            nodes: members,
            class,
        });
    }
    Ok(out)
}

/// Coarse basis `Φ` with one column per interface component (constant
/// nullspace): one on the component's nodes, discrete-harmonic extension
/// into each subdomain interior. Row map is `a`'s row map, domain map is a
/// contiguous map over the components. Collective.
pub fn build_coarse_basis(a: &CsrMatrix, cls: &InterfaceClassification) -> Result<CsrMatrix> {
    let map = a.row_map();
    let n = map.local_len();
    let nc = cls.components.len() as u64;
    let coarse_map = Map::contiguous(nc, map.comm());

    let interior: Vec<usize> = (0..n).filter(|&i| !cls.is_interface(map.gid(i))).collect();
    let mut ipos = vec![usize::MAX; n];
    for (k, &i) in interior.iter().enumerate() {
        ipos[i] = k;
    }
    let mut rows: Vec<Vec<(Gid, f64)>> = vec![Vec::new(); n];
    // right-hand sides −A_IΓ Φ_Γ, one per component touching the interior
    let mut rhs: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for i in 0..n {
        let gi = map.gid(i);
        if let Some(&c) = cls.component_of.get(&gi) {
            rows[i].push((c as Gid, 1.0));
        }
    }
    for (k, &i) in interior.iter().enumerate() {
        for (gj, v) in a.row_global(i) {
            if let Some(&c) = cls.component_of.get(&gj) {
                rhs.entry(c).or_insert_with(|| vec![0.0; interior.len()])[k] -= v;
            }
        }
    }
    if !rhs.is_empty() {
        let block = LocalCsr::from_rows(
            interior.len(),
            interior
                .iter()
                .map(|&i| {
                    let (cols, vals) = a.row(i);
                    cols.iter()
                        .zip(vals)
                        .filter(|(&l, _)| (l as usize) < n && ipos[l as usize] != usize::MAX)
                        .map(|(&l, &v)| (ipos[l as usize], v))
                        .collect()
                })
                .collect(),
        );
        let lu = DenseLu::factor(interior.len(), block.to_dense()).map_err(|e| match e {
            Error::Singular(m) => Error::Singular(format!(
                "interior block on rank {}: {m}",
                map.comm().rank()
            )),
            e => e,
        })?;
        for (c, mut b) in rhs {
            lu.solve_in_place(&mut b);
            for (k, &v) in b.iter().enumerate() {
                if v != 0.0 {
                    rows[interior[k]].push((c as Gid, v));
                }
            }
        }
    }
    CsrMatrix::from_rows(map, &coarse_map, rows)
}

/// `ΦᵀAΦ` as a dense row-major matrix replicated on every rank. Collective.
pub fn galerkin_dense(a: &CsrMatrix, phi: &CsrMatrix) -> Result<Vec<f64>> {
    let nc = phi.domain_map().global_len() as usize;
    let w = a.multiply(phi)?;
    let mut local = vec![0.0; nc * nc];
    for i in 0..phi.local_rows() {
        let wi = w.row_global(i);
        for (c, p) in phi.row_global(i) {
            for &(d, v) in &wi {
                local[c as usize * nc + d as usize] += p * v;
            }
        }
    }
    if nc == 0 {
        return Ok(local);
    }
    phi.row_map().comm().all_reduce(&local, ReduceOp::Sum)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GdswConfig {
    pub first_level: SchwarzConfig,
}

impl Default for GdswConfig {
    fn default() -> Self {
        GdswConfig {
            first_level: SchwarzConfig {
                combine: SchwarzCombine::Additive,
                ..SchwarzConfig::default()
            },
        }
    }
}

impl GdswConfig {
    /// Keys: "coarse space" ("gdsw"), "overlap", "nullspace" ("constant"),
    /// "interface classification" ("signature") plus the first-level
    /// Schwarz keys "subdomain solver", "ilu fill level" and "combine mode".
    pub fn from_params(p: &ParameterList) -> Result<GdswConfig> {
        for (key, only) in [
            ("coarse space", "gdsw"),
            ("nullspace", "constant"),
            ("interface classification", "signature"),
        ] {
            let v = p.get_text(key, only)?;
            if !v.eq_ignore_ascii_case(only) {
                return Err(Error::UnknownType {
                    key: key.into(),
                    value: v,
                });
            }
        }
        let mut first = schwarz_config(p, SchwarzCombine::Additive)?;
        first.overlap = p.get_count("overlap", first.overlap)?;
        Ok(GdswConfig { first_level: first })
    }
}

/// Additive two-level preconditioner
/// `M⁻¹ = Φ A0⁻¹ Φᵀ + Σ_i R_iᵀ Ã_i⁻¹ R_i`.
pub struct TwoLevelPreconditioner {
    a: Arc<CsrMatrix>,
    first: Schwarz,
    classification: InterfaceClassification,
    phi: CsrMatrix,
    coarse_dense: Vec<f64>,
    coarse: Option<DenseLu>,
}

impl TwoLevelPreconditioner {
    pub fn new(a: Arc<CsrMatrix>, cfg: GdswConfig) -> Result<TwoLevelPreconditioner> {
        let classification = identify_interface(&a)?;
        let phi = build_coarse_basis(&a, &classification)?;
        let coarse_dense = galerkin_dense(&a, &phi)?;
        let nc = classification.components.len();
        let coarse = if nc > 0 {
            Some(DenseLu::factor(nc, coarse_dense.clone())?)
        } else {
            None
        };
        let first = Schwarz::new(a.clone(), cfg.first_level)?;
        Ok(TwoLevelPreconditioner {
            a,
            first,
            classification,
            phi,
            coarse_dense,
            coarse,
        })
    }

    pub fn classification(&self) -> &InterfaceClassification {
        &self.classification
    }

    pub fn coarse_basis(&self) -> &CsrMatrix {
        &self.phi
    }

    /// Row-major `A0 = ΦᵀAΦ`.
    pub fn coarse_matrix(&self) -> &[f64] {
        &self.coarse_dense
    }

    pub fn coarse_dim(&self) -> usize {
        self.classification.components.len()
    }

    /// `z = Φ A0⁻¹ Φᵀ r` only.
    pub fn coarse_correction(&self, r: &MultiVector, z: &mut MultiVector) -> Result<()> {
        z.fill(0.0);
        let Some(lu) = &self.coarse else {
            return Ok(());
        };
        let nc = self.coarse_dim();
        for j in 0..r.ncols() {
            let rj = r.col(j);
            let mut local = vec![0.0; nc];
            for (i, &ri) in rj.iter().enumerate() {
                let (cols, vals) = self.phi.row(i);
                for (&c, &p) in cols.iter().zip(vals) {
                    local[self.phi.col_map().gid(c as usize) as usize] += p * ri;
                }
            }
            let mut y = self.phi.row_map().comm().all_reduce(&local, ReduceOp::Sum)?;
            lu.solve_in_place(&mut y);
            for (i, zi) in z.col_mut(j).iter_mut().enumerate() {
                let (cols, vals) = self.phi.row(i);
                *zi = cols
                    .iter()
                    .zip(vals)
                    .map(|(&c, &p)| p * y[self.phi.col_map().gid(c as usize) as usize])
                    .sum();
            }
        }
        Ok(())
    }
}

impl LinearOperator for TwoLevelPreconditioner {
    fn domain_map(&self) -> &Map {
        self.a.row_map()
    }

    fn range_map(&self) -> &Map {
        self.a.row_map()
    }

    fn apply(&self, r: &MultiVector, z: &mut MultiVector) -> Result<()> {
        self.coarse_correction(r, z)?;
        let mut z1 = MultiVector::zeros(r.map(), r.ncols());
        self.first.apply(r, &mut z1)?;
        z.axpy(1.0, &z1)
    }
}

impl Smoother for TwoLevelPreconditioner {
    fn smooth(&self, b: &MultiVector, x: &mut MultiVector) -> Result<()> {
        let mut r = b.clone();
        self.a.apply(x, &mut r, -1.0, 1.0)?;
        let mut z = MultiVector::zeros(x.map(), x.ncols());
        LinearOperator::apply(self, &r, &mut z)?;
        x.axpy(1.0, &z)
    }
}
