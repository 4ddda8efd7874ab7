use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::linalg::{CsrMatrix, Gid, Map, MultiVector};

use super::relaxation::inverse_diagonal;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    Jacobi,
    GaussSeidel,
    /// Block LU with a caller-supplied Schur complement approximation.
    Lu,
}

impl BlockKind {
    pub fn parse(name: &str) -> Result<BlockKind> {
        match name.to_ascii_lowercase().as_str() {
            "block_jacobi" | "jacobi" => Ok(BlockKind::Jacobi),
            "block_gauss_seidel" | "gauss_seidel" => Ok(BlockKind::GaussSeidel),
            "block_lu" | "lu" => Ok(BlockKind::Lu),
            _ => Err(Error::UnknownType {
                key: "block type".into(),
                value: name.into(),
            }),
        }
    }
}

/// A 2x2 block operator `[A00 A01; A10 A11]` with approximate inverses of
/// the diagonal blocks and, for block LU, of the Schur complement.
pub struct BlockOperator2x2 {
    pub a00: Box<dyn LinearOperator>,
    pub a01: Box<dyn LinearOperator>,
    pub a10: Box<dyn LinearOperator>,
    pub a11: Box<dyn LinearOperator>,
    pub inv00: Option<Box<dyn LinearOperator>>,
    pub inv11: Option<Box<dyn LinearOperator>>,
    pub schur_inv: Option<Box<dyn LinearOperator>>,
}

fn need<'a>(
    op: &'a Option<Box<dyn LinearOperator>>,
    what: &str,
) -> Result<&'a dyn LinearOperator> {
    op.as_deref().ok_or_else(|| {
        Error::InvalidArgument(format!("block preconditioner is missing {what}"))
    })
}

/// `r − B z`
fn minus_apply(b: &dyn LinearOperator, z: &MultiVector, r: &MultiVector) -> Result<MultiVector> {
    let mut t = MultiVector::zeros(b.range_map(), z.ncols());
    b.apply(z, &mut t)?;
    t.update(1.0, r, -1.0)?;
    Ok(t)
}

fn solve(inv: &dyn LinearOperator, r: &MultiVector) -> Result<MultiVector> {
    let mut z = MultiVector::zeros(inv.range_map(), r.ncols());
    inv.apply(r, &mut z)?;
    Ok(z)
}

impl BlockOperator2x2 {
    /// Apply the block preconditioner of the given kind to `(r0, r1)`.
    pub fn precondition(
        &self,
        kind: BlockKind,
        r0: &MultiVector,
        r1: &MultiVector,
    ) -> Result<(MultiVector, MultiVector)> {
        match kind {
            BlockKind::Jacobi => Ok((
                solve(need(&self.inv00, "an A00 inverse")?, r0)?,
                solve(need(&self.inv11, "an A11 inverse")?, r1)?,
            )),
            BlockKind::GaussSeidel => {
                let z0 = solve(need(&self.inv00, "an A00 inverse")?, r0)?;
                let t = minus_apply(&*self.a10, &z0, r1)?;
                let z1 = solve(need(&self.inv11, "an A11 inverse")?, &t)?;
                Ok((z0, z1))
            }
            BlockKind::Lu => {
                let inv00 = need(&self.inv00, "an A00 inverse")?;
                let y0 = solve(inv00, r0)?;
                let t = minus_apply(&*self.a10, &y0, r1)?;
                let z1 = solve(need(&self.schur_inv, "a Schur complement inverse")?, &t)?;
                let t0 = minus_apply(&*self.a01, &z1, r0)?;
                let z0 = solve(inv00, &t0)?;
                Ok((z0, z1))
            }
        }
    }
}

/// The four blocks of a matrix split at global row and column `n0`, with
/// block-1 indices renumbered to start at zero. Collective.
pub struct SplitMatrix {
    pub map0: Map,
    pub map1: Map,
    pub a00: CsrMatrix,
    pub a01: CsrMatrix,
    pub a10: CsrMatrix,
    pub a11: CsrMatrix,
}

pub fn split_2x2(a: &CsrMatrix, n0: u64) -> Result<SplitMatrix> {
    super::require_square(a)?;
    let n = a.row_map().global_len();
    if n0 == 0 || n0 >= n {
        return Err(Error::InvalidArgument(format!(
            "block split {n0} must lie strictly inside 0..{n}"
        )));
    }
    let comm = a.row_map().comm();
    let owned = a.row_map().gids();
    let map0 = Map::from_owned(owned.iter().copied().filter(|&g| g < n0).collect(), comm)?;
    let map1 = Map::from_owned(
        owned.iter().copied().filter(|&g| g >= n0).map(|g| g - n0).collect(),
        comm,
    )?;
    let mut rows = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for i in 0..a.local_rows() {
        let gi = a.row_map().gid(i);
        let (mut left, mut right): (Vec<(Gid, f64)>, Vec<(Gid, f64)>) = (Vec::new(), Vec::new());
        for (g, v) in a.row_global(i) {
            if g < n0 {
                left.push((g, v));
            } else {
                right.push((g - n0, v));
            }
        }
        let base = if gi < n0 { 0 } else { 2 };
        rows[base].push(left);
        rows[base + 1].push(right);
    }
    let [r00, r01, r10, r11] = rows;
    Ok(SplitMatrix {
        a00: CsrMatrix::from_rows(&map0, &map0, r00)?,
        a01: CsrMatrix::from_rows(&map0, &map1, r01)?,
        a10: CsrMatrix::from_rows(&map1, &map0, r10)?,
        a11: CsrMatrix::from_rows(&map1, &map1, r11)?,
        map0,
        map1,
    })
}

/// `A11 − A10 D00⁻¹ A01` with `D00` the diagonal of `A00`. Collective.
pub fn diagonal_schur(s: &SplitMatrix) -> Result<CsrMatrix> {
    let inv = inverse_diagonal(&s.a00)?;
    let mut scaled = s.a01.clone();
    scaled.scale_rows(&inv);
    let prod = s.a10.multiply(&scaled)?;
    CsrMatrix::add(&s.a11, &prod, 1.0, -1.0)
}

/// A 2x2 block preconditioner acting on vectors of the unsplit matrix.
pub struct BlockPreconditioner {
    map: Map,
    blocks: BlockOperator2x2,
    kind: BlockKind,
    map0: Map,
    map1: Map,
    /// Local positions of block-0 and block-1 rows in the full map.
    idx0: Vec<usize>,
    idx1: Vec<usize>,
}

impl BlockPreconditioner {
    /// `blocks` must be built on `split`'s maps.
    pub fn new(
        a: &CsrMatrix,
        split: &SplitMatrix,
        blocks: BlockOperator2x2,
        kind: BlockKind,
    ) -> Result<BlockPreconditioner> {
        let n0 = split.map0.global_len();
        let gids = a.row_map().gids();
        Ok(BlockPreconditioner {
            map: a.row_map().clone(),
            blocks,
            kind,
            map0: split.map0.clone(),
            map1: split.map1.clone(),
            idx0: (0..gids.len()).filter(|&i| gids[i] < n0).collect(),
            idx1: (0..gids.len()).filter(|&i| gids[i] >= n0).collect(),
        })
    }

    /// Convenience: block operator from a split matrix with the given
    /// inverse approximations.
    pub fn operator(
        split: &SplitMatrix,
        inv00: Option<Box<dyn LinearOperator>>,
        inv11: Option<Box<dyn LinearOperator>>,
        schur_inv: Option<Box<dyn LinearOperator>>,
    ) -> BlockOperator2x2 {
        BlockOperator2x2 {
            a00: Box::new(split.a00.clone()),
            a01: Box::new(split.a01.clone()),
            a10: Box::new(split.a10.clone()),
            a11: Box::new(split.a11.clone()),
            inv00,
            inv11,
            schur_inv,
        }
    }
}

impl LinearOperator for BlockPreconditioner {
    fn domain_map(&self) -> &Map {
        &self.map
    }

    fn range_map(&self) -> &Map {
        &self.map
    }

    fn apply(&self, r: &MultiVector, z: &mut MultiVector) -> Result<()> {
        let k = r.ncols();
        let pick = |idx: &[usize], map: &Map| {
            let mut out = MultiVector::zeros(map, k);
            for j in 0..k {
                for (o, &i) in out.col_mut(j).iter_mut().zip(idx) {
                    *o = r.col(j)[i];
                }
            }
            out
        };
        let r0 = pick(&self.idx0, &self.map0);
        let r1 = pick(&self.idx1, &self.map1);
        let (z0, z1) = self.blocks.precondition(self.kind, &r0, &r1)?;
        for j in 0..k {
            let zj = z.col_mut(j);
            for (&i, &v) in self.idx0.iter().zip(z0.col(j)) {
                zj[i] = v;
            }
            for (&i, &v) in self.idx1.iter().zip(z1.col(j)) {
                zj[i] = v;
            }
        }
        Ok(())
    }
}
