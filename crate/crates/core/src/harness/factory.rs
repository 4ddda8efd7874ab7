use std::sync::Arc;

use log::warn;

use crate::amg::{AmgConfig, Hierarchy};
use crate::error::{Error, Result};
use crate::gdsw::{GdswConfig, TwoLevelPreconditioner};
use crate::krylov::{LinearOperator, SolveReport, Solver, SolverKind, SolverOptions};
use crate::linalg::{CsrMatrix, MultiVector};
use crate::paramlist::ParameterList;
use crate::smoothers::{
    diagonal_schur, schwarz_config, smoother_of_type, split_2x2, BlockKind, BlockPreconditioner,
    Schwarz, SchwarzCombine,
};

/// Preconditioner type names accepted under "preconditioner" / "type".
pub const PRECONDITIONER_TYPES: [&str; 9] = [
    "none",
    "jacobi",
    "gauss_seidel",
    "chebyshev",
    "ilu",
    "schwarz",
    "gdsw",
    "amg",
    "block2x2",
];

/// A configured Krylov solver with its preconditioner.
pub struct SolverStack {
    pub solver: Solver,
    pub preconditioner_tag: String,
    a: Arc<CsrMatrix>,
    prec: Option<Box<dyn LinearOperator>>,
    unused: Vec<String>,
}

impl SolverStack {
    pub fn solver_tag(&self) -> &'static str {
        self.solver.kind.name()
    }

    pub fn matrix(&self) -> &Arc<CsrMatrix> {
        &self.a
    }

    pub fn preconditioner(&self) -> Option<&dyn LinearOperator> {
        self.prec.as_deref()
    }

    /// Parameters that were supplied but never read while building.
    pub fn unused_entries(&self) -> &[String] {
        &self.unused
    }

    /// Solve `A x = b` from the given initial guess. Collective.
    pub fn solve(&self, b: &MultiVector, x: &mut MultiVector) -> Result<SolveReport> {
        let rep = self.solver.solve(&*self.a, self.preconditioner(), b, x)?;
        if b.map().comm().rank() == 0 {
            for name in &self.unused {
                warn!("parameter {name:?} was never used");
            }
        }
        Ok(rep)
    }
}

/// Build the solver stack described by `params`.
///
/// The "solver" sublist takes "type" (cg, gmres, bicgstab,
/// pseudo_block_cg, fixed_point; default gmres) and the Krylov options
/// "rtol", "max iterations", "restart", "flexible", "orthogonalization".
/// The optional "preconditioner" sublist takes "type" (see
/// [`PRECONDITIONER_TYPES`]) and that preconditioner's keys. Collective.
pub fn build_solver(a: Arc<CsrMatrix>, params: &ParameterList) -> Result<SolverStack> {
    let empty = ParameterList::new();
    let sp = params.sublist("solver")?.unwrap_or(&empty);
    let kind = SolverKind::parse(&sp.get_text("type", "gmres")?)?;
    let solver = Solver {
        kind,
        options: SolverOptions::from_params(sp)?,
    };
    let symmetric = matches!(kind, SolverKind::Cg | SolverKind::PseudoBlockCg);
    let (tag, prec) = match params.sublist("preconditioner")? {
        None => ("none".to_string(), None),
        Some(pp) => {
            let ty = pp.get_text("type", "none")?.to_ascii_lowercase();
            (ty.clone(), build_preconditioner(&ty, a.clone(), pp, symmetric)?)
        }
    };
    Ok(SolverStack {
        solver,
        preconditioner_tag: tag,
        a,
        prec,
        unused: params.unused_entries(),
    })
}

/// One preconditioner by type name; `None` for "none". `symmetric`
/// selects Schwarz's additive default for CG-type solvers.
pub fn build_preconditioner(
    ty: &str,
    a: Arc<CsrMatrix>,
    p: &ParameterList,
    symmetric: bool,
) -> Result<Option<Box<dyn LinearOperator>>> {
    let op: Box<dyn LinearOperator> = match ty {
        "none" => return Ok(None),
        "jacobi" | "chebyshev" | "ilu" => into_op(smoother_of_type(ty, a, p)?),
        "gauss_seidel" => {
            let dir = p.get_text("sweep direction", "symmetric")?.to_ascii_lowercase();
            let name = match dir.as_str() {
                "forward" => "gauss_seidel_forward",
                "backward" => "gauss_seidel_backward",
                "symmetric" => "gauss_seidel_symmetric",
                _ => {
                    return Err(Error::UnknownType {
                        key: "sweep direction".into(),
                        value: dir,
                    })
                }
            };
            into_op(smoother_of_type(name, a, p)?)
        }
        "schwarz" => {
            let default = if symmetric {
                SchwarzCombine::Additive
            } else {
                SchwarzCombine::RestrictedAdditive
            };
            Box::new(Schwarz::new(a, schwarz_config(p, default)?)?)
        }
        "gdsw" => Box::new(TwoLevelPreconditioner::new(a, GdswConfig::from_params(p)?)?),
        "amg" => Box::new(Hierarchy::setup(a, &AmgConfig::from_params(p)?)?),
        "block2x2" => Box::new(block_2x2(&a, p, symmetric)?),
        _ => {
            return Err(Error::UnknownType {
                key: "preconditioner.type".into(),
                value: ty.into(),
            })
        }
    };
    Ok(Some(op))
}

fn into_op(s: Box<dyn crate::smoothers::Smoother>) -> Box<dyn LinearOperator> {
    s
}

/// Keys: "block split" (first global index of block 1, default n/2),
/// "block type" (block_jacobi, block_gauss_seidel, block_lu) and the
/// preconditioner sublists "block 0", "block 1" and "schur" (default
/// jacobi each). The Schur block is `A11 − A10 diag(A00)⁻¹ A01`.
fn block_2x2(a: &Arc<CsrMatrix>, p: &ParameterList, symmetric: bool) -> Result<BlockPreconditioner> {
    let n = a.row_map().global_len();
    let n0 = p.get_count("block split", (n / 2) as usize)? as u64;
    if n0 == 0 || n0 >= n {
        return Err(Error::InvalidArgument(format!(
            "block split {n0} must lie strictly between 0 and {n}"
        )));
    }
    let kind = BlockKind::parse(&p.get_text("block type", "block_jacobi")?)?;
    let split = split_2x2(a, n0)?;
    let jacobi = ParameterList::new().with("type", "jacobi");
    let sub = |name: &str, m: Arc<CsrMatrix>| -> Result<Option<Box<dyn LinearOperator>>> {
        let sp = p.sublist(name)?.unwrap_or(&jacobi);
        let ty = sp.get_text("type", "jacobi")?.to_ascii_lowercase();
        build_preconditioner(&ty, m, sp, symmetric)
    };
    let inv00 = sub("block 0", Arc::new(split.a00.clone()))?;
    let inv11 = sub("block 1", Arc::new(split.a11.clone()))?;
    let schur = if kind == BlockKind::Lu {
        sub("schur", Arc::new(diagonal_schur(&split)?))?
    } else {
        None
    };
    let blocks = BlockPreconditioner::operator(&split, inv00, inv11, schur);
    BlockPreconditioner::new(a, &split, blocks, kind)
}
