//! Krylov solvers written against the [`LinearOperator`] contract.
//!
//! Every solver is collective and works on single-column right-hand sides,
//! except [`pseudo_block_cg`], which advances one CG recurrence per column.
//! The initial guess is taken from `x` on entry and the solution is written
//! back into it.

mod bicgstab;
mod cg;
mod fixed_point;
mod gmres;
mod ortho;

pub use bicgstab::bicgstab;
pub use cg::{cg, pseudo_block_cg};
pub use fixed_point::fixed_point;
pub use gmres::gmres;
pub use ortho::{orthonormalize, OrthoKind};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Map, MultiVector};
use crate::paramlist::ParameterList;

/// A linear map between two distributed vector spaces.
pub trait LinearOperator {
    fn domain_map(&self) -> &Map;
    fn range_map(&self) -> &Map;
    /// `y = Op(x)`; `x` on the domain map, `y` on the range map.
    fn apply(&self, x: &MultiVector, y: &mut MultiVector) -> Result<()>;

    fn apply_transpose(&self, _x: &MultiVector, _y: &mut MultiVector) -> Result<()> {
        Err(Error::InvalidArgument(
            "operator does not provide a transpose".into(),
        ))
    }
}

impl LinearOperator for CsrMatrix {
    fn domain_map(&self) -> &Map {
        CsrMatrix::domain_map(self)
    }

    fn range_map(&self) -> &Map {
        CsrMatrix::range_map(self)
    }

    fn apply(&self, x: &MultiVector, y: &mut MultiVector) -> Result<()> {
        CsrMatrix::apply(self, x, y, 1.0, 0.0)
    }

    fn apply_transpose(&self, x: &MultiVector, y: &mut MultiVector) -> Result<()> {
        self.transpose()?.apply(x, y, 1.0, 0.0)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for Box<T> {
    fn domain_map(&self) -> &Map {
        (**self).domain_map()
    }

    fn range_map(&self) -> &Map {
        (**self).range_map()
    }

    fn apply(&self, x: &MultiVector, y: &mut MultiVector) -> Result<()> {
        (**self).apply(x, y)
    }

    fn apply_transpose(&self, x: &MultiVector, y: &mut MultiVector) -> Result<()> {
        (**self).apply_transpose(x, y)
    }
}

/// The identity on one map.
#[derive(Clone, Debug)]
pub struct Identity {
    map: Map,
}

impl Identity {
    pub fn new(map: &Map) -> Identity {
        Identity { map: map.clone() }
    }
}

impl LinearOperator for Identity {
    fn domain_map(&self) -> &Map {
        &self.map
    }

    fn range_map(&self) -> &Map {
        &self.map
    }

    fn apply(&self, x: &MultiVector, y: &mut MultiVector) -> Result<()> {
        y.assign(x)
    }

    fn apply_transpose(&self, x: &MultiVector, y: &mut MultiVector) -> Result<()> {
        y.assign(x)
    }
}

/// Matrix-free operator around a closure.
pub struct FnOperator<F> {
    domain: Map,
    range: Map,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&MultiVector, &mut MultiVector) -> Result<()>,
{
    pub fn new(domain: &Map, range: &Map, f: F) -> Self {
        FnOperator {
            domain: domain.clone(),
            range: range.clone(),
            f,
        }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&MultiVector, &mut MultiVector) -> Result<()>,
{
    fn domain_map(&self) -> &Map {
        &self.domain
    }

    fn range_map(&self) -> &Map {
        &self.range
    }

    fn apply(&self, x: &MultiVector, y: &mut MultiVector) -> Result<()> {
        (self.f)(x, y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// The recurrence claimed convergence but the recomputed residual
    /// `‖b − Ax‖ / ‖b‖` exceeds ten times the tolerance.
    FalseConvergence,
}

/// Per right-hand-side outcome of a pseudo-block solve.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnReport {
    pub status: SolveStatus,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    /// Final relative residual `‖b − Ax‖ / ‖b‖`.
    pub residual: f64,
    /// Relative residual norms; `history[0]` is the initial residual and
    /// the length is `iterations + 1`.
    pub history: Vec<f64>,
    /// Iteration indices at which a GMRES restart cycle begins.
    pub cycle_starts: Vec<usize>,
    /// One entry per column for pseudo-block solves, empty otherwise.
    pub columns: Vec<ColumnReport>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    fn trivial() -> SolveReport {
        SolveReport {
            status: SolveStatus::Converged,
            iterations: 0,
            residual: 0.0,
            history: vec![0.0],
            cycle_starts: vec![0],
            columns: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub rtol: f64,
    pub max_iterations: usize,
    pub restart: usize,
    pub flexible: bool,
    pub ortho: OrthoKind,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rtol: 1e-8,
            max_iterations: 1000,
            restart: 30,
            flexible: false,
            ortho: OrthoKind::Dgks,
        }
    }
}

impl SolverOptions {
    /// Read "rtol", "max iterations", "restart", "orthogonalization" and
    /// "flexible"; missing keys keep their defaults.
    pub fn from_params(p: &ParameterList) -> Result<SolverOptions> {
        let d = SolverOptions::default();
        let restart = p.get_count("restart", d.restart)?;
        if restart == 0 {
            return Err(Error::InvalidArgument("restart must be at least 1".into()));
        }
        let ortho = p.get_text("orthogonalization", d.ortho.name())?;
        Ok(SolverOptions {
            rtol: p.get_real("rtol", d.rtol)?,
            max_iterations: p.get_count("max iterations", d.max_iterations)?,
            restart,
            flexible: p.get_bool("flexible", d.flexible)?,
            ortho: OrthoKind::parse(&ortho)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Cg,
    Gmres,
    BiCgStab,
    PseudoBlockCg,
    FixedPoint,
}

impl SolverKind {
    pub fn parse(name: &str) -> Result<SolverKind> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "cg" => SolverKind::Cg,
            "gmres" => SolverKind::Gmres,
            "bicgstab" => SolverKind::BiCgStab,
            "pseudo-block cg" | "pseudo_block_cg" | "pseudoblockcg" => SolverKind::PseudoBlockCg,
            "fixed point" | "fixed_point" | "fixedpoint" => SolverKind::FixedPoint,
            _ => {
                return Err(Error::UnknownType {
                    key: "solver type".into(),
                    value: name.into(),
                })
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Cg => "cg",
            SolverKind::Gmres => "gmres",
            SolverKind::BiCgStab => "bicgstab",
            SolverKind::PseudoBlockCg => "pseudo-block cg",
            SolverKind::FixedPoint => "fixed point",
        }
    }
}

/// A solver kind together with its options.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Solver {
    pub kind: SolverKind,
    pub options: SolverOptions,
}

impl Solver {
    /// From a list holding "solver type" (default "gmres") plus options.
    pub fn from_params(p: &ParameterList) -> Result<Solver> {
        let kind = SolverKind::parse(&p.get_text("solver type", "gmres")?)?;
        Ok(Solver {
            kind,
            options: SolverOptions::from_params(p)?,
        })
    }

    pub fn solve(
        &self,
        a: &dyn LinearOperator,
        m: Option<&dyn LinearOperator>,
        b: &MultiVector,
        x: &mut MultiVector,
    ) -> Result<SolveReport> {
        let o = &self.options;
        match self.kind {
            SolverKind::Cg => cg(a, m, b, x, o),
            SolverKind::Gmres => gmres(a, m, b, x, o),
            SolverKind::BiCgStab => bicgstab(a, m, b, x, o),
            SolverKind::PseudoBlockCg => pseudo_block_cg(a, m, b, x, o),
            SolverKind::FixedPoint => fixed_point(a, m, b, x, o),
        }
    }
}

fn check_single(b: &MultiVector, x: &MultiVector) -> Result<()> {
    if b.ncols() != 1 || x.ncols() != 1 {
        return Err(Error::InvalidArgument(
            "this solver takes a single right-hand side".into(),
        ));
    }
    Ok(())
}

fn check_spaces(a: &dyn LinearOperator, b: &MultiVector, x: &MultiVector) -> Result<()> {
    b.map()
        .require_same(a.range_map(), "right-hand side must live on the range map")?;
    x.map()
        .require_same(a.domain_map(), "solution must live on the domain map")?;
    if b.ncols() != x.ncols() {
        return Err(Error::LengthMismatch {
            expected: b.ncols(),
            found: x.ncols(),
        });
    }
    Ok(())
}

/// `r = b − A x`
fn residual(a: &dyn LinearOperator, b: &MultiVector, x: &MultiVector) -> Result<MultiVector> {
    let mut r = MultiVector::zeros(b.map(), b.ncols());
    a.apply(x, &mut r)?;
    r.update(1.0, b, -1.0)?;
    Ok(r)
}

fn apply_prec(
    m: Option<&dyn LinearOperator>,
    r: &MultiVector,
    z: &mut MultiVector,
) -> Result<()> {
    match m {
        Some(m) => m.apply(r, z),
        None => z.assign(r),
    }
}

/// Relative residual check after the recurrence declares convergence.
fn final_status(explicit: f64, rtol: f64) -> SolveStatus {
    if explicit <= 10.0 * rtol {
        SolveStatus::Converged
    } else {
        SolveStatus::FalseConvergence
    }
}
