use crate::error::{Error, Result};
use crate::linalg::MultiVector;

use super::{
    apply_prec, check_single, check_spaces, residual, LinearOperator, SolveReport, SolveStatus,
    SolverOptions,
};

/// Residual growth beyond this factor over the initial residual is treated
/// as divergence.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Preconditioned Richardson iteration `x ← x + M (b − A x)`.
pub fn fixed_point(
    a: &dyn LinearOperator,
    m: Option<&dyn LinearOperator>,
    b: &MultiVector,
    x: &mut MultiVector,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    check_single(b, x)?;
    check_spaces(a, b, x)?;
    let bnorm = b.norm2()?[0];
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(SolveReport::trivial());
    }
    let mut r = residual(a, b, x)?;
    let r0 = r.norm2()?[0];
    let mut history = vec![r0 / bnorm];
    let mut z = MultiVector::zeros(x.map(), 1);
    let mut status = if r0 / bnorm <= opts.rtol {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIterations
    };
    let mut iterations = 0;
    while status != SolveStatus::Converged && iterations < opts.max_iterations {
        iterations += 1;
        apply_prec(m, &r, &mut z)?;
        x.axpy(1.0, &z)?;
        r = residual(a, b, x)?;
        let rn = r.norm2()?[0];
        history.push(rn / bnorm);
        if !rn.is_finite() || rn > DIVERGENCE_FACTOR * r0 {
            return Err(Error::Divergence {
                iteration: iterations,
                growth: rn / r0,
            });
        }
        if rn / bnorm <= opts.rtol {
            status = SolveStatus::Converged;
        }
    }
    Ok(SolveReport {
        status,
        iterations,
        residual: *history.last().unwrap(),
        history,
        cycle_starts: vec![0],
        columns: Vec::new(),
    })
}
