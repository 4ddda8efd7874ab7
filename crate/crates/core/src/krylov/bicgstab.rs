use crate::error::{Error, Result};
use crate::linalg::MultiVector;

use super::{
    apply_prec, check_single, check_spaces, final_status, residual, LinearOperator, SolveReport,
    SolveStatus, SolverOptions,
};

const TINY: f64 = 1e-30;

/// Right-preconditioned BiCGStab. Fails with [`Error::Breakdown`] when
/// `ρ`, `r̂ᵀv` or `ω` falls below `1e-30` in magnitude.
pub fn bicgstab(
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
    let rhat = r.clone();
    let mut history = vec![r.norm2()?[0] / bnorm];
    let mut iterations = 0;
    let mut status = SolveStatus::MaxIterations;
    if history[0] <= opts.rtol {
        status = SolveStatus::Converged;
    }

    let map = x.map().clone();
    let mut p = MultiVector::zeros(b.map(), 1);
    let mut v = MultiVector::zeros(b.map(), 1);
    let mut phat = MultiVector::zeros(&map, 1);
    let mut shat = MultiVector::zeros(&map, 1);
    let mut t = MultiVector::zeros(b.map(), 1);
    let (mut rho_old, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let breakdown = |iteration| Error::Breakdown {
        solver: "bicgstab",
        iteration,
    };

    while status != SolveStatus::Converged && iterations < opts.max_iterations {
        iterations += 1;
        let rho = rhat.dot(&r)?[0];
        if rho.abs() < TINY {
            return Err(breakdown(iterations));
        }
        let beta = (rho / rho_old) * (alpha / omega);
        // p = r + beta (p - omega v)
        p.axpy(-omega, &v)?;
        p.update(1.0, &r, beta)?;
        apply_prec(m, &p, &mut phat)?;
        a.apply(&phat, &mut v)?;
        let rv = rhat.dot(&v)?[0];
        if rv.abs() < TINY {
            return Err(breakdown(iterations));
        }
        alpha = rho / rv;
        // s = r - alpha v, stored in r
        r.axpy(-alpha, &v)?;
        x.axpy(alpha, &phat)?;
        let snorm = r.norm2()?[0] / bnorm;
        if snorm <= opts.rtol {
            history.push(snorm);
            status = SolveStatus::Converged;
            break;
        }
        apply_prec(m, &r, &mut shat)?;
        a.apply(&shat, &mut t)?;
        let ts = t.dot(&r)?[0];
        let tt = t.dot(&t)?[0];
        omega = if tt > 0.0 { ts / tt } else { 0.0 };
        if omega.abs() < TINY {
            return Err(breakdown(iterations));
        }
        x.axpy(omega, &shat)?;
        r.axpy(-omega, &t)?;
        let rn = r.norm2()?[0] / bnorm;
        history.push(rn);
        if rn <= opts.rtol {
            status = SolveStatus::Converged;
        }
        rho_old = rho;
    }

    let explicit = residual(a, b, x)?.norm2()?[0] / bnorm;
    if status == SolveStatus::Converged {
        status = final_status(explicit, opts.rtol);
    }
    Ok(SolveReport {
        status,
        iterations,
        residual: explicit,
        history,
        cycle_starts: vec![0],
        columns: Vec::new(),
    })
}
