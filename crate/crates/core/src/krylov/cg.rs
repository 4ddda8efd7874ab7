use crate::error::{Error, Result};
use crate::linalg::MultiVector;

use super::{
    apply_prec, check_single, check_spaces, final_status, residual, ColumnReport,
    LinearOperator, SolveReport, SolveStatus, SolverOptions,
};

/// Preconditioned conjugate gradients for one right-hand side.
///
/// Fails with [`Error::Breakdown`] when `pᵀAp ≤ 0` or `rᵀMr ≤ 0`.
pub fn cg(
    a: &dyn LinearOperator,
    m: Option<&dyn LinearOperator>,
    b: &MultiVector,
    x: &mut MultiVector,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    check_single(b, x)?;
    let mut report = pseudo_block_cg(a, m, b, x, opts)?;
    report.columns.clear();
    Ok(report)
}

/// One CG recurrence per column, advanced in lockstep so that operator and
/// preconditioner applications act on the whole block. A column stops
/// updating once it converges.
pub fn pseudo_block_cg(
    a: &dyn LinearOperator,
    m: Option<&dyn LinearOperator>,
    b: &MultiVector,
    x: &mut MultiVector,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    check_spaces(a, b, x)?;
    let k = b.ncols();
    let bnorm = b.norm2()?;
    let zero_rhs: Vec<bool> = bnorm.iter().map(|&n| n == 0.0).collect();
    for (j, &z) in zero_rhs.iter().enumerate() {
        if z {
            x.col_mut(j).fill(0.0);
        }
    }

    let mut r = residual(a, b, x)?;
    let rel = |norms: &[f64]| -> Vec<f64> {
        norms
            .iter()
            .zip(&bnorm)
            .map(|(&n, &bn)| if bn == 0.0 { 0.0 } else { n / bn })
            .collect::<Vec<f64>>()
    };
    let mut cur = rel(&r.norm2()?);
    let mut cols: Vec<ColumnReport> = cur
        .iter()
        .map(|&v| ColumnReport {
            status: SolveStatus::MaxIterations,
            iterations: 0,
            residual: v,
            history: vec![v],
        })
        .collect();
    let mut active: Vec<bool> = cur.iter().map(|&v| v > opts.rtol).collect();
    for (j, c) in cols.iter_mut().enumerate() {
        if !active[j] {
            c.status = SolveStatus::Converged;
        }
    }
    let mut history = vec![cur.iter().copied().fold(0.0, f64::max)];

    let mut z = MultiVector::zeros(x.map(), k);
    let mut p = MultiVector::zeros(x.map(), k);
    let mut q = MultiVector::zeros(b.map(), k);
    let mut iterations = 0;
    if active.iter().any(|&v| v) {
        apply_prec(m, &r, &mut z)?;
        p.assign(&z)?;
    }
    let mut rz = r.dot(&z)?;

    while active.iter().any(|&v| v) && iterations < opts.max_iterations {
        iterations += 1;
        a.apply(&p, &mut q)?;
        let pq = p.dot(&q)?;
        let mut alpha = vec![0.0; k];
        for j in 0..k {
            if !active[j] {
                continue;
            }
            if !(pq[j] > 0.0) || !(rz[j] > 0.0) {
                return Err(Error::Breakdown {
                    solver: "cg",
                    iteration: iterations,
                });
            }
            alpha[j] = rz[j] / pq[j];
        }
        x.axpy_cols(&alpha, &p)?;
        let neg: Vec<f64> = alpha.iter().map(|a| -a).collect();
        r.axpy_cols(&neg, &q)?;

        let now = rel(&r.norm2()?);
        for j in 0..k {
            if active[j] {
                cur[j] = now[j];
                cols[j].iterations = iterations;
                cols[j].history.push(now[j]);
                if now[j] <= opts.rtol {
                    active[j] = false;
                    cols[j].status = SolveStatus::Converged;
                }
            }
        }
        history.push(cur.iter().copied().fold(0.0, f64::max));
        if !active.iter().any(|&v| v) {
            break;
        }

        apply_prec(m, &r, &mut z)?;
        let rz_new = r.dot(&z)?;
        for j in 0..k {
            if !active[j] {
                continue;
            }
            let beta = rz_new[j] / rz[j];
            let zj = z.col(j).to_vec();
            for (pi, zi) in p.col_mut(j).iter_mut().zip(zj) {
                *pi = zi + beta * *pi;
            }
            rz[j] = rz_new[j];
        }
    }

    let explicit = rel(&residual(a, b, x)?.norm2()?);
    for (c, &e) in cols.iter_mut().zip(&explicit) {
        c.residual = e;
        if c.status == SolveStatus::Converged {
            c.status = final_status(e, opts.rtol);
        }
    }
    let status = if cols.iter().all(|c| c.status == SolveStatus::Converged) {
        SolveStatus::Converged
    } else if cols.iter().any(|c| c.status == SolveStatus::FalseConvergence) {
        SolveStatus::FalseConvergence
    } else {
        SolveStatus::MaxIterations
    };
    Ok(SolveReport {
        status,
        iterations,
        residual: explicit.iter().copied().fold(0.0, f64::max),
        history,
        cycle_starts: vec![0],
        columns: cols,
    })
}
