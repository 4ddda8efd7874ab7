use crate::error::{Error, Result};
use crate::linalg::MultiVector;

use super::ortho::project;
use super::{
    apply_prec, check_single, check_spaces, final_status, residual, LinearOperator, SolveReport,
    SolveStatus, SolverOptions,
};

/// Right-preconditioned restarted GMRES.
///
/// With `opts.flexible` the preconditioned basis vectors are stored, so the
/// preconditioner may change from one application to the next. A
/// subdiagonal Arnoldi entry below `1e-14` times the largest `‖A M v_j‖`
/// seen so far ends the cycle as a happy breakdown.
pub fn gmres(
    a: &dyn LinearOperator,
    m: Option<&dyn LinearOperator>,
    b: &MultiVector,
    x: &mut MultiVector,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    check_single(b, x)?;
    check_spaces(a, b, x)?;
    let restart = opts.restart.max(1);
    let bnorm = b.norm2()?[0];
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(SolveReport::trivial());
    }
    let mut r = residual(a, b, x)?;
    let mut beta = r.norm2()?[0];
    let mut history = vec![beta / bnorm];
    let mut cycle_starts = vec![0];
    let mut iterations = 0;
    if beta / bnorm <= opts.rtol {
        return Ok(SolveReport {
            status: SolveStatus::Converged,
            iterations,
            residual: beta / bnorm,
            history,
            cycle_starts,
            columns: Vec::new(),
        });
    }

    let mut z = MultiVector::zeros(x.map(), 1);
    let mut w = MultiVector::zeros(b.map(), 1);
    let status = loop {
        let mut v0 = r.clone();
        v0.scale(1.0 / beta);
        let mut basis = vec![v0];
        let mut zs: Vec<MultiVector> = Vec::new();
        // columns of the rotated Hessenberg matrix, i.e. of R
        let mut rcols: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut anorm = 0.0f64;
        let mut done = false;

        while rcols.len() < restart && iterations < opts.max_iterations {
            let j = rcols.len();
            apply_prec(m, &basis[j], &mut z)?;
            a.apply(&z, &mut w)?;
            if opts.flexible {
                zs.push(z.clone());
            }
            let (mut h, hnext, wnorm) = project(&basis, &mut w, opts.ortho)?;
            anorm = anorm.max(wnorm);
            iterations += 1;

            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let denom = h[j].hypot(hnext);
            if denom == 0.0 {
                return Err(Error::Breakdown {
                    solver: "gmres",
                    iteration: iterations,
                });
            }
            let (c, s) = (h[j] / denom, hnext / denom);
            h[j] = denom;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[j]);
            g[j] *= c;
            rcols.push(h);

            let est = g[j + 1].abs() / bnorm;
            history.push(est);
            let happy = hnext <= 1e-14 * anorm;
            if happy || est <= opts.rtol {
                done = true;
                break;
            }
            w.scale(1.0 / hnext);
            basis.push(w.clone());
        }

        // back substitution R y = g
        let k = rcols.len();
        let mut y = g[..k].to_vec();
        for i in (0..k).rev() {
            for l in i + 1..k {
                y[i] -= rcols[l][i] * y[l];
            }
            y[i] /= rcols[i][i];
        }
        if opts.flexible {
            for (zj, &yj) in zs.iter().zip(&y) {
                x.axpy(yj, zj)?;
            }
        } else {
            w.fill(0.0);
            for (vj, &yj) in basis.iter().zip(&y) {
                w.axpy(yj, vj)?;
            }
            apply_prec(m, &w, &mut z)?;
            x.axpy(1.0, &z)?;
        }

        r = residual(a, b, x)?;
        beta = r.norm2()?[0];
        if done {
            break final_status(beta / bnorm, opts.rtol);
        }
        if iterations >= opts.max_iterations {
            break SolveStatus::MaxIterations;
        }
        if beta == 0.0 {
            break SolveStatus::Converged;
        }
        cycle_starts.push(iterations);
    };

    Ok(SolveReport {
        status,
        iterations,
        residual: beta / bnorm,
        history,
        cycle_starts,
        columns: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::Comm;
    use crate::krylov::OrthoKind;
    use crate::linalg::{CsrMatrix, Map};

    #[test]
    fn rotation_matrix() {
        let c = Comm::serial();
        let m = Map::contiguous(2, &c);
        let a = CsrMatrix::from_triplets(&m, &m, &[(0, 1, 1.0), (1, 0, -1.0)]).unwrap();
        let b = MultiVector::from_local(&m, 1, vec![1.0, 0.0]).unwrap();
        for ortho in [OrthoKind::Icgs, OrthoKind::Dgks, OrthoKind::Imgs] {
            for flexible in [false, true] {
                let mut x = MultiVector::zeros(&m, 1);
                let o = SolverOptions {
                    ortho,
                    flexible,
                    ..Default::default()
                };
                let r = gmres(&a, None, &b, &mut x, &o).unwrap();
                assert!(r.converged());
                assert!(r.iterations <= 2);
                assert!((x.col(0)[0]).abs() < 1e-14);
                assert!((x.col(0)[1] - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn max_iterations_reported() {
        let c = Comm::serial();
        let n = 50;
        let m = Map::contiguous(n, &c);
        let t: Vec<_> = (0..n)
            .flat_map(|i| {
                let mut v = vec![(i, i, 2.0)];
                if i > 0 {
                    v.push((i, i - 1, -1.0));
                }
                if i + 1 < n {
                    v.push((i, i + 1, -1.0));
                }
                v
            })
            .collect();
        let a = CsrMatrix::from_triplets(&m, &m, &t).unwrap();
        let b = MultiVector::constant(&m, 1, 1.0);
        let mut x = MultiVector::zeros(&m, 1);
        let o = SolverOptions {
            restart: 5,
            max_iterations: 12,
            ..Default::default()
        };
        let r = gmres(&a, None, &b, &mut x, &o).unwrap();
        assert_eq!(r.status, SolveStatus::MaxIterations);
        assert_eq!(r.iterations, 12);
        assert_eq!(r.history.len(), 13);
        assert_eq!(r.cycle_starts, [0, 5, 10]);
    }
}
