use crate::error::{Error, Result};
use crate::krylov::{FnOperator, LinearOperator, Solver};
use crate::linalg::MultiVector;
use crate::paramlist::ParameterList;

use super::model::{ad_jacobian, ad_jvp, jfnk_apply, ModelEvaluator};
use super::status::{SolverState, Status, StatusTest};

/// Sufficient-decrease constant of the Armijo test.
pub const ARMIJO_C: f64 = 1e-4;
/// Maximum number of step-length trials.
pub const MAX_TRIALS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineSearch {
    Full,
    /// Halve the step until the Armijo condition holds.
    Backtracking,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JacobianMode {
    /// Assembled matrix from the model, or by AD when the model has none.
    Matrix,
    MatrixFreeFd,
    MatrixFreeAd,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonConfig {
    /// Krylov solver parameters; "rtol" is replaced by the forcing term.
    pub linear: ParameterList,
    pub line_search: LineSearch,
    pub jacobian: JacobianMode,
    pub forcing: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            linear: ParameterList::new(),
            line_search: LineSearch::Backtracking,
            jacobian: JacobianMode::Matrix,
            forcing: 1e-4,
        }
    }
}

impl NewtonConfig {
    /// Keys: "nonlinear: line search" (full, backtracking),
    /// "nonlinear: jacobian mode" (matrix, matrix_free_fd, matrix_free_ad),
    /// "nonlinear: forcing term" and the sublist "linear solver".
    pub fn from_params(p: &ParameterList) -> Result<NewtonConfig> {
        let d = NewtonConfig::default();
        let ls = p.get_text("nonlinear: line search", "backtracking")?;
        let line_search = match ls.to_ascii_lowercase().as_str() {
            "full" | "full step" => LineSearch::Full,
            "backtracking" | "backtrack" => LineSearch::Backtracking,
            _ => {
                return Err(Error::UnknownType {
                    key: "nonlinear: line search".into(),
                    value: ls,
                })
            }
        };
        let jm = p.get_text("nonlinear: jacobian mode", "matrix")?;
        let jacobian = match jm.to_ascii_lowercase().as_str() {
            "matrix" => JacobianMode::Matrix,
            "matrix_free_fd" | "jfnk" => JacobianMode::MatrixFreeFd,
            "matrix_free_ad" => JacobianMode::MatrixFreeAd,
            _ => {
                return Err(Error::UnknownType {
                    key: "nonlinear: jacobian mode".into(),
                    value: jm,
                })
            }
        };
        let forcing = p.get_real("nonlinear: forcing term", d.forcing)?;
        if !(forcing > 0.0 && forcing < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "forcing term {forcing} must lie in (0, 1)"
            )));
        }
        Ok(NewtonConfig {
            linear: p.sublist("linear solver")?.cloned().unwrap_or_default(),
            line_search,
            jacobian,
            forcing,
        })
    }
}

/// One accepted Newton step.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonStep {
    /// `‖F‖` before the step.
    pub norm_f: f64,
    pub step_length: f64,
    pub linear_iterations: usize,
    /// `φ = ½‖F‖²` before and after, and `∇φᵀs = Fᵀ J s`.
    pub merit_before: f64,
    pub merit_after: f64,
    pub slope: f64,
    pub trials: usize,
}

#[derive(Clone, Debug)]
pub struct NewtonResult {
    pub x: MultiVector,
    pub status: Status,
    /// Leaf test that stopped the iteration.
    pub stopped_by: Option<&'static str>,
    pub iterations: usize,
    pub steps: Vec<NewtonStep>,
    /// `‖F‖` at every iterate, the final one last.
    pub f_norms: Vec<f64>,
}

impl NewtonResult {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

fn norm(v: &MultiVector) -> Result<f64> {
    Ok(v.norm2()?[0])
}

/// Globalized inexact Newton. Collective.
pub fn newton_solve(
    model: &dyn ModelEvaluator,
    x0: &MultiVector,
    status: &StatusTest,
    cfg: &NewtonConfig,
) -> Result<NewtonResult> {
    let map = model.map().clone();
    let mut solver = Solver::from_params(&cfg.linear)?;
    solver.options.rtol = cfg.forcing;

    let mut x = x0.clone();
    let mut f = MultiVector::zeros(&map, 1);
    model.residual(&x, &mut f)?;
    let mut f_norms = vec![norm(&f)?];
    let mut steps = Vec::new();
    let mut dx: Option<MultiVector> = None;

    for it in 0.. {
        let state = SolverState {
            iteration: it,
            f_norms: &f_norms,
            x: &x,
            dx: dx.as_ref(),
        };
        let (st, who) = status.check(&state)?;
        if st != Status::Unconverged {
            return Ok(NewtonResult {
                x,
                status: st,
                stopped_by: who,
                iterations: it,
                steps,
                f_norms,
            });
        }
        let fnorm = *f_norms.last().unwrap();
        if !fnorm.is_finite() {
            return Err(Error::NonFinite);
        }

        // linear model J s = −F
        let mut rhs = f.clone();
        rhs.scale(-1.0);
        let mut s = MultiVector::zeros(&map, 1);
        let jac: Box<dyn LinearOperator + '_> = match cfg.jacobian {
            JacobianMode::Matrix => {
                let j = match model.jacobian(&x) {
                    Some(j) => j?,
                    None => ad_jacobian(model, &x)?,
                };
                Box::new(j)
            }
            JacobianMode::MatrixFreeFd => {
                let (xc, fc) = (x.clone(), f.clone());
                Box::new(FnOperator::new(&map, &map, move |v: &MultiVector, y: &mut MultiVector| {
                    if v.norm2()?[0] == 0.0 {
                        y.fill(0.0);
                        return Ok(());
                    }
                    y.assign(&jfnk_apply(model, &xc, v, &fc)?)
                }))
            }
            JacobianMode::MatrixFreeAd => {
                let xc = x.clone();
                Box::new(FnOperator::new(&map, &map, move |v: &MultiVector, y: &mut MultiVector| {
                    y.assign(&ad_jvp(model, &xc, v)?)
                }))
            }
        };
        let rep = solver
            .solve(&*jac, None, &rhs, &mut s)
            .map_err(|e| Error::LinearSolveFailed(e.to_string()))?;
        if !rep.converged() {
            return Err(Error::LinearSolveFailed(format!(
                "{:?} after {} iterations, relative residual {:.3e}",
                rep.status, rep.iterations, rep.residual
            )));
        }

        let mut js = MultiVector::zeros(&map, 1);
        jac.apply(&s, &mut js)?;
        let slope = f.dot(&js)?[0];
        let phi0 = 0.5 * fnorm * fnorm;

        let mut lambda = 1.0;
        let mut trials = 0;
        let (x_new, f_new, phi_new, norm_new) = loop {
            trials += 1;
            let mut xt = x.clone();
            xt.axpy(lambda, &s)?;
            let mut ft = MultiVector::zeros(&map, 1);
            model.residual(&xt, &mut ft)?;
            let nt = norm(&ft)?;
            let phi = 0.5 * nt * nt;
            let accept = match cfg.line_search {
                LineSearch::Full => true,
                LineSearch::Backtracking => phi <= phi0 + ARMIJO_C * lambda * slope,
            };
            if accept {
                break (xt, ft, phi, nt);
            }
            if trials == MAX_TRIALS {
                return Err(Error::LineSearchFailed(MAX_TRIALS));
            }
            lambda *= 0.5;
        };

        let mut step = x_new.clone();
        step.axpy(-1.0, &x)?;
        steps.push(NewtonStep {
            norm_f: fnorm,
            step_length: lambda,
            linear_iterations: rep.iterations,
            merit_before: phi0,
            merit_after: phi_new,
            slope,
            trials,
        });
        x = x_new;
        f = f_new;
        f_norms.push(norm_new);
        dx = Some(step);
    }
    unreachable!()
}
