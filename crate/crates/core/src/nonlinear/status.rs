use crate::comm::ReduceOp;
use crate::error::Result;
use crate::linalg::MultiVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Unconverged,
    Converged,
    Failed,
}

/// Stopping test tree. Leaves look at the current iterate; combinations
/// merge their children.
#[derive(Clone, Debug, PartialEq)]
pub enum StatusTest {
    /// `‖F‖ ≤ tol`.
    NormFAbs(f64),
    /// `‖F‖ ≤ tol·‖F₀‖`.
    NormFRel(f64),
    /// Weighted RMS of the last update,
    /// `sqrt(mean((dx_i / (rtol·|x_i| + atol))²)) ≤ 1`.
    Wrms { rtol: f64, atol: f64 },
    /// Fails once `iteration ≥ n`.
    MaxIters(usize),
    /// Fails on a non-finite `‖F‖`.
    NanDetect,
    /// Fails when `‖F_k‖ ≥ factor·‖F_{k−window}‖`.
    Stagnation { window: usize, factor: f64 },
    /// Converged when every child is; failed when any child is.
    And(Vec<StatusTest>),
    /// Converged when any child is; otherwise failed when any child is.
    Or(Vec<StatusTest>),
}

/// What the tests see at one iteration.
pub struct SolverState<'a> {
    pub iteration: usize,
    /// `‖F‖` of every iterate so far, current one last.
    pub f_norms: &'a [f64],
    pub x: &'a MultiVector,
    /// Last update, absent before the first step.
    pub dx: Option<&'a MultiVector>,
}

impl SolverState<'_> {
    fn f_norm(&self) -> f64 {
        self.f_norms.last().copied().unwrap_or(f64::NAN)
    }
}

impl Default for StatusTest {
    /// `‖F‖ ≤ 1e-10·‖F₀‖` or `‖F‖ ≤ 1e-12`, failing on NaN or after 50
    /// iterations.
    fn default() -> Self {
        StatusTest::Or(vec![
            StatusTest::NanDetect,
            StatusTest::NormFAbs(1e-12),
            StatusTest::NormFRel(1e-10),
            StatusTest::MaxIters(50),
        ])
    }
}

impl StatusTest {
    pub fn name(&self) -> &'static str {
        match self {
            StatusTest::NormFAbs(_) => "norm_f_abs",
            StatusTest::NormFRel(_) => "norm_f_rel",
            StatusTest::Wrms { .. } => "wrms",
            StatusTest::MaxIters(_) => "max_iters",
            StatusTest::NanDetect => "nan_detect",
            StatusTest::Stagnation { .. } => "stagnation",
            StatusTest::And(_) => "combo_and",
            StatusTest::Or(_) => "combo_or",
        }
    }

    /// Evaluate the tree. Collective when it holds a WRMS test.
    pub fn evaluate(&self, s: &SolverState) -> Result<Status> {
        Ok(self.check(s)?.0)
    }

    /// Status and the name of the leaf that decided it, if any.
    pub fn check(&self, s: &SolverState) -> Result<(Status, Option<&'static str>)> {
        let leaf = |ok: bool, fail: bool| -> (Status, Option<&'static str>) {
            if fail {
                (Status::Failed, Some(self.name()))
            } else if ok {
                (Status::Converged, Some(self.name()))
            } else {
                (Status::Unconverged, None)
            }
        };
        let f = s.f_norm();
        Ok(match self {
            StatusTest::NormFAbs(tol) => leaf(f <= *tol, false),
            StatusTest::NormFRel(tol) => leaf(f <= tol * s.f_norms[0], false),
            StatusTest::Wrms { rtol, atol } => match s.dx {
                None => leaf(false, false),
                Some(dx) => leaf(wrms(s.x, dx, *rtol, *atol)? <= 1.0, false),
            },
            StatusTest::MaxIters(n) => leaf(false, s.iteration >= *n),
            StatusTest::NanDetect => leaf(false, !f.is_finite()),
            StatusTest::Stagnation { window, factor } => {
                let k = s.f_norms.len();
                let fired = *window > 0 && k > *window && f >= factor * s.f_norms[k - 1 - window];
                leaf(false, fired)
            }
            StatusTest::And(children) => {
                let mut all = !children.is_empty();
                let mut failed = None;
                for c in children {
                    let (st, who) = c.check(s)?;
                    match st {
                        Status::Failed => {
                            failed.get_or_insert(who);
                        }
                        Status::Unconverged => all = false,
                        Status::Converged => {}
                    }
                }
                match failed {
                    Some(who) => (Status::Failed, who),
                    None if all => (Status::Converged, Some(self.name())),
                    None => (Status::Unconverged, None),
                }
            }
            StatusTest::Or(children) => {
                let mut failed = None;
                let mut converged = None;
                for c in children {
                    let (st, who) = c.check(s)?;
                    match st {
                        Status::Converged => {
                            converged.get_or_insert(who);
                        }
                        Status::Failed => {
                            failed.get_or_insert(who);
                        }
                        Status::Unconverged => {}
                    }
                }
                match (converged, failed) {
                    (Some(who), _) => (Status::Converged, who),
                    (None, Some(who)) => (Status::Failed, who),
                    _ => (Status::Unconverged, None),
                }
            }
        })
    }
}

/// `sqrt((1/N) Σ (dx_i / (rtol·|x_i| + atol))²)` over all ranks.
/// Collective.
pub fn wrms(x: &MultiVector, dx: &MultiVector, rtol: f64, atol: f64) -> Result<f64> {
    let mut s = 0.0;
    for j in 0..x.ncols() {
        for (xi, di) in x.col(j).iter().zip(dx.col(j)) {
            let w = rtol * xi.abs() + atol;
            s += (di / w).powi(2);
        }
    }
    let total = x.map().comm().all_reduce(&[s], ReduceOp::Sum)?[0];
    let n = x.map().global_len() as f64 * x.ncols() as f64;
    Ok(if n == 0.0 { 0.0 } else { (total / n).sqrt() })
}
