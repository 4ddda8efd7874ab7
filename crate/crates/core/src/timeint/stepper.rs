use crate::autodiff::Scalar;
use crate::comm::Comm;
use crate::error::{Error, Result};
use crate::linalg::MultiVector;
use crate::nonlinear::{newton_solve, DenseModel, NewtonConfig, StatusTest, SystemFn};
use crate::paramlist::ParameterList;

use super::history::{SolutionHistory, StepStatus};
use super::tableau::ButcherTableau;
use super::OdeSystem;

/// Nonlinear solver settings for implicit stages.
#[derive(Clone, Debug, PartialEq)]
pub struct ImplicitConfig {
    pub newton: NewtonConfig,
    pub status: StatusTest,
}

impl Default for ImplicitConfig {
    fn default() -> Self {
        ImplicitConfig {
            newton: NewtonConfig {
                forcing: 1e-12,
                ..Default::default()
            },
            status: StatusTest::Or(vec![
                StatusTest::NanDetect,
                StatusTest::NormFAbs(1e-14),
                StatusTest::NormFRel(1e-12),
                StatusTest::MaxIters(20),
            ]),
        }
    }
}

/// Outcome of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub x: Vec<f64>,
    /// Local error estimate `h Σ (b_i − b̂_i) k_i`.
    pub error: Option<Vec<f64>>,
    pub status: StepStatus,
}

/// `G(X) = X − base − coef·f(t, X)`.
struct StageResidual<'a, O> {
    sys: &'a O,
    t: f64,
    base: &'a [f64],
    coef: f64,
}

impl<O: OdeSystem> SystemFn for StageResidual<'_, O> {
    fn dim(&self) -> usize {
        self.base.len()
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let f = self.sys.rhs(self.t, x)?;
        Ok(x
            .iter()
            .zip(self.base)
            .zip(f)
            .map(|((xi, &bi), fi)| xi.clone() - bi - fi * self.coef)
            .collect())
    }
}

fn solve_stage<O: OdeSystem>(
    sys: &O,
    t: f64,
    base: &[f64],
    coef: f64,
    guess: &[f64],
    cfg: &ImplicitConfig,
) -> Result<Vec<f64>> {
    let comm = Comm::serial();
    let model = DenseModel::new(StageResidual { sys, t, base, coef }, &comm);
    let x0 = MultiVector::from_local(crate::nonlinear::ModelEvaluator::map(&model), 1, guess.to_vec())?;
    let fail = |reason: String| Error::StageFailed { t, reason };
    match newton_solve(&model, &x0, &cfg.status, &cfg.newton) {
        Ok(r) if r.converged() => Ok(r.x.col(0).to_vec()),
        Ok(r) => Err(fail(format!(
            "newton stopped by {} after {} iterations",
            r.stopped_by.unwrap_or("status test"),
            r.iterations
        ))),
        Err(
            e @ (Error::LineSearchFailed(_)
            | Error::LinearSolveFailed(_)
            | Error::NonFinite
            | Error::Breakdown { .. }),
        ) => Err(fail(e.to_string())),
        Err(e) => Err(e),
    }
}

fn check_step(x: &[f64], h: f64, sys: &impl OdeSystem) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("step size {h} must be positive")));
    }
    if x.len() != sys.dim() {
        return Err(Error::LengthMismatch {
            expected: sys.dim(),
            found: x.len(),
        });
    }
    Ok(())
}

fn rhs<O: OdeSystem>(sys: &O, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    let f = sys.rhs(t, x)?;
    if f.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: f.len(),
        });
    }
    Ok(f)
}

fn combine(tab: &ButcherTableau, x: &[f64], h: f64, k: &[Vec<f64>]) -> StepResult {
    let s = tab.stages();
    let mut xn = x.to_vec();
    for i in 0..s {
        if tab.b[i] != 0.0 {
            for (o, ki) in xn.iter_mut().zip(&k[i]) {
                *o += h * tab.b[i] * ki;
            }
        }
    }
    let error = tab.b_hat.as_ref().map(|bh| {
        let mut e = vec![0.0; x.len()];
        for i in 0..s {
            let w = tab.b[i] - bh[i];
            if w != 0.0 {
                for (o, ki) in e.iter_mut().zip(&k[i]) {
                    *o += h * w * ki;
                }
            }
        }
        e
    });
    StepResult {
        x: xn,
        error,
        status: StepStatus::Accepted,
    }
}

/// One explicit Runge-Kutta step.
pub fn step_erk<O: OdeSystem>(tab: &ButcherTableau, sys: &O, t: f64, x: &[f64], h: f64) -> Result<StepResult> {
    if !tab.is_explicit() {
        return Err(Error::InvalidTableau(format!("{} is not explicit", tab.name)));
    }
    check_step(x, h, sys)?;
    let s = tab.stages();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut xi = x.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = tab.a(i, j);
            if a != 0.0 {
                for (o, v) in xi.iter_mut().zip(kj) {
                    *o += h * a * v;
                }
            }
        }
        k.push(rhs(sys, t + tab.c[i] * h, &xi)?);
    }
    Ok(combine(tab, x, h, &k))
}

/// One diagonally implicit Runge-Kutta step; each stage with a nonzero
/// diagonal is a Newton solve. A failed stage solve returns
/// [`Error::StageFailed`].
pub fn step_dirk<O: OdeSystem>(
    tab: &ButcherTableau,
    sys: &O,
    t: f64,
    x: &[f64],
    h: f64,
    cfg: &ImplicitConfig,
) -> Result<StepResult> {
    if !tab.is_diagonally_implicit() {
        return Err(Error::InvalidTableau(format!("{} is not lower triangular", tab.name)));
    }
    check_step(x, h, sys)?;
    let s = tab.stages();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut last_stage = Vec::new();
    for i in 0..s {
        let mut base = x.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = tab.a(i, j);
            if a != 0.0 {
                for (o, v) in base.iter_mut().zip(kj) {
                    *o += h * a * v;
                }
            }
        }
        let ti = t + tab.c[i] * h;
        let aii = tab.a(i, i);
        let xi = if aii == 0.0 {
            base
        } else {
            solve_stage(sys, ti, &base, h * aii, &base, cfg)?
        };
        k.push(rhs(sys, ti, &xi)?);
        last_stage = xi;
    }
    let mut r = combine(tab, x, h, &k);
    if tab.is_stiffly_accurate() {
        // the last stage already is the new state; the weighted sum would
        // cancel catastrophically for stiff problems
        r.x = last_stage;
    }
    Ok(r)
}

/// One variable-step BDF2 step from the newest history entries. With a
/// single entry the step is backward Euler and flagged as a bootstrap.
pub fn step_bdf2<O: OdeSystem>(
    history: &SolutionHistory,
    sys: &O,
    h: f64,
    cfg: &ImplicitConfig,
) -> Result<StepResult> {
    let cur = history
        .last()
        .ok_or_else(|| Error::InvalidArgument("BDF2 needs at least one history entry".into()))?;
    check_step(&cur.x, h, sys)?;
    let t1 = cur.t + h;
    let Some(prev) = history.back(1) else {
        let x = solve_stage(sys, t1, &cur.x, h, &cur.x, cfg)?;
        return Ok(StepResult {
            x,
            error: None,
            status: StepStatus::Bootstrap,
        });
    };
    // x⁺ − (1+ω)²/(1+2ω) xₙ + ω²/(1+2ω) xₙ₋₁ = h (1+ω)/(1+2ω) f(t⁺, x⁺)
    let w = h / (cur.t - prev.t);
    let d = 1.0 + 2.0 * w;
    let a1 = (1.0 + w) * (1.0 + w) / d;
    let a2 = w * w / d;
    let beta = (1.0 + w) / d;
    let base: Vec<f64> = cur.x.iter().zip(&prev.x).map(|(xn, xp)| a1 * xn - a2 * xp).collect();
    let x = solve_stage(sys, t1, &base, h * beta, &cur.x, cfg)?;
    Ok(StepResult {
        x,
        error: None,
        status: StepStatus::Accepted,
    })
}

/// A time-stepping method.
#[derive(Clone, Debug, PartialEq)]
pub enum Stepper {
    Explicit(ButcherTableau),
    Dirk(ButcherTableau),
    Bdf2,
}

impl Stepper {
    pub const NAMES: [&'static str; 8] = [
        "forward_euler",
        "rk4",
        "rkf45",
        "bogacki_shampine",
        "backward_euler",
        "trapezoidal",
        "sdirk2",
        "bdf2",
    ];

    pub fn by_name(name: &str) -> Result<Stepper> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "forward_euler" => Stepper::Explicit(ButcherTableau::forward_euler()),
            "rk4" => Stepper::Explicit(ButcherTableau::rk4()),
            "rkf45" => Stepper::Explicit(ButcherTableau::rkf45()),
            "bogacki_shampine" => Stepper::Explicit(ButcherTableau::bogacki_shampine()),
            "backward_euler" => Stepper::Dirk(ButcherTableau::backward_euler()),
            "trapezoidal" => Stepper::Dirk(ButcherTableau::trapezoidal()),
            "sdirk2" => Stepper::Dirk(ButcherTableau::sdirk2()),
            "bdf2" => Stepper::Bdf2,
            _ => {
                return Err(Error::UnknownType {
                    key: "stepper type".into(),
                    value: name.into(),
                })
            }
        })
    }

    /// Reads "stepper type" (default rk4).
    pub fn from_params(p: &ParameterList) -> Result<Stepper> {
        Stepper::by_name(&p.get_text("stepper type", "rk4")?)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Stepper::Explicit(t) | Stepper::Dirk(t) => t.name,
            Stepper::Bdf2 => "bdf2",
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Stepper::Explicit(t) | Stepper::Dirk(t) => t.order,
            Stepper::Bdf2 => 2,
        }
    }

    pub fn embedded_order(&self) -> Option<usize> {
        match self {
            Stepper::Explicit(t) | Stepper::Dirk(t) => t.embedded_order,
            Stepper::Bdf2 => None,
        }
    }

    /// Advance from the newest history entry by `h`.
    pub fn step<O: OdeSystem>(
        &self,
        history: &SolutionHistory,
        sys: &O,
        h: f64,
        cfg: &ImplicitConfig,
    ) -> Result<StepResult> {
        let cur = history
            .last()
            .ok_or_else(|| Error::InvalidArgument("empty solution history".into()))?;
        match self {
            Stepper::Explicit(t) => step_erk(t, sys, cur.t, &cur.x, h),
            Stepper::Dirk(t) => step_dirk(t, sys, cur.t, &cur.x, h, cfg),
            Stepper::Bdf2 => step_bdf2(history, sys, h, cfg),
        }
    }
}
