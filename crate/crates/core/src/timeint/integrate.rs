use crate::error::{Error, Result};
use crate::paramlist::ParameterList;

use super::history::{HistoryEntry, SolutionHistory, StepStatus};
use super::stepper::{ImplicitConfig, Stepper};
use super::{ExactOde, OdeSystem};

/// Step-size controller settings. `rtol = ∞` selects fixed steps of
/// `dt_init`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub rtol: f64,
    pub atol: f64,
    pub safety: f64,
}

/// Bounds on the step-size change factor.
pub const GROWTH_CLAMP: (f64, f64) = (0.2, 5.0);

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            dt_init: 1e-2,
            dt_min: 1e-12,
            dt_max: 1.0,
            rtol: 1e-6,
            atol: 1e-9,
            safety: 0.9,
        }
    }
}

impl StepControl {
    pub fn fixed(dt: f64) -> StepControl {
        StepControl {
            dt_init: dt,
            dt_min: dt,
            dt_max: dt,
            rtol: f64::INFINITY,
            atol: 0.0,
            safety: 0.9,
        }
    }

    /// Keys: "dt init", "dt min", "dt max", "rtol", "atol", "safety".
    pub fn from_params(p: &ParameterList) -> Result<StepControl> {
        let d = StepControl::default();
        let c = StepControl {
            dt_init: p.get_real("dt init", d.dt_init)?,
            dt_min: p.get_real("dt min", d.dt_min)?,
            dt_max: p.get_real("dt max", d.dt_max)?,
            rtol: p.get_real("rtol", d.rtol)?,
            atol: p.get_real("atol", d.atol)?,
            safety: p.get_real("safety", d.safety)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad(format!(
                "need 0 < dt min ({}) <= dt init ({}) <= dt max ({})",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if !self.dt_max.is_finite() {
            return bad("dt max must be finite".into());
        }
        if !(self.rtol > 0.0) || !(self.atol >= 0.0) {
            return bad(format!("need rtol > 0 and atol >= 0, got {} and {}", self.rtol, self.atol));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return bad(format!("safety {} must lie in (0, 1]", self.safety));
        }
        Ok(())
    }
}

/// Mixed WRMS norm of a local error estimate with weights
/// `rtol·max(|xₙ|, |xₙ₊₁|) + atol`.
pub fn error_norm(err: &[f64], x: &[f64], xn: &[f64], rtol: f64, atol: f64) -> f64 {
    if err.is_empty() {
        return 0.0;
    }
    let mut s = 0.0;
    for ((e, a), b) in err.iter().zip(x).zip(xn) {
        let w = rtol * a.abs().max(b.abs()) + atol;
        let r = if *e == 0.0 { 0.0 } else { e / w };
        s += r * r;
    }
    (s / err.len() as f64).sqrt()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Rejections caused by implicit stage solves.
    pub stage_failures: usize,
    /// Error norm of every accepted adaptive step.
    pub error_norms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Integration {
    pub t: f64,
    pub x: Vec<f64>,
    pub stats: IntegrationStats,
}

/// Integrate from `t0` to `tf`, landing exactly on `tf`.
///
/// Steps are adaptive when the stepper has an embedded estimate and
/// `ctrl.rtol` is finite. A rejected step, or a failed stage solve (which
/// halves the step), never moves the solution. Accepted states are appended
/// to `history`; an empty history is seeded with `(t0, x0)`, a non-empty
/// one must end at `t0`.
pub fn integrate<O: OdeSystem>(
    stepper: &Stepper,
    sys: &O,
    t0: f64,
    tf: f64,
    x0: &[f64],
    ctrl: &StepControl,
    history: &mut SolutionHistory,
    implicit: &ImplicitConfig,
) -> Result<Integration> {
    ctrl.validate()?;
    if !(tf > t0) {
        return Err(Error::InvalidArgument(format!("final time {tf} must exceed {t0}")));
    }
    if x0.len() != sys.dim() {
        return Err(Error::LengthMismatch {
            expected: sys.dim(),
            found: x0.len(),
        });
    }
    match history.last() {
        None => history.push(HistoryEntry {
            t: t0,
            x: x0.to_vec(),
            dt: 0.0,
            status: StepStatus::Initial,
        })?,
        Some(e) if e.t == t0 && e.x == x0 => {}
        Some(e) => {
            return Err(Error::InvalidArgument(format!(
                "history ends at t = {}, integration starts at {t0}",
                e.t
            )))
        }
    }
    let adaptive = ctrl.rtol.is_finite() && stepper.embedded_order().is_some();
    let q = stepper
        .order()
        .min(stepper.embedded_order().unwrap_or(usize::MAX)) as f64;
    let (lo, hi) = GROWTH_CLAMP;
    let factor = |err: f64| -> f64 {
        if err == 0.0 {
            hi
        } else {
            (ctrl.safety * err.powf(-1.0 / (q + 1.0))).clamp(lo, hi)
        }
    };

    let mut stats = IntegrationStats::default();
    let mut t = t0;
    let mut x = x0.to_vec();
    let mut h = ctrl.dt_init;
    while t < tf {
        let mut hs = h;
        let last = t + hs >= tf || tf - (t + hs) <= 1e-10 * hs;
        if last {
            hs = tf - t;
        }
        let r = match stepper.step(history, sys, hs, implicit) {
            Ok(r) => r,
            Err(Error::StageFailed { .. }) => {
                stats.rejected += 1;
                stats.stage_failures += 1;
                h = 0.5 * hs;
                if h < ctrl.dt_min {
                    return Err(Error::StepSizeTooSmall { t, dt: h });
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        if adaptive {
            let est = r.error.as_deref().expect("embedded stepper returns an estimate");
            let err = error_norm(est, &x, &r.x, ctrl.rtol, ctrl.atol);
            if !(err <= 1.0) {
                stats.rejected += 1;
                h = if err.is_finite() { hs * factor(err) } else { hs * lo };
                if h < ctrl.dt_min {
                    return Err(Error::StepSizeTooSmall { t, dt: h });
                }
                continue;
            }
            stats.error_norms.push(err);
            h = (hs * factor(err)).min(ctrl.dt_max);
        }
        t = if last { tf } else { t + hs };
        x = r.x;
        history.push(HistoryEntry {
            t,
            x: x.clone(),
            dt: hs,
            status: r.status,
        })?;
        stats.accepted += 1;
    }
    Ok(Integration { t, x, stats })
}

/// Errors at `tf` for a sequence of step sizes and the least-squares slope
/// of `log error` against `log h`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderReport {
    pub stepper: &'static str,
    pub problem: &'static str,
    pub step_sizes: Vec<f64>,
    pub errors: Vec<f64>,
    pub observed_order: f64,
}

/// Fixed-step convergence study against an exact solution. Step sizes
/// must form a geometric sequence of at least three terms.
pub fn order_verify<O: ExactOde>(
    stepper: &Stepper,
    problem: &O,
    t0: f64,
    tf: f64,
    step_sizes: &[f64],
) -> Result<OrderReport> {
    if step_sizes.len() < 3 {
        return Err(Error::InvalidArgument("order study needs at least 3 step sizes".into()));
    }
    let ratio = step_sizes[1] / step_sizes[0];
    let geometric = ratio > 0.0
        && ratio != 1.0
        && step_sizes
            .windows(2)
            .all(|w| ((w[1] / w[0]) - ratio).abs() <= 1e-10 * ratio);
    if !geometric {
        return Err(Error::InvalidArgument("step sizes must form a geometric sequence".into()));
    }
    let x0 = problem.exact(t0);
    let exact = problem.exact(tf);
    let implicit = ImplicitConfig::default();
    let mut errors = Vec::with_capacity(step_sizes.len());
    for &h in step_sizes {
        let mut hist = SolutionHistory::new(3)?;
        let out = integrate(stepper, problem, t0, tf, &x0, &StepControl::fixed(h), &mut hist, &implicit)?;
        let e = out
            .x
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        errors.push(e);
    }
    let lx: Vec<f64> = step_sizes.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(OrderReport {
        stepper: stepper.name(),
        problem: problem.name(),
        step_sizes: step_sizes.to_vec(),
        errors,
        observed_order: sxy / sxx,
    })
}
