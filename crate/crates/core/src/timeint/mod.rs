//! Runge-Kutta and BDF2 time integration of `x' = f(t, x)`.
//!
//! Methods are described by a [`ButcherTableau`] (explicit or diagonally
//! implicit) or are [`Stepper::Bdf2`]. Implicit stages are solved with the
//! Newton solver on an automatically differentiated Jacobian, so the right
//! hand side is written once for any [`Scalar`].
//!
//! ```
//! use trellis::autodiff::Scalar;
//! use trellis::timeint::{step_erk, ButcherTableau, OdeSystem};
//!
//! struct Growth;
//! impl OdeSystem for Growth {
//!     fn dim(&self) -> usize { 1 }
//!     fn rhs<S: Scalar>(&self, _t: f64, x: &[S]) -> trellis::Result<Vec<S>> {
//!         Ok(vec![x[0].clone()])
//!     }
//! }
//! let r = step_erk(&ButcherTableau::rk4(), &Growth, 0.0, &[1.0], 0.1).unwrap();
//! assert!((r.x[0] - 1.1051708333333333).abs() < 1e-15);
//! ```

mod history;
mod integrate;
mod stepper;
mod tableau;

pub use history::{HistoryEntry, SolutionHistory, StepStatus};
pub use integrate::{
    error_norm, integrate, order_verify, Integration, IntegrationStats, OrderReport, StepControl,
    GROWTH_CLAMP,
};
pub use stepper::{step_bdf2, step_dirk, step_erk, ImplicitConfig, StepResult, Stepper};
pub use tableau::ButcherTableau;

use crate::autodiff::Scalar;
use crate::error::Result;

/// Right-hand side of a first-order system.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs<S: Scalar>(&self, t: f64, x: &[S]) -> Result<Vec<S>>;
}

/// A system with a known solution, for convergence studies.
pub trait ExactOde: OdeSystem {
    fn name(&self) -> &'static str;
    fn exact(&self, t: f64) -> Vec<f64>;
}

/// `y' = λy`, `y(0) = 1`.
#[derive(Clone, Copy, Debug)]
pub struct Decay(pub f64);

impl OdeSystem for Decay {
    fn dim(&self) -> usize {
        1
    }
    fn rhs<S: Scalar>(&self, _t: f64, x: &[S]) -> Result<Vec<S>> {
        Ok(vec![x[0].clone() * self.0])
    }
}

impl ExactOde for Decay {
    fn name(&self) -> &'static str {
        "decay"
    }
    fn exact(&self, t: f64) -> Vec<f64> {
        vec![(self.0 * t).exp()]
    }
}

/// `u' = v`, `v' = −u` from `(1, 0)`.
#[derive(Clone, Copy, Debug)]
pub struct Oscillator;

impl OdeSystem for Oscillator {
    fn dim(&self) -> usize {
        2
    }
    fn rhs<S: Scalar>(&self, _t: f64, x: &[S]) -> Result<Vec<S>> {
        Ok(vec![x[1].clone(), -x[0].clone()])
    }
}

impl ExactOde for Oscillator {
    fn name(&self) -> &'static str {
        "oscillator"
    }
    fn exact(&self, t: f64) -> Vec<f64> {
        vec![t.cos(), -t.sin()]
    }
}

/// Step sizes of the standard order study on `[0, 1]`.
pub const STUDY_STEPS: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

/// Order study of one stepper on `y' = −y` and the oscillator.
pub fn standard_order_study(stepper: &Stepper) -> Result<Vec<OrderReport>> {
    Ok(vec![
        order_verify(stepper, &Decay(-1.0), 0.0, 1.0, &STUDY_STEPS)?,
        order_verify(stepper, &Oscillator, 0.0, 1.0, &STUDY_STEPS)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn one(stepper: &Stepper, sys: &impl OdeSystem, x: &[f64], h: f64) -> Vec<f64> {
        let mut hist = SolutionHistory::new(3).unwrap();
        hist.push(HistoryEntry {
            t: 0.0,
            x: x.to_vec(),
            dt: 0.0,
            status: StepStatus::Initial,
        })
        .unwrap();
        stepper.step(&hist, sys, h, &ImplicitConfig::default()).unwrap().x
    }

    #[test]
    fn explicit_steps() {
        let rk4: f64 = (0..=4).map(|k| 0.1f64.powi(k) / (1..=k).product::<i32>().max(1) as f64).sum();
        let x = one(&Stepper::by_name("rk4").unwrap(), &Decay(1.0), &[1.0], 0.1);
        assert!((x[0] - rk4).abs() < 1e-15);
        let x = one(&Stepper::by_name("forward_euler").unwrap(), &Decay(1.0), &[1.0], 0.1);
        assert!((x[0] - 1.1).abs() < 1e-15);
        let x = one(&Stepper::by_name("bogacki_shampine").unwrap(), &Decay(0.0), &[3.0, ][..], 0.1);
        assert_eq!(x, vec![3.0]);
    }

    #[test]
    fn implicit_steps() {
        let x = one(&Stepper::by_name("backward_euler").unwrap(), &Decay(-1.0), &[2.0], 0.1);
        assert!((x[0] - 2.0 / 1.1).abs() < 1e-14);
        let x = one(&Stepper::by_name("trapezoidal").unwrap(), &Decay(-1.0), &[2.0], 0.1);
        assert!((x[0] - 2.0 * 0.95 / 1.05).abs() < 1e-14);
        let x = one(&Stepper::by_name("backward_euler").unwrap(), &Decay(-1e6), &[1.0], 0.1);
        assert!(x[0].abs() <= 1.0);
        assert!((x[0] - 1.0 / (1.0 + 1e5)).abs() < 1e-14, "{}", x[0] - 1.0 / (1.0 + 1e5));
    }

    #[test]
    fn bdf2_bootstrap_and_two_step() {
        let cfg = ImplicitConfig::default();
        let mut hist = SolutionHistory::new(3).unwrap();
        hist.push(HistoryEntry {
            t: 0.0,
            x: vec![1.0],
            dt: 0.0,
            status: StepStatus::Initial,
        })
        .unwrap();
        let r = step_bdf2(&hist, &Decay(-1.0), 0.1, &cfg).unwrap();
        assert_eq!(r.status, StepStatus::Bootstrap);
        assert!((r.x[0] - 1.0 / 1.1).abs() < 1e-14);

        let mut hist = SolutionHistory::new(3).unwrap();
        for (t, x) in [(0.0, 1.0), (0.1, (-0.1f64).exp())] {
            hist.push(HistoryEntry {
                t,
                x: vec![x],
                dt: 0.1,
                status: StepStatus::Accepted,
            })
            .unwrap();
        }
        let r = step_bdf2(&hist, &Decay(-1.0), 0.1, &cfg).unwrap();
        assert_eq!(r.status, StepStatus::Accepted);
        // (3 + 2h) x⁺ = 4xₙ − xₙ₋₁
        let oracle = (4.0 * (-0.1f64).exp() - 1.0) / 3.2;
        assert!((r.x[0] - oracle).abs() < 1e-14);

        let r = step_bdf2(&hist, &Decay(0.0), 0.1, &cfg);
        assert!(r.is_ok());
    }

    #[test]
    fn wrong_tableau_kind_is_rejected() {
        let r = step_erk(&ButcherTableau::sdirk2(), &Decay(-1.0), 0.0, &[1.0], 0.1);
        assert!(matches!(r, Err(Error::InvalidTableau(_))));
        assert!(step_erk(&ButcherTableau::rk4(), &Decay(-1.0), 0.0, &[1.0], 0.0).is_err());
        assert!(Stepper::by_name("leapfrog").is_err());
    }

    #[test]
    fn fixed_steps_land_on_final_time() {
        let mut hist = SolutionHistory::new(100).unwrap();
        let out = integrate(
            &Stepper::by_name("rkf45").unwrap(),
            &Decay(-1.0),
            0.0,
            1.0,
            &[1.0],
            &StepControl::fixed(0.1),
            &mut hist,
            &ImplicitConfig::default(),
        )
        .unwrap();
        assert_eq!(out.t, 1.0);
        assert_eq!(out.stats.accepted, 10);
        assert_eq!(out.stats.rejected, 0);
        assert_eq!(hist.len(), 11);
    }

    #[test]
    fn adaptive_growth_hits_e() {
        let ctrl = StepControl {
            rtol: 1e-8,
            atol: 1e-10,
            dt_init: 0.1,
            ..Default::default()
        };
        let mut hist = SolutionHistory::new(1000).unwrap();
        let out = integrate(
            &Stepper::by_name("rkf45").unwrap(),
            &Decay(1.0),
            0.0,
            1.0,
            &[1.0],
            &ctrl,
            &mut hist,
            &ImplicitConfig::default(),
        )
        .unwrap();
        assert_eq!(out.t, 1.0);
        assert!((out.x[0] - std::f64::consts::E).abs() <= 1e-6);
        assert!(out.stats.error_norms.iter().all(|&e| e <= 1.0));
        assert_eq!(out.stats.error_norms.len(), out.stats.accepted);
    }

    struct Jump;
    impl OdeSystem for Jump {
        fn dim(&self) -> usize {
            1
        }
        fn rhs<S: Scalar>(&self, t: f64, _x: &[S]) -> Result<Vec<S>> {
            Ok(vec![S::from(if t < 0.5 { 0.0 } else { 1e12 })])
        }
    }

    #[test]
    fn persistent_rejection_aborts() {
        let ctrl = StepControl {
            rtol: 1e-10,
            atol: 1e-12,
            dt_init: 0.1,
            dt_min: 1e-6,
            ..Default::default()
        };
        let mut hist = SolutionHistory::new(10).unwrap();
        let r = integrate(
            &Stepper::by_name("bogacki_shampine").unwrap(),
            &Jump,
            0.0,
            1.0,
            &[0.0],
            &ctrl,
            &mut hist,
            &ImplicitConfig::default(),
        );
        assert!(matches!(r, Err(Error::StepSizeTooSmall { .. })), "{r:?}");
    }

    #[test]
    fn control_params() {
        let p = crate::ParameterList::from_text(br#"{"dt init":0.5,"dt min":0.1,"dt max":1.0,"safety":0.8}"#).unwrap();
        let c = StepControl::from_params(&p).unwrap();
        assert_eq!((c.dt_init, c.safety), (0.5, 0.8));
        let bad = crate::ParameterList::new().with("dt min", 1.0).with("dt init", 0.5);
        assert!(StepControl::from_params(&bad).is_err());
        let s = Stepper::from_params(&crate::ParameterList::new().with("stepper type", "sdirk2")).unwrap();
        assert_eq!(s.order(), 2);
    }
}
