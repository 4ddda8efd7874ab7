//! Newton-type nonlinear solvers over a stateless model contract.
//!
//! [`newton_solve`] combines an inexact Krylov solve of the Newton system
//! (assembled, automatically differentiated or finite-difference
//! Jacobians) with an optional backtracking line search on `½‖F‖²`.
//! [`anderson_solve`] accelerates fixed-point maps. Both stop according to
//! a [`StatusTest`] tree.

mod anderson;
mod model;
mod newton;
mod status;

pub use anderson::{anderson_solve, AndersonConfig, AndersonResult};
pub use model::{ad_jacobian, ad_jvp, jfnk_apply, DenseModel, ModelEvaluator, SystemFn};
pub use newton::{
    newton_solve, JacobianMode, LineSearch, NewtonConfig, NewtonResult, NewtonStep, ARMIJO_C,
    MAX_TRIALS,
};
pub use status::{wrms, SolverState, Status, StatusTest};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Scalar;
    use crate::comm::{launch, Comm};
    use crate::error::{Error, Result};
    use crate::linalg::{Map, MultiVector};

    struct Sqrt2;
    impl SystemFn for Sqrt2 {
        fn dim(&self) -> usize {
            1
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
            Ok(vec![x[0].clone() * x[0].clone() - 2.0])
        }
    }

    struct Shift(f64);
    impl SystemFn for Shift {
        fn dim(&self) -> usize {
            1
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
            Ok(vec![x[0].clone() - self.0])
        }
    }

    /// `tanh(x)`: full Newton steps from |x0| > 1.09 overshoot and diverge.
    struct Tanh;
    impl SystemFn for Tanh {
        fn dim(&self) -> usize {
            1
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
            Ok(vec![x[0].tanh()])
        }
    }

    /// Small coupled system with solution (1, 2).
    struct Coupled;
    impl SystemFn for Coupled {
        fn dim(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
            let (a, b) = (x[0].clone(), x[1].clone());
            Ok(vec![
                a.clone() * a.clone() + b.clone() - 3.0,
                a.exp() * 0.5 + b.clone() * b - 4.0 - 0.5 * 1f64.exp(),
            ])
        }
    }

    fn exact() -> NewtonConfig {
        NewtonConfig {
            forcing: 1e-13,
            ..Default::default()
        }
    }

    fn x0(m: &dyn ModelEvaluator, v: &[f64]) -> MultiVector {
        MultiVector::from_fn(m.map(), 1, |g, _| v[g as usize])
    }

    #[test]
    fn linear_problem_in_one_step() {
        let c = Comm::serial();
        let m = DenseModel::new(Shift(3.5), &c);
        let r = newton_solve(&m, &x0(&m, &[0.0]), &StatusTest::default(), &exact()).unwrap();
        assert!(r.converged());
        assert_eq!(r.iterations, 1);
        assert_eq!(r.steps[0].step_length, 1.0);
        assert!((r.x.col(0)[0] - 3.5).abs() < 1e-14);
    }

    #[test]
    fn babylonian_sequence() {
        let c = Comm::serial();
        let m = DenseModel::new(Sqrt2, &c);
        let st = StatusTest::Or(vec![StatusTest::NormFAbs(1e-12), StatusTest::MaxIters(20)]);
        let r = newton_solve(&m, &x0(&m, &[1.0]), &st, &exact()).unwrap();
        assert!(r.converged());
        let mut x = 1.0f64;
        for (k, n) in r.f_norms.iter().enumerate() {
            assert!((n - (x * x - 2.0).abs()).abs() <= 1e-13, "iterate {k}");
            x = 0.5 * (x + 2.0 / x);
        }
        assert!(*r.f_norms.last().unwrap() <= 1e-12);
    }

    #[test]
    fn quadratic_rate() {
        let c = Comm::serial();
        let m = DenseModel::new(Sqrt2, &c);
        let st = StatusTest::Or(vec![StatusTest::NormFAbs(1e-15), StatusTest::MaxIters(20)]);
        let r = newton_solve(&m, &x0(&m, &[3.0]), &st, &exact()).unwrap();
        // reconstruct iterates from the steps: x_k solves |x² − 2| = ‖F_k‖, x > 0
        let e: Vec<f64> = r
            .f_norms
            .iter()
            .map(|n| ((2.0 + n).sqrt() - 2f64.sqrt()).abs())
            .filter(|&e| e > 1e-15)
            .collect();
        let k = e.len();
        for i in k - 4..k - 1 {
            let ratio = e[i + 1] / (e[i] * e[i]);
            assert!((0.2..=0.6).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn nan_at_start_fails() {
        struct Bad;
        impl SystemFn for Bad {
            fn dim(&self) -> usize {
                1
            }
            fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
                Ok(vec![x[0].ln()])
            }
        }
        let c = Comm::serial();
        let m = DenseModel::new(Bad, &c);
        let r = newton_solve(&m, &x0(&m, &[-1.0]), &StatusTest::default(), &exact()).unwrap();
        assert_eq!(r.status, Status::Failed);
        assert_eq!(r.stopped_by, Some("nan_detect"));

        let no_nan_test = StatusTest::MaxIters(5);
        assert_eq!(
            newton_solve(&m, &x0(&m, &[-1.0]), &no_nan_test, &exact()).unwrap_err(),
            Error::NonFinite
        );
    }

    #[test]
    fn backtracking_rescues_overshoot() {
        let c = Comm::serial();
        let m = DenseModel::new(Tanh, &c);
        let full = NewtonConfig {
            line_search: LineSearch::Full,
            ..exact()
        };
        let st = StatusTest::Or(vec![
            StatusTest::NanDetect,
            StatusTest::NormFAbs(1e-12),
            StatusTest::MaxIters(30),
        ]);
        let r = newton_solve(&m, &x0(&m, &[1.5]), &st, &full);
        assert!(!matches!(r, Ok(ref r) if r.converged()));

        let r = newton_solve(&m, &x0(&m, &[1.5]), &st, &exact()).unwrap();
        assert!(r.converged());
        assert!(r.steps.iter().any(|s| s.trials > 1));
        for s in &r.steps {
            assert!(s.merit_after <= s.merit_before + ARMIJO_C * s.step_length * s.slope);
        }
        assert!(r.f_norms.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn jacobian_modes_agree() {
        let out = launch(2, |c| {
            let m = DenseModel::new(Coupled, c);
            let st = StatusTest::Or(vec![StatusTest::NormFAbs(1e-10), StatusTest::MaxIters(30)]);
            let mut res = Vec::new();
            for mode in [JacobianMode::Matrix, JacobianMode::MatrixFreeAd, JacobianMode::MatrixFreeFd] {
                let cfg = NewtonConfig {
                    jacobian: mode,
                    forcing: 1e-6,
                    ..Default::default()
                };
                let r = newton_solve(&m, &x0(&m, &[2.0, 1.0]), &st, &cfg)?;
                assert!(r.converged());
                res.push(r.f_norms.clone());
            }
            Ok(res)
        })
        .unwrap();
        let res = &out[0];
        for other in &res[1..] {
            let k = res[0].len().min(other.len()) - 1;
            for i in 0..k {
                let d = (res[0][i] - other[i]).abs();
                assert!(d <= 1e-6 * res[0][0].max(1.0), "{i}: {d}");
            }
        }
    }

    #[test]
    fn params() {
        let p = crate::ParameterList::from_text(
            br#"{"nonlinear: line search":"full","nonlinear: jacobian mode":"matrix_free_fd",
                 "nonlinear: forcing term":1e-6,"linear solver":{"solver type":"bicgstab"}}"#,
        )
        .unwrap();
        let cfg = NewtonConfig::from_params(&p).unwrap();
        assert_eq!(cfg.line_search, LineSearch::Full);
        assert_eq!(cfg.jacobian, JacobianMode::MatrixFreeFd);
        assert_eq!(cfg.forcing, 1e-6);
        let bad = crate::ParameterList::new().with("nonlinear: jacobian mode", "secant");
        assert!(NewtonConfig::from_params(&bad).is_err());
    }

    fn map1(c: &Comm, n: u64) -> Map {
        Map::contiguous(n, c)
    }

    #[test]
    fn anderson_zero_depth_is_fixed_point_iteration() {
        let c = Comm::serial();
        let m = map1(&c, 2);
        let g = |x: &MultiVector| -> Result<MultiVector> {
            let v = x.col(0);
            MultiVector::from_local(x.map(), 1, vec![0.5 * v[1].cos(), 0.3 * v[0].sin() + 0.1])
        };
        let cfg = AndersonConfig { depth: 0, mixing: 1.0 };
        let st = StatusTest::MaxIters(6);
        let r = anderson_solve(g, &MultiVector::zeros(&m, 1), &cfg, &st).unwrap();
        let mut x = MultiVector::zeros(&m, 1);
        for _ in 0..6 {
            x = g(&x).unwrap();
        }
        assert_eq!(r.x.col(0), x.col(0));
    }

    #[test]
    fn anderson_one_is_exact_for_affine_maps() {
        let c = Comm::serial();
        let m = map1(&c, 3);
        let g = |x: &MultiVector| -> Result<MultiVector> {
            let mut y = x.clone();
            y.scale(0.5);
            Ok(y)
        };
        let cfg = AndersonConfig { depth: 1, mixing: 1.0 };
        let st = StatusTest::Or(vec![StatusTest::NormFAbs(1e-14), StatusTest::MaxIters(50)]);
        let x0 = MultiVector::from_fn(&m, 1, |g, _| g as f64 + 1.0);
        let r = anderson_solve(g, &x0, &cfg, &st).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!(r.iterations <= 2, "{}", r.iterations);
    }

    #[test]
    fn anderson_identity_stagnates() {
        let c = Comm::serial();
        let m = map1(&c, 2);
        let cfg = AndersonConfig::default();
        let st = StatusTest::Or(vec![
            StatusTest::Stagnation { window: 5, factor: 1.0 },
            StatusTest::MaxIters(50),
        ]);
        let r = anderson_solve(|x| Ok(x.clone()), &MultiVector::constant(&m, 1, 2.0), &cfg, &st).unwrap();
        assert_eq!(r.status, Status::Failed);
        assert_eq!(r.stopped_by, Some("stagnation"));
        assert_eq!(r.iterations, 5);
    }

    #[test]
    fn anderson_accelerates_a_slow_contraction() {
        let out = launch(2, |c| {
            let m = map1(c, 20);
            // x = 0.95 x + b contracts slowly; b varies by index
            let g = |x: &MultiVector| -> Result<MultiVector> {
                let mut y = MultiVector::from_fn(x.map(), 1, |g, _| 1.0 + 0.01 * g as f64);
                y.axpy(0.95, x)?;
                Ok(y)
            };
            let st = StatusTest::Or(vec![StatusTest::NormFAbs(1e-10), StatusTest::MaxIters(2000)]);
            let plain = anderson_solve(g, &MultiVector::zeros(&m, 1), &AndersonConfig { depth: 0, mixing: 1.0 }, &st)?;
            let acc = anderson_solve(g, &MultiVector::zeros(&m, 1), &AndersonConfig { depth: 3, mixing: 1.0 }, &st)?;
            Ok((plain.iterations, acc.iterations, acc.status))
        })
        .unwrap();
        let (plain, acc, st) = out[0];
        assert_eq!(st, Status::Converged);
        assert!(acc * 10 < plain, "{acc} vs {plain}");
    }
}
