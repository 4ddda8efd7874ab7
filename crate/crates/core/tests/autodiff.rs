use proptest::prelude::*;
use trellis::autodiff::{jacobian, Dual, Scalar};

/// A smooth map `R³ → R³` mixing every elementary function.
fn mixed<S: Scalar>(x: &[S]) -> Vec<S> {
    let (a, b, c) = (x[0].clone(), x[1].clone(), x[2].clone());
    vec![
        (a.clone() * b.clone()).sin() + c.clone().exp() / (a.clone() * a.clone() + 1.0),
        (b.clone() * b.clone() + c.clone() * c.clone() + 0.5).sqrt().ln() - a.clone().tanh(),
        (a.clone() - c.clone()).cos() * b.clone().powi(3) + (c.clone() * c + 1.0).powf(0.75),
    ]
}

fn poly_g<S: Scalar>(x: &[S]) -> Vec<S> {
    let (a, b) = (x[0].clone(), x[1].clone());
    vec![a.clone() * a.clone() * b.clone() + 2.0, a.clone() - b.clone() * b.clone() * 3.0, a * b]
}

fn poly_f<S: Scalar>(u: &[S]) -> Vec<S> {
    let (p, q, r) = (u[0].clone(), u[1].clone(), u[2].clone());
    vec![p.clone() * q.clone() - r.clone().powi(2), p.clone() * p * 0.5 + q * r]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_centered_differences(x in prop::array::uniform3(-1.5f64..1.5)) {
        let jac = jacobian(|d| Ok(mixed(d)), &x).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let (mut xp, mut xm) = (x, x);
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (mixed::<f64>(&xp), mixed::<f64>(&xm));
            for i in 0..3 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                prop_assert!((jac[i][j] - fd).abs() <= 1e-6 * jac[i][j].abs().max(1.0), "{} vs {}", jac[i][j], fd);
            }
        }
    }

    #[test]
    fn chain_rule_composes(x in prop::array::uniform2(-3.0f64..3.0)) {
        let whole = jacobian(|d| Ok(poly_f(&poly_g(d))), &x).unwrap();
        let jg = jacobian(|d| Ok(poly_g(d)), &x).unwrap();
        let jf = jacobian(|d| Ok(poly_f(d)), &poly_g::<f64>(&x)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let prod: f64 = (0..3).map(|k| jf[i][k] * jg[k][j]).sum();
                prop_assert!((whole[i][j] - prod).abs() <= 1e-12 * prod.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_seeds_reproduce_real_evaluation(x in prop::array::uniform3(-1.5f64..1.5), m in 0usize..7) {
        let duals: Vec<Dual> = x.iter().map(|&v| Dual::new(v, &vec![0.0; m])).collect();
        let out = mixed(&duals);
        let plain = mixed::<f64>(&x);
        for (d, p) in out.iter().zip(&plain) {
            prop_assert_eq!(d.value().to_bits(), p.to_bits());
            prop_assert!((0..d.dim()).all(|j| d.deriv(j) == 0.0));
        }
    }
}
