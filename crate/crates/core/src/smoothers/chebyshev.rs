use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::linalg::{CsrMatrix, Map, MultiVector};

use super::relaxation::inverse_diagonal;
use super::{require_square, Smoother};

pub const DEFAULT_RATIO: f64 = 30.0;
pub const DEFAULT_BOOST: f64 = 1.1;
pub const DEFAULT_POWER_ITERATIONS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChebyshevConfig {
    pub degree: usize,
    /// Largest eigenvalue of `D⁻¹A`. Estimated by power iteration (and
    /// multiplied by `boost`) when absent.
    pub lambda_max: Option<f64>,
    /// `λmin = λmax / ratio`.
    pub ratio: f64,
    pub boost: f64,
    pub power_iterations: usize,
}

impl Default for ChebyshevConfig {
    fn default() -> Self {
        ChebyshevConfig {
            degree: 2,
            lambda_max: None,
            ratio: DEFAULT_RATIO,
            boost: DEFAULT_BOOST,
            power_iterations: DEFAULT_POWER_ITERATIONS,
        }
    }
}

/// Start vector for power iterations: entries in `[0.5, 1.5)` drawn from
/// a generator seeded by the global index, so the estimate does not depend
/// on the partition.
fn start_vector(map: &Map) -> MultiVector {
    MultiVector::from_fn(map, 1, |g, _| {
        ChaCha8Rng::seed_from_u64(g ^ 0x5eed_cafe).gen_range(0.5..1.5)
    })
}

/// Power-iteration estimate of the largest eigenvalue of `D⁻¹A`, as a
/// Rayleigh quotient multiplied by `boost`.
pub fn estimate_lambda_max(a: &CsrMatrix, iters: usize, boost: f64) -> Result<f64> {
    require_square(a)?;
    if iters == 0 {
        return Err(Error::InvalidArgument(
            "power iteration needs at least one step".into(),
        ));
    }
    let inv_diag = inverse_diagonal(a)?;
    let map = a.row_map();
    if map.global_len() == 0 {
        return Ok(0.0);
    }
    let mut v = start_vector(map);
    let mut w = MultiVector::zeros(map, 1);
    let mut lambda = 0.0;
    for _ in 0..iters {
        let nv = v.norm2()?[0];
        if nv == 0.0 {
            break;
        }
        v.scale(1.0 / nv);
        a.apply(&v, &mut w, 1.0, 0.0)?;
        for (wi, di) in w.col_mut(0).iter_mut().zip(&inv_diag) {
            *wi *= di;
        }
        lambda = v.dot(&w)?[0];
        std::mem::swap(&mut v, &mut w);
    }
    Ok(lambda * boost)
}

/// Chebyshev polynomial smoother on the Jacobi-scaled operator `D⁻¹A`,
/// targeting the eigenvalue interval `[λmax/ratio, λmax]`.
#[derive(Clone, Debug)]
pub struct Chebyshev {
    a: Arc<CsrMatrix>,
    inv_diag: Vec<f64>,
    degree: usize,
    lambda_max: f64,
    lambda_min: f64,
}

impl Chebyshev {
    pub fn new(a: Arc<CsrMatrix>, cfg: ChebyshevConfig) -> Result<Chebyshev> {
        require_square(&a)?;
        if cfg.degree == 0 {
            return Err(Error::InvalidArgument(
                "Chebyshev degree must be at least 1".into(),
            ));
        }
        let inv_diag = inverse_diagonal(&a)?;
        let lambda_max = match cfg.lambda_max {
            Some(l) => l,
            None => estimate_lambda_max(&a, cfg.power_iterations, cfg.boost)?,
        };
        if !(lambda_max > 0.0) || !(cfg.ratio > 1.0) || !lambda_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "invalid Chebyshev interval: lambda_max {lambda_max}, ratio {}",
                cfg.ratio
            )));
        }
        Ok(Chebyshev {
            a,
            inv_diag,
            degree: cfg.degree,
            lambda_max,
            lambda_min: lambda_max / cfg.ratio,
        })
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    fn scaled_residual(&self, b: &MultiVector, x: &MultiVector) -> Result<MultiVector> {
        let mut r = b.clone();
        self.a.apply(x, &mut r, -1.0, 1.0)?;
        for j in 0..r.ncols() {
            for (ri, di) in r.col_mut(j).iter_mut().zip(&self.inv_diag) {
                *ri *= di;
            }
        }
        Ok(r)
    }
}

impl Smoother for Chebyshev {
    fn smooth(&self, b: &MultiVector, x: &mut MultiVector) -> Result<()> {
        let theta = 0.5 * (self.lambda_max + self.lambda_min);
        let delta = 0.5 * (self.lambda_max - self.lambda_min);
        let sigma = theta / delta;
        let mut rho = 1.0 / sigma;
        let mut d = self.scaled_residual(b, x)?;
        d.scale(1.0 / theta);
        x.axpy(1.0, &d)?;
        for _ in 1..self.degree {
            let rho_new = 1.0 / (2.0 * sigma - rho);
            let z = self.scaled_residual(b, x)?;
            d.update(2.0 * rho_new / delta, &z, rho_new * rho)?;
            x.axpy(1.0, &d)?;
            rho = rho_new;
        }
        Ok(())
    }
}

impl LinearOperator for Chebyshev {
    fn domain_map(&self) -> &Map {
        self.a.row_map()
    }

    fn range_map(&self) -> &Map {
        self.a.row_map()
    }

    fn apply(&self, r: &MultiVector, z: &mut MultiVector) -> Result<()> {
        z.fill(0.0);
        self.smooth(r, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::Comm;
    use crate::smoothers::{Relaxation, RelaxationConfig, RelaxationKind};

    fn from_dense(c: &Comm, n: usize, a: &[f64]) -> Arc<CsrMatrix> {
        let m = Map::contiguous(n as u64, c);
        let t: Vec<_> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| a[i * n + j] != 0.0)
            .map(|(i, j)| (i as u64, j as u64, a[i * n + j]))
            .collect();
        Arc::new(CsrMatrix::from_triplets(&m, &m, &t).unwrap())
    }

    #[test]
    fn scaled_identity_estimates_boost() {
        let c = Comm::serial();
        let a = from_dense(&c, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0]);
        let l = estimate_lambda_max(&a, 10, 1.1).unwrap();
        assert!((l - 1.1).abs() < 1e-14);
    }

    #[test]
    fn degree_one_is_damped_jacobi() {
        let c = Comm::serial();
        let n = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = if i == j {
                    10.0 + rng.gen_range(0.0..1.0)
                } else {
                    rng.gen_range(-0.5..0.5)
                };
            }
        }
        let a = from_dense(&c, n, &a);
        let cfg = ChebyshevConfig {
            degree: 1,
            lambda_max: Some(1.7),
            ratio: 30.0,
            ..Default::default()
        };
        let cheb = Chebyshev::new(a.clone(), cfg).unwrap();
        let omega = 2.0 / (1.7 / 30.0 + 1.7);
        let jac = Relaxation::new(
            a.clone(),
            RelaxationConfig {
                kind: RelaxationKind::Jacobi,
                sweeps: 1,
                damping: omega,
            },
        )
        .unwrap();
        let map = a.row_map().clone();
        let b = MultiVector::from_fn(&map, 1, |g, _| (g as f64).sin());
        let x0 = MultiVector::from_fn(&map, 1, |g, _| (g as f64).cos());
        let mut x1 = x0.clone();
        let mut x2 = x0.clone();
        cheb.smooth(&b, &mut x1).unwrap();
        jac.smooth(&b, &mut x2).unwrap();
        for (u, v) in x1.col(0).iter().zip(x2.col(0)) {
            assert!((u - v).abs() <= 1e-15 * v.abs().max(1.0));
        }
    }

    /// On `A = I` the smoother applies the residual polynomial
    /// `1 − p(1)`; compare against the scalar Chebyshev recurrence.
    #[test]
    fn identity_applies_polynomial_value() {
        let c = Comm::serial();
        let a = from_dense(&c, 2, &[1.0, 0.0, 0.0, 1.0]);
        for degree in 1..6 {
            let cfg = ChebyshevConfig {
                degree,
                lambda_max: Some(1.0),
                ratio: 30.0,
                ..Default::default()
            };
            let cheb = Chebyshev::new(a.clone(), cfg).unwrap();
            let map = a.row_map().clone();
            let b = MultiVector::from_local(&map, 1, vec![2.0, -3.0]).unwrap();
            let mut x = MultiVector::zeros(&map, 1);
            cheb.smooth(&b, &mut x).unwrap();

            // scalar oracle: residual polynomial T_d((θ−λ)/δ) / T_d(θ/δ) at λ = 1
            let (lmin, lmax) = (1.0 / 30.0, 1.0);
            let theta = 0.5 * (lmax + lmin);
            let delta = 0.5 * (lmax - lmin);
            let cheb_t = |d: usize, t: f64| -> f64 {
                let (mut t0, mut t1) = (1.0, t);
                if d == 0 {
                    return 1.0;
                }
                for _ in 1..d {
                    let t2 = 2.0 * t * t1 - t0;
                    t0 = t1;
                    t1 = t2;
                }
                t1
            };
            let res = cheb_t(degree, (theta - 1.0) / delta) / cheb_t(degree, theta / delta);
            let gain = 1.0 - res;
            assert!((x.col(0)[0] - 2.0 * gain).abs() < 1e-12);
            assert!((x.col(0)[1] + 3.0 * gain).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_interval_rejected() {
        let c = Comm::serial();
        let a = from_dense(&c, 1, &[1.0]);
        for (l, r) in [(0.0, 30.0), (1.0, 1.0), (-1.0, 30.0)] {
            let cfg = ChebyshevConfig {
                lambda_max: Some(l),
                ratio: r,
                ..Default::default()
            };
            assert!(matches!(
                Chebyshev::new(a.clone(), cfg),
                Err(Error::InvalidArgument(_))
            ));
        }
    }
}
