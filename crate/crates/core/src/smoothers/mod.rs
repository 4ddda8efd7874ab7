//! Point relaxation, Chebyshev polynomials, incomplete LU, one-level
//! overlapping Schwarz and 2x2 block preconditioners.
//!
//! Each preconditioner is a [`LinearOperator`] whose `apply` starts from a
//! zero guess; the [`Smoother`] trait adds smoothing of an existing iterate.

mod block;
mod chebyshev;
mod ilu;
mod relaxation;
mod schwarz;

pub use block::{
    diagonal_schur, split_2x2, BlockKind, BlockOperator2x2, BlockPreconditioner, SplitMatrix,
};
pub use chebyshev::{estimate_lambda_max, Chebyshev, ChebyshevConfig};
pub use ilu::{Ilu, IluFactors};
pub use relaxation::{Relaxation, RelaxationConfig, RelaxationKind};
pub(crate) use relaxation::inverse_diagonal;
pub use schwarz::{overlap_map, Schwarz, SchwarzCombine, SchwarzConfig, SubdomainSolver};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::linalg::{CsrMatrix, MultiVector};
use crate::paramlist::ParameterList;

/// A preconditioner that can also improve a given iterate.
pub trait Smoother: LinearOperator {
    /// Improve `x` towards the solution of `A x = b`.
    fn smooth(&self, b: &MultiVector, x: &mut MultiVector) -> Result<()>;
}

/// `x += M (b − A x)`
pub(crate) fn correct(
    a: &CsrMatrix,
    m: &dyn LinearOperator,
    b: &MultiVector,
    x: &mut MultiVector,
) -> Result<()> {
    let mut r = b.clone();
    a.apply(x, &mut r, -1.0, 1.0)?;
    let mut z = MultiVector::zeros(x.map(), x.ncols());
    m.apply(&r, &mut z)?;
    x.axpy(1.0, &z)
}

pub(crate) fn require_square(a: &CsrMatrix) -> Result<()> {
    a.row_map().require_same(
        a.domain_map(),
        "this operation needs a square matrix with equal row and domain maps",
    )
}

/// Build a smoother from a parameter list.
///
/// Keys: "smoother type" (jacobi, gauss_seidel, gauss_seidel_backward,
/// symmetric_gauss_seidel, chebyshev, ilu, schwarz), "sweeps", "damping",
/// "chebyshev degree", "chebyshev ratio", "lambda max", "ilu fill level",
/// "schwarz overlap", "subdomain solver" (dense_lu, ilu) and "combine mode"
/// (additive, restricted_additive).
pub fn build_smoother(a: Arc<CsrMatrix>, p: &ParameterList) -> Result<Box<dyn Smoother>> {
    let ty = p.get_text("smoother type", "symmetric_gauss_seidel")?;
    smoother_of_type(&ty, a, p)
}

/// [`build_smoother`] with the type given separately from the list.
pub fn smoother_of_type(ty: &str, a: Arc<CsrMatrix>, p: &ParameterList) -> Result<Box<dyn Smoother>> {
    if let Some(kind) = RelaxationKind::parse(ty) {
        let cfg = RelaxationConfig {
            kind,
            sweeps: p.get_count("sweeps", 1)?,
            damping: p.get_real("damping", 1.0)?,
        };
        return Ok(Box::new(Relaxation::new(a, cfg)?));
    }
    match ty.to_ascii_lowercase().as_str() {
        "chebyshev" => {
            let d = ChebyshevConfig::default();
            let lambda_max = if p.contains("lambda max") {
                Some(p.get_real("lambda max", 0.0)?)
            } else {
                None
            };
            let cfg = ChebyshevConfig {
                degree: p.get_count("chebyshev degree", d.degree)?,
                lambda_max,
                ratio: p.get_real("chebyshev ratio", d.ratio)?,
                ..d
            };
            Ok(Box::new(Chebyshev::new(a, cfg)?))
        }
        "ilu" => Ok(Box::new(Ilu::new(a, p.get_count("ilu fill level", 0)?)?)),
        "schwarz" => Ok(Box::new(Schwarz::new(a, schwarz_config(p, SchwarzCombine::Additive)?)?)),
        _ => Err(Error::UnknownType {
            key: "smoother type".into(),
            value: ty.into(),
        }),
    }
}

/// Schwarz options from "schwarz overlap", "subdomain solver", "ilu fill
/// level" and "combine mode".
pub fn schwarz_config(p: &ParameterList, default_combine: SchwarzCombine) -> Result<SchwarzConfig> {
    let solver = match p.get_text("subdomain solver", "dense_lu")?.to_ascii_lowercase().as_str() {
        "dense_lu" | "lu" => SubdomainSolver::DenseLu,
        "ilu" => SubdomainSolver::Ilu(p.get_count("ilu fill level", 0)?),
        other => {
            return Err(Error::UnknownType {
                key: "subdomain solver".into(),
                value: other.into(),
            })
        }
    };
    let combine = if p.contains("combine mode") {
        SchwarzCombine::parse(&p.get_text("combine mode", "")?)?
    } else {
        default_combine
    };
    Ok(SchwarzConfig {
        overlap: p.get_count("schwarz overlap", 1)?,
        solver,
        combine,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::launch;
    use crate::linalg::Map;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poisson_2d(c: &crate::Comm, nx: u64) -> Arc<CsrMatrix> {
        let n = nx * nx;
        let m = Map::contiguous(n, c);
        let rows = m
            .gids()
            .iter()
            .map(|&g| {
                let (i, j) = (g % nx, g / nx);
                let mut r = vec![(g, 4.0)];
                if i > 0 {
                    r.push((g - 1, -1.0));
                }
                if i + 1 < nx {
                    r.push((g + 1, -1.0));
                }
                if j > 0 {
                    r.push((g - nx, -1.0));
                }
                if j + 1 < nx {
                    r.push((g + nx, -1.0));
                }
                r
            })
            .collect();
        Arc::new(CsrMatrix::from_rows(&m, &m, rows).unwrap())
    }

    fn all_configs() -> Vec<ParameterList> {
        let t = |s: &str| ParameterList::from_text(s.as_bytes()).unwrap();
        vec![
            t(r#"{"smoother type":"jacobi","sweeps":2,"damping":0.8}"#),
            t(r#"{"smoother type":"symmetric_gauss_seidel","sweeps":2}"#),
            t(r#"{"smoother type":"gauss_seidel"}"#),
            t(r#"{"smoother type":"chebyshev","chebyshev degree":3}"#),
            t(r#"{"smoother type":"ilu","ilu fill level":1}"#),
            t(r#"{"smoother type":"schwarz","schwarz overlap":1}"#),
            t(r#"{"smoother type":"schwarz","combine mode":"restricted_additive"}"#),
        ]
    }

    /// Every preconditioner is linear in its input; the symmetric ones are
    /// symmetric operators on a symmetric matrix.
    #[test]
    fn linearity_and_symmetry() {
        let symmetric = [true, true, false, true, false, true, false];
        let out = launch(3, |c| {
            let a = poisson_2d(c, 7);
            let map = a.row_map().clone();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let vals: Vec<f64> = (0..3 * 49).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r1 = MultiVector::from_fn(&map, 1, |g, _| vals[g as usize]);
            let r2 = MultiVector::from_fn(&map, 1, |g, _| vals[49 + g as usize]);
            let mut res = Vec::new();
            for p in all_configs() {
                let s = build_smoother(a.clone(), &p)?;
                let apply = |r: &MultiVector| -> Result<MultiVector> {
                    let mut z = MultiVector::zeros(&map, 1);
                    s.apply(r, &mut z)?;
                    Ok(z)
                };
                let mut comb = r1.clone();
                comb.scale(2.0);
                comb.axpy(-3.0, &r2)?;
                let lhs = apply(&comb)?;
                let mut rhs = apply(&r1)?;
                rhs.scale(2.0);
                rhs.axpy(-3.0, &apply(&r2)?)?;
                let mut diff = lhs.clone();
                diff.axpy(-1.0, &rhs)?;
                let lin = diff.norm_inf()?[0] / lhs.norm_inf()?[0];
                let s12 = r1.dot(&apply(&r2)?)?[0];
                let s21 = r2.dot(&apply(&r1)?)?[0];
                res.push((lin, (s12 - s21).abs() / s12.abs().max(s21.abs())));
            }
            Ok(res)
        })
        .unwrap();
        for (k, &(lin, sym)) in out[0].iter().enumerate() {
            assert!(lin < 1e-12, "config {k}: linearity {lin}");
            if symmetric[k] {
                assert!(sym < 1e-10, "config {k}: symmetry {sym}");
            }
        }
    }

    #[test]
    fn unknown_type_is_rejected() {
        let c = crate::Comm::serial();
        let a = poisson_2d(&c, 3);
        let p = ParameterList::new().with("smoother type", "vanka");
        assert!(matches!(
            build_smoother(a, &p),
            Err(Error::UnknownType { .. })
        ));
    }
}
