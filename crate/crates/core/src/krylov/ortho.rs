use crate::comm::ReduceOp;
use crate::error::{Error, Result};
use crate::linalg::MultiVector;

/// Gram-Schmidt variant used to extend an orthonormal basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrthoKind {
    /// Classical Gram-Schmidt, always two passes.
    Icgs,
    /// Classical Gram-Schmidt with a second pass only when the first one
    /// cancels more than a factor `1/√2` of the norm.
    Dgks,
    /// Modified Gram-Schmidt, two sweeps.
    Imgs,
}

impl OrthoKind {
    pub fn parse(name: &str) -> Result<OrthoKind> {
        match name.to_ascii_lowercase().as_str() {
            "icgs" => Ok(OrthoKind::Icgs),
            "dgks" => Ok(OrthoKind::Dgks),
            "imgs" => Ok(OrthoKind::Imgs),
            _ => Err(Error::UnknownType {
                key: "orthogonalization".into(),
                value: name.into(),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OrthoKind::Icgs => "icgs",
            OrthoKind::Dgks => "dgks",
            OrthoKind::Imgs => "imgs",
        }
    }
}

const DGKS_KAPPA: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Global dots of `w` against every basis vector, in one reduction.
fn block_dot(basis: &[MultiVector], w: &MultiVector) -> Result<Vec<f64>> {
    let wl = w.col(0);
    let local: Vec<f64> = basis
        .iter()
        .map(|v| v.col(0).iter().zip(wl).map(|(a, b)| a * b).sum())
        .collect();
    if local.is_empty() {
        return Ok(local);
    }
    w.map().comm().all_reduce(&local, ReduceOp::Sum)
}

fn norm(w: &MultiVector) -> Result<f64> {
    Ok(w.norm2()?[0])
}

fn cgs_pass(basis: &[MultiVector], w: &mut MultiVector, h: &mut [f64]) -> Result<()> {
    let c = block_dot(basis, w)?;
    let wl = w.col_mut(0);
    for ((v, &cj), hj) in basis.iter().zip(&c).zip(h.iter_mut()) {
        for (wi, vi) in wl.iter_mut().zip(v.col(0)) {
            *wi -= cj * vi;
        }
        *hj += cj;
    }
    Ok(())
}

fn mgs_pass(basis: &[MultiVector], w: &mut MultiVector, h: &mut [f64]) -> Result<()> {
    for (v, hj) in basis.iter().zip(h.iter_mut()) {
        let c = v.dot(w)?[0];
        w.axpy(-c, v)?;
        *hj += c;
    }
    Ok(())
}

/// Project `w` against the orthonormal `basis` without normalizing.
/// Returns the coefficients, the remaining norm and the initial norm.
pub(crate) fn project(
    basis: &[MultiVector],
    w: &mut MultiVector,
    kind: OrthoKind,
) -> Result<(Vec<f64>, f64, f64)> {
    let norm0 = norm(w)?;
    let mut h = vec![0.0; basis.len()];
    if basis.is_empty() {
        return Ok((h, norm0, norm0));
    }
    let beta = match kind {
        OrthoKind::Icgs => {
            cgs_pass(basis, w, &mut h)?;
            cgs_pass(basis, w, &mut h)?;
            norm(w)?
        }
        OrthoKind::Dgks => {
            cgs_pass(basis, w, &mut h)?;
            let n1 = norm(w)?;
            if n1 < DGKS_KAPPA * norm0 {
                cgs_pass(basis, w, &mut h)?;
                norm(w)?
            } else {
                n1
            }
        }
        OrthoKind::Imgs => {
            mgs_pass(basis, w, &mut h)?;
            mgs_pass(basis, w, &mut h)?;
            norm(w)?
        }
    };
    Ok((h, beta, norm0))
}

/// Orthogonalize `w` against the orthonormal `basis` and normalize it.
/// Returns the expansion coefficients and the norm before normalization.
/// Fails with [`Error::LinearDependence`] when `w` lies in the span of the
/// basis up to a relative `1e-14`.
pub fn orthonormalize(
    basis: &[MultiVector],
    w: &mut MultiVector,
    kind: OrthoKind,
) -> Result<(Vec<f64>, f64)> {
    let (h, beta, norm0) = project(basis, w, kind)?;
    if beta <= 1e-14 * norm0 || norm0 == 0.0 {
        return Err(Error::LinearDependence);
    }
    w.scale(1.0 / beta);
    Ok((h, beta))
}
