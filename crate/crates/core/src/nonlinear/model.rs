use crate::autodiff::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Gid, Map, MultiVector};

/// A nonlinear system `F(x) = 0` over a distributed vector.
///
/// Implementations must be stateless: equal inputs give equal outputs.
pub trait ModelEvaluator {
    fn map(&self) -> &Map;

    fn residual(&self, x: &MultiVector, f: &mut MultiVector) -> Result<()>;

    /// Assembled Jacobian, if the model provides one.
    fn jacobian(&self, _x: &MultiVector) -> Option<Result<CsrMatrix>> {
        None
    }

    /// Owned residual rows evaluated on the full state in global index
    /// order; enables AD Jacobians.
    fn residual_dual(&self, _x: &[Dual]) -> Option<Result<Vec<Dual>>> {
        None
    }
}

/// A small system written once for reals and duals.
pub trait SystemFn {
    fn dim(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>>;
}

/// Wraps a [`SystemFn`] as a model whose state is replicated for
/// evaluation and distributed by the contiguous map.
pub struct DenseModel<T> {
    pub sys: T,
    map: Map,
}

impl<T: SystemFn> DenseModel<T> {
    pub fn new(sys: T, comm: &crate::Comm) -> DenseModel<T> {
        let map = Map::contiguous(sys.dim() as u64, comm);
        DenseModel { sys, map }
    }

    fn owned<S: Clone>(&self, full: Vec<S>) -> Result<Vec<S>> {
        if full.len() != self.sys.dim() {
            return Err(Error::LengthMismatch {
                expected: self.sys.dim(),
                found: full.len(),
            });
        }
        Ok(self.map.gids().iter().map(|&g| full[g as usize].clone()).collect())
    }
}

impl<T: SystemFn> ModelEvaluator for DenseModel<T> {
    fn map(&self) -> &Map {
        &self.map
    }

    fn residual(&self, x: &MultiVector, f: &mut MultiVector) -> Result<()> {
        let full = x.gather_global()?.remove(0);
        let r = self.owned(self.sys.eval(&full)?)?;
        f.col_mut(0).copy_from_slice(&r);
        Ok(())
    }

    fn residual_dual(&self, x: &[Dual]) -> Option<Result<Vec<Dual>>> {
        Some(self.sys.eval(x).and_then(|r| self.owned(r)))
    }
}

fn full_state(x: &MultiVector) -> Result<Vec<f64>> {
    Ok(x.gather_global()?.remove(0))
}

/// Jacobian of a model from one dual evaluation with `N` seeds.
/// Collective.
pub fn ad_jacobian(model: &dyn ModelEvaluator, x: &MultiVector) -> Result<CsrMatrix> {
    let full = full_state(x)?;
    let seeded = crate::autodiff::seed(&full);
    let rows = model
        .residual_dual(&seeded)
        .ok_or_else(|| Error::InvalidArgument("model has no dual residual for AD".into()))??;
    let map = model.map();
    if rows.len() != map.local_len() {
        return Err(Error::LengthMismatch {
            expected: map.local_len(),
            found: rows.len(),
        });
    }
    let rows = rows
        .iter()
        .map(|r| {
            r.d.iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(j, &v)| (j as Gid, v))
                .collect()
        })
        .collect();
    CsrMatrix::from_rows(map, map, rows)
}

/// `J(x)·v` as a directional derivative with one dual component.
/// Collective.
pub fn ad_jvp(model: &dyn ModelEvaluator, x: &MultiVector, v: &MultiVector) -> Result<MultiVector> {
    let xf = full_state(x)?;
    let vf = full_state(v)?;
    let duals: Vec<Dual> = xf.iter().zip(&vf).map(|(&a, &b)| Dual::new(a, &[b])).collect();
    let rows = model
        .residual_dual(&duals)
        .ok_or_else(|| Error::InvalidArgument("model has no dual residual for AD".into()))??;
    let mut jv = MultiVector::zeros(model.map(), 1);
    for (o, r) in jv.col_mut(0).iter_mut().zip(&rows) {
        *o = r.deriv(0);
    }
    Ok(jv)
}

/// Forward-difference `J(x)·v ≈ (F(x + εv) − F(x)) / ε` with
/// `ε = sqrt(machine epsilon)·(1 + ‖x‖)/‖v‖`. Collective.
pub fn jfnk_apply(
    model: &dyn ModelEvaluator,
    x: &MultiVector,
    v: &MultiVector,
    f_at_x: &MultiVector,
) -> Result<MultiVector> {
    let nv = v.norm2()?[0];
    if nv == 0.0 {
        return Err(Error::InvalidArgument(
            "finite-difference direction must be nonzero".into(),
        ));
    }
    let nx = x.norm2()?[0];
    let eps = f64::EPSILON.sqrt() * (1.0 + nx) / nv;
    let mut xp = x.clone();
    xp.axpy(eps, v)?;
    let mut fp = MultiVector::zeros(model.map(), 1);
    model.residual(&xp, &mut fp)?;
    fp.axpy(-1.0, f_at_x)?;
    fp.scale(1.0 / eps);
    Ok(fp)
}
