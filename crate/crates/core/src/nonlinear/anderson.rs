use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::MultiVector;
use crate::paramlist::ParameterList;

use super::status::{SolverState, Status, StatusTest};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AndersonConfig {
    /// Number of stored residual differences; zero gives damped fixed-point
    /// iteration.
    pub depth: usize,
    /// `β ∈ (0, 1]`.
    pub mixing: f64,
}

impl Default for AndersonConfig {
    fn default() -> Self {
        AndersonConfig {
            depth: 5,
            mixing: 1.0,
        }
    }
}

impl AndersonConfig {
    /// Keys: "anderson: depth", "anderson: mixing".
    pub fn from_params(p: &ParameterList) -> Result<AndersonConfig> {
        let d = AndersonConfig::default();
        let cfg = AndersonConfig {
            depth: p.get_count("anderson: depth", d.depth)?,
            mixing: p.get_real("anderson: mixing", d.mixing)?,
        };
        if !(cfg.mixing > 0.0 && cfg.mixing <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "anderson mixing {} must lie in (0, 1]",
                cfg.mixing
            )));
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug)]
pub struct AndersonResult {
    pub x: MultiVector,
    pub status: Status,
    pub stopped_by: Option<&'static str>,
    pub iterations: usize,
    /// `‖G(x_k) − x_k‖` for every iterate.
    pub f_norms: Vec<f64>,
}

/// Least-squares coefficients `argmin ‖f − Σ γ_j ΔF_j‖` by modified
/// Gram-Schmidt QR. Columns are dropped oldest first while the stored
/// differences are numerically dependent; returns the number of dropped
/// columns with the coefficients of the rest. Collective.
fn least_squares(df: &VecDeque<MultiVector>, f: &MultiVector) -> Result<(usize, Vec<f64>)> {
    'drop: for skip in 0..=df.len() {
        let cols: Vec<&MultiVector> = df.iter().skip(skip).collect();
        let m = cols.len();
        let mut q: Vec<MultiVector> = Vec::with_capacity(m);
        let mut r = vec![0.0; m * m];
        for (j, c) in cols.iter().enumerate() {
            let mut v = (*c).clone();
            let n0 = v.norm2()?[0];
            for (i, qi) in q.iter().enumerate() {
                let h = qi.dot(&v)?[0];
                r[i * m + j] = h;
                v.axpy(-h, qi)?;
            }
            let n = v.norm2()?[0];
            if n0 == 0.0 || n <= 1e-12 * n0 {
                continue 'drop;
            }
            r[j * m + j] = n;
            v.scale(1.0 / n);
            q.push(v);
        }
        let mut g: Vec<f64> = Vec::with_capacity(m);
        for qi in &q {
            g.push(qi.dot(f)?[0]);
        }
        for j in (0..m).rev() {
            let mut s = g[j];
            for k in j + 1..m {
                s -= r[j * m + k] * g[k];
            }
            g[j] = s / r[j * m + j];
        }
        return Ok((skip, g));
    }
    unreachable!("an empty column set always succeeds")
}

/// Anderson-accelerated fixed-point iteration for `x = G(x)`.
///
/// The tests see `F(x) = G(x) − x` and the last update. Collective.
pub fn anderson_solve<G>(
    g: G,
    x0: &MultiVector,
    cfg: &AndersonConfig,
    status: &StatusTest,
) -> Result<AndersonResult>
where
    G: Fn(&MultiVector) -> Result<MultiVector>,
{
    if !(cfg.mixing > 0.0 && cfg.mixing <= 1.0) {
        return Err(Error::InvalidArgument("anderson mixing must lie in (0, 1]".into()));
    }
    let beta = cfg.mixing;
    let mut x = x0.clone();
    let mut dx: Option<MultiVector> = None;
    let mut f_norms = Vec::new();
    let mut dfs: VecDeque<MultiVector> = VecDeque::new();
    let mut dxs: VecDeque<MultiVector> = VecDeque::new();
    let mut prev: Option<(MultiVector, MultiVector)> = None;

    for it in 0.. {
        let gx = g(&x)?;
        let mut f = gx.clone();
        f.axpy(-1.0, &x)?;
        f_norms.push(f.norm2()?[0]);
        let state = SolverState {
            iteration: it,
            f_norms: &f_norms,
            x: &x,
            dx: dx.as_ref(),
        };
        let (st, who) = status.check(&state)?;
        if st != Status::Unconverged {
            return Ok(AndersonResult {
                x,
                status: st,
                stopped_by: who,
                iterations: it,
                f_norms,
            });
        }
        if !f_norms[it].is_finite() {
            return Err(Error::NonFinite);
        }

        if let Some((xp, fp)) = prev.take() {
            if cfg.depth > 0 {
                let mut d_f = f.clone();
                d_f.axpy(-1.0, &fp)?;
                let mut d_x = x.clone();
                d_x.axpy(-1.0, &xp)?;
                dfs.push_back(d_f);
                dxs.push_back(d_x);
                if dfs.len() > cfg.depth {
                    dfs.pop_front();
                    dxs.pop_front();
                }
            }
        }

        // x⁺ = (1 − β) x + β G(x) − Σ γ_j (ΔX_j + β ΔF_j)
        let mut xn = x.clone();
        xn.update(beta, &gx, 1.0 - beta)?;
        if !dfs.is_empty() {
            let (skip, gamma) = least_squares(&dfs, &f)?;
            for _ in 0..skip {
                dfs.pop_front();
                dxs.pop_front();
            }
            for ((gj, d_x), d_f) in gamma.iter().zip(&dxs).zip(&dfs) {
                xn.axpy(-gj, d_x)?;
                xn.axpy(-gj * beta, d_f)?;
            }
        }
        let mut step = xn.clone();
        step.axpy(-1.0, &x)?;
        prev = Some((x, f));
        x = xn;
        dx = Some(step);
    }
    unreachable!()
}
