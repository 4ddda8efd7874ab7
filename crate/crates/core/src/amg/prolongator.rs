use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Gid, Map, MultiVector};
use crate::smoothers::estimate_lambda_max;

use super::aggregation::Aggregates;

/// Contiguous coarse map with `local` indices on this rank, ranks in order.
/// Collective.
pub(crate) fn coarse_map(local: usize, fine: &Map) -> Result<Map> {
    let comm = fine.comm();
    let counts = comm.all_gather_u64s(&[local as u64])?;
    let start: u64 = counts[..comm.rank()].iter().map(|c| c[0]).sum();
    Map::from_owned((start..start + local as u64).collect(), comm)
}

/// Tentative prolongator from a per-aggregate thin QR of the nullspace.
///
/// Returns `P_tent` (fine rows × aggregates·k, orthonormal columns) and the
/// coarse nullspace holding the `R` factors. Collective.
pub fn tentative_prolongator(
    agg: &Aggregates,
    nullspace: &MultiVector,
) -> Result<(CsrMatrix, MultiVector)> {
    let fine = nullspace.map();
    let k = nullspace.ncols();
    if agg.aggregate_of.len() != fine.local_len() {
        return Err(Error::LengthMismatch {
            expected: fine.local_len(),
            found: agg.aggregate_of.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("nullspace needs at least one column".into()));
    }
    let cmap = coarse_map(agg.count() * k, fine)?;
    let base = cmap.gids().first().copied().unwrap_or(0);
    let mut rows: Vec<Vec<(Gid, f64)>> = vec![Vec::new(); fine.local_len()];
    let mut coarse_ns = vec![0.0; agg.count() * k * k];
    let nc = agg.count() * k;

    for (a, members) in agg.members().iter().enumerate() {
        let m = members.len();
        // q[c] = restricted nullspace column c, orthonormalized in place
        let mut q: Vec<Vec<f64>> = (0..k)
            .map(|c| members.iter().map(|&i| nullspace.col(c)[i]).collect())
            .collect();
        let mut r = vec![0.0; k * k];
        for c in 0..k {
            let norm0 = q[c].iter().map(|v| v * v).sum::<f64>().sqrt();
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for p in 0..c {
                    let h: f64 = (0..m).map(|t| q[p][t] * q[c][t]).sum();
                    r[p * k + c] += h;
                    for t in 0..m {
                        q[c][t] -= h * q[p][t];
                    }
                }
            }
            let norm = q[c].iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 1e-12 * norm0) || norm0 == 0.0 {
                return Err(Error::RankDeficient(format!(
                    "nullspace restricted to aggregate rooted at row {} has rank below {k}",
                    fine.gid(agg.roots[a])
                )));
            }
            r[c * k + c] = norm;
            q[c].iter_mut().for_each(|v| *v /= norm);
        }
        for (t, &i) in members.iter().enumerate() {
            for c in 0..k {
                rows[i].push((base + (a * k + c) as Gid, q[c][t]));
            }
        }
        for p in 0..k {
            for c in 0..k {
                coarse_ns[c * nc + a * k + p] = r[p * k + c];
            }
        }
    }
    let p = CsrMatrix::from_rows(fine, &cmap, rows)?;
    let ns = MultiVector::from_local(&cmap, k, coarse_ns)?;
    Ok((p, ns))
}

/// `P = (I − ω D⁻¹A) P_tent`; `ω = 0` returns `P_tent` unchanged.
/// Collective.
pub fn smooth_prolongator(a: &CsrMatrix, p_tent: &CsrMatrix, omega: f64) -> Result<CsrMatrix> {
    if omega == 0.0 {
        return Ok(p_tent.clone());
    }
    let inv_diag = crate::smoothers::inverse_diagonal(a)?;
    let mut ap = a.multiply(p_tent)?;
    ap.scale_rows(&inv_diag);
    CsrMatrix::add(p_tent, &ap, 1.0, -omega)
}

/// `ω = damping / λmax(D⁻¹A)` from ten power iterations. Collective.
pub fn prolongator_omega(a: &CsrMatrix, damping: f64) -> Result<f64> {
    if damping == 0.0 {
        return Ok(0.0);
    }
    let lambda = estimate_lambda_max(a, 10, 1.0)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "λmax(D⁻¹A) estimate {lambda} is not positive"
        )));
    }
    Ok(damping / lambda)
}

#[cfg(test)]
mod tests {
    use super::super::aggregation::aggregate;
    use super::*;
    use crate::comm::Comm;

    fn tridiag(c: &Comm, n: u64) -> CsrMatrix {
        let m = Map::contiguous(n, c);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(&m, &m, &t).unwrap()
    }

    fn dense_of(p: &CsrMatrix) -> (usize, usize, Vec<f64>) {
        let n = p.row_map().global_len() as usize;
        let m = p.domain_map().global_len() as usize;
        (n, m, p.gather_dense().unwrap())
    }

    #[test]
    fn constant_nullspace_gives_normalized_indicators() {
        let c = Comm::serial();
        let a = tridiag(&c, 9);
        let agg = aggregate(&a, 0.0);
        let ones = MultiVector::constant(a.row_map(), 1, 1.0);
        let (p, ns) = tentative_prolongator(&agg, &ones).unwrap();
        let (n, m, d) = dense_of(&p);
        assert_eq!((n, m), (9, 4));
        assert!((d[0] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((d[8 * 4 + 3] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        // PᵀP = I
        for i in 0..m {
            for j in 0..m {
                let s: f64 = (0..n).map(|r| d[r * m + i] * d[r * m + j]).sum();
                assert!((s - (i == j) as u8 as f64).abs() < 1e-14);
            }
        }
        // P · R reproduces the fine nullspace
        let mut back = MultiVector::zeros(a.row_map(), 1);
        p.apply(&ns, &mut back, 1.0, 0.0).unwrap();
        for v in back.col(0) {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn size_four_and_singleton_entries() {
        let c = Comm::serial();
        let m = Map::contiguous(5, &c);
        let agg = Aggregates {
            aggregate_of: vec![0, 0, 0, 0, 1],
            roots: vec![0, 4],
        };
        let (p, _) = tentative_prolongator(&agg, &MultiVector::constant(&m, 1, 1.0)).unwrap();
        let (_, _, d) = dense_of(&p);
        assert_eq!(d, [0.5, 0.0, 0.5, 0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn rank_deficient_nullspace_is_rejected() {
        let c = Comm::serial();
        let m = Map::contiguous(4, &c);
        let agg = Aggregates {
            aggregate_of: vec![0, 0, 1, 1],
            roots: vec![0, 2],
        };
        // two identical columns
        let ns = MultiVector::constant(&m, 2, 1.0);
        assert!(matches!(
            tentative_prolongator(&agg, &ns),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn smoothing_cases() {
        let c = Comm::serial();
        let a = tridiag(&c, 9);
        let agg = aggregate(&a, 0.0);
        let ones = MultiVector::constant(a.row_map(), 1, 1.0);
        let (pt, _) = tentative_prolongator(&agg, &ones).unwrap();
        assert_eq!(dense_of(&smooth_prolongator(&a, &pt, 0.0).unwrap()), dense_of(&pt));

        // support grows by one graph step on each side of every aggregate
        let p = smooth_prolongator(&a, &pt, 2.0 / 3.0).unwrap();
        let (n, m, d) = dense_of(&p);
        let (_, _, dt) = dense_of(&pt);
        for col in 0..m {
            let supp = |x: &[f64]| -> Vec<usize> { (0..n).filter(|&r| x[r * m + col] != 0.0).collect() };
            let s0 = supp(&dt);
            let s1 = supp(&d);
            let lo = s0[0].saturating_sub(1);
            let hi = (s0[s0.len() - 1] + 1).min(n - 1);
            assert_eq!(s1, (lo..=hi).collect::<Vec<_>>());
        }

        // diagonal matrix: D⁻¹A = I
        let m9 = Map::contiguous(9, &c);
        let t: Vec<_> = (0..9).map(|i| (i, i, 4.0)).collect();
        let diag = CsrMatrix::from_triplets(&m9, &m9, &t).unwrap();
        let w = prolongator_omega(&diag, 4.0 / 3.0).unwrap();
        assert!((w - 4.0 / 3.0).abs() < 1e-14);
        let ps = smooth_prolongator(&diag, &pt, 0.25).unwrap();
        let (_, _, ds) = dense_of(&ps);
        for (u, v) in ds.iter().zip(&dt) {
            assert!((u - 0.75 * v).abs() < 1e-15);
        }
    }
}
