use std::sync::Arc;

use crate::comm::Comm;
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Gid, Map, MultiVector};

/// A linear system with its node coordinates.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub a: Arc<CsrMatrix>,
    pub b: MultiVector,
    pub exact: Option<MultiVector>,
    /// Coordinates of the owned nodes, in row-map order.
    pub coords: Vec<[f64; 2]>,
    pub tag: String,
}

impl ProblemInstance {
    /// `‖A x_exact − b‖ / ‖b‖`, or `None` without an exact solution.
    /// Collective.
    pub fn exact_residual(&self) -> Result<Option<f64>> {
        let Some(x) = &self.exact else {
            return Ok(None);
        };
        let mut r = self.b.clone();
        self.a.apply(x, &mut r, -1.0, 1.0)?;
        let nb = self.b.norm2()?[0];
        let nr = r.norm2()?[0];
        Ok(Some(if nb == 0.0 { nr } else { nr / nb }))
    }
}

fn grid_coords(map: &Map, nx: u64, ny: u64) -> Vec<[f64; 2]> {
    let (hx, hy) = (1.0 / (nx + 1) as f64, 1.0 / (ny + 1) as f64);
    map.gids()
        .iter()
        .map(|&g| [((g % nx) + 1) as f64 * hx, ((g / nx) + 1) as f64 * hy])
        .collect()
}

fn check_grid(nx: u64, ny: u64, map: &Map) -> Result<()> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid needs at least 2x2 unknowns, got {nx}x{ny}"
        )));
    }
    if map.global_len() != nx * ny {
        return Err(Error::LengthMismatch {
            expected: (nx * ny) as usize,
            found: map.global_len() as usize,
        });
    }
    Ok(())
}

fn finish(a: CsrMatrix, coords: Vec<[f64; 2]>, tag: String) -> Result<ProblemInstance> {
    let ones = MultiVector::constant(a.row_map(), 1, 1.0);
    let b = a.mul_vec(&ones)?;
    Ok(ProblemInstance {
        a: Arc::new(a),
        b,
        exact: Some(ones),
        coords,
        tag,
    })
}

/// 5-point Laplacian on the interior of an `(nx+2) x (ny+2)` grid with
/// Dirichlet boundary values eliminated, unknown `(i, j)` numbered
/// `j·nx + i`. The right-hand side is `A·1`.
pub fn gen_poisson_2d_on(nx: u64, ny: u64, map: &Map) -> Result<ProblemInstance> {
    gen_convection_diffusion_2d_on(nx, ny, (0.0, 0.0), 1.0, map)
        .map(|p| ProblemInstance {
            tag: format!("poisson2d_{nx}x{ny}"),
            ..p
        })
}

/// [`gen_poisson_2d_on`] with the contiguous row distribution.
pub fn gen_poisson_2d(nx: u64, ny: u64, comm: &Comm) -> Result<ProblemInstance> {
    gen_poisson_2d_on(nx, ny, &Map::contiguous(nx * ny, comm))
}

/// `ε` times the 5-point Laplacian plus first-order upwind convection with
/// velocity `(vx, vy)`, both scaled by `h²`.
pub fn gen_convection_diffusion_2d_on(
    nx: u64,
    ny: u64,
    velocity: (f64, f64),
    eps: f64,
    map: &Map,
) -> Result<ProblemInstance> {
    check_grid(nx, ny, map)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("diffusion {eps} must be positive")));
    }
    let (vx, vy) = velocity;
    let (hx, hy) = (1.0 / (nx + 1) as f64, 1.0 / (ny + 1) as f64);
    let rows = map
        .gids()
        .iter()
        .map(|&g| {
            let (i, j) = (g % nx, g / nx);
            let mut diag = 4.0 * eps;
            let mut row: Vec<(Gid, f64)> = Vec::with_capacity(5);
            // (west, east) and (south, north) couplings
            let cx = (-eps - hx * vx.max(0.0), -eps + hx * vx.min(0.0));
            let cy = (-eps - hy * vy.max(0.0), -eps + hy * vy.min(0.0));
            diag += hx * vx.abs() + hy * vy.abs();
            if j > 0 {
                row.push((g - nx, cy.0));
            }
            if i > 0 {
                row.push((g - 1, cx.0));
            }
            row.push((g, diag));
            if i + 1 < nx {
                row.push((g + 1, cx.1));
            }
            if j + 1 < ny {
                row.push((g + nx, cy.1));
            }
            row
        })
        .collect();
    let a = CsrMatrix::from_rows(map, map, rows)?;
    let coords = grid_coords(map, nx, ny);
    finish(a, coords, format!("convdiff2d_{nx}x{ny}"))
}

pub fn gen_convection_diffusion_2d(
    nx: u64,
    ny: u64,
    velocity: (f64, f64),
    eps: f64,
    comm: &Comm,
) -> Result<ProblemInstance> {
    gen_convection_diffusion_2d_on(nx, ny, velocity, eps, &Map::contiguous(nx * ny, comm))
}

/// Tridiagonal `[-1, 2, -1]` with Dirichlet ends; right-hand side `A·1`.
pub fn gen_poisson_1d_on(n: u64, map: &Map) -> Result<ProblemInstance> {
    if n < 2 || map.global_len() != n {
        return Err(Error::InvalidArgument(format!(
            "1D problem needs n >= 2 matching the map, got {n}"
        )));
    }
    let h = 1.0 / (n + 1) as f64;
    let rows = map
        .gids()
        .iter()
        .map(|&g| {
            let mut r = vec![(g, 2.0)];
            if g > 0 {
                r.push((g - 1, -1.0));
            }
            if g + 1 < n {
                r.push((g + 1, -1.0));
            }
            r
        })
        .collect();
    let a = CsrMatrix::from_rows(map, map, rows)?;
    let coords = map.gids().iter().map(|&g| [(g + 1) as f64 * h, 0.0]).collect();
    finish(a, coords, format!("poisson1d_{n}"))
}

pub fn gen_poisson_1d(n: u64, comm: &Comm) -> Result<ProblemInstance> {
    gen_poisson_1d_on(n, &Map::contiguous(n, comm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_grid() {
        let c = Comm::serial();
        let p = gen_poisson_2d(2, 2, &c).unwrap();
        let d = p.a.gather_dense().unwrap();
        for i in 0..4 {
            assert_eq!(d[i * 4 + i], 4.0);
            let off = (0..4).filter(|&j| j != i && d[i * 4 + j] != 0.0).count();
            assert_eq!(off, 2);
        }
        assert_eq!(p.b.col(0), [2.0; 4]);
    }

    #[test]
    fn interior_row_sums_vanish() {
        let c = Comm::serial();
        let p = gen_poisson_2d(5, 4, &c).unwrap();
        for (k, &g) in p.a.row_map().gids().iter().enumerate() {
            let (i, j) = (g % 5, g / 5);
            let interior = i > 0 && i < 4 && j > 0 && j < 3;
            let s = p.b.col(0)[k];
            assert_eq!(s == 0.0, interior);
            assert!(s >= 0.0);
        }
        assert!(p.exact_residual().unwrap().unwrap() <= 1e-13);
    }

    #[test]
    fn convection_diffusion_structure() {
        let c = Comm::serial();
        let cd = gen_convection_diffusion_2d(4, 3, (0.0, 0.0), 0.1, &c).unwrap();
        let po = gen_poisson_2d(4, 3, &c).unwrap();
        let a = cd.a.gather_dense().unwrap();
        let b = po.a.gather_dense().unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - 0.1 * v).abs() < 1e-15);
        }

        let cd = gen_convection_diffusion_2d(4, 3, (1.0, 0.0), 0.1, &c).unwrap();
        let a = cd.a.gather_dense().unwrap();
        let n = 12;
        let mut asym = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    assert!(a[i * n + j] <= 0.0);
                }
                asym += (a[i * n + j] - a[j * n + i]).powi(2);
            }
        }
        assert!(asym > 0.0);
    }
}
