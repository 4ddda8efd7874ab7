use crate::comm::Comm;
use crate::error::{Error, Result};
use crate::linalg::{Gid, Map};

/// Recursive coordinate bisection of `coords` into `nparts` parts.
///
/// Each step splits along the axis of largest extent (lowest axis on ties)
/// at the median, breaking coordinate ties by index. Part sizes differ by
/// at most one.
pub fn rcb_partition(coords: &[[f64; 2]], nparts: usize) -> Result<Vec<usize>> {
    if nparts == 0 || !nparts.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "bisection needs a power-of-two part count, got {nparts}"
        )));
    }
    let mut part = vec![0; coords.len()];
    let mut ids: Vec<usize> = (0..coords.len()).collect();
    bisect(coords, &mut ids, 0, nparts, &mut part);
    Ok(part)
}

fn bisect(coords: &[[f64; 2]], ids: &mut [usize], first: usize, nparts: usize, part: &mut [usize]) {
    if nparts == 1 {
        for &i in ids.iter() {
            part[i] = first;
        }
        return;
    }
    let mut axis = 0;
    let mut best = f64::NEG_INFINITY;
    for d in 0..2 {
        let (lo, hi) = ids.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(coords[i][d]), hi.max(coords[i][d]))
        });
        let ext = if ids.is_empty() { 0.0 } else { hi - lo };
        if ext > best {
            best = ext;
            axis = d;
        }
    }
    ids.sort_by(|&a, &b| coords[a][axis].total_cmp(&coords[b][axis]).then(a.cmp(&b)));
    let mid = ids.len() / 2;
    let (left, right) = ids.split_at_mut(mid);
    bisect(coords, left, first, nparts / 2, part);
    bisect(coords, right, first + nparts / 2, nparts / 2, part);
}

/// One-to-one map giving rank `r` every index `g` with `part[g] == r`.
/// Collective.
pub fn partition_map(part: &[usize], comm: &Comm) -> Result<Map> {
    let me = comm.rank();
    let owned: Vec<Gid> = (0..part.len() as Gid).filter(|&g| part[g as usize] == me).collect();
    Map::from_owned(owned, comm)
}

/// Grid coordinates of unknown `(i, j) = (g mod nx, g / nx)`.
pub fn grid_points(nx: u64, ny: u64) -> Vec<[f64; 2]> {
    (0..nx * ny).map(|g| [(g % nx) as f64, (g / nx) as f64]).collect()
}
