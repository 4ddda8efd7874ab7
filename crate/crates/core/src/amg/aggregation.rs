use crate::linalg::CsrMatrix;

/// Rank-local aggregates of the owned rows of a matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Aggregates {
    /// Owned row → local aggregate id.
    pub aggregate_of: Vec<usize>,
    /// Root row of each aggregate.
    pub roots: Vec<usize>,
}

impl Aggregates {
    pub fn count(&self) -> usize {
        self.roots.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.count()];
        for &a in &self.aggregate_of {
            s[a] += 1;
        }
        s
    }

    /// Owned rows of each aggregate, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.count()];
        for (i, &a) in self.aggregate_of.iter().enumerate() {
            m[a].push(i);
        }
        m
    }
}

/// Strong neighbors of each owned row among the owned rows: entry `(i, j)`
/// survives if `|a_ij| > θ·sqrt(|a_ii a_jj|)`. Couplings to other ranks are
/// ignored.
pub fn filtered_graph(a: &CsrMatrix, theta: f64) -> Vec<Vec<usize>> {
    let n = a.local_rows();
    let diag = a.diagonal();
    let d = diag.col(0);
    (0..n)
        .map(|i| {
            let (cols, vals) = a.row(i);
            cols.iter()
                .zip(vals)
                .filter_map(|(&c, &v)| {
                    let j = c as usize;
                    (j < n && j != i && v.abs() > theta * (d[i] * d[j]).abs().sqrt()).then_some(j)
                })
                .collect()
        })
        .collect()
}

/// Greedy aggregation in three phases, sweeping owned rows in order.
///
/// 1. An unaggregated row with at least one unaggregated strong neighbor
///    becomes a root and absorbs all its unaggregated neighbors.
/// 2. Each remaining row joins the adjacent aggregate it has the most
///    strong connections to, the lowest id on ties.
/// 3. Rows without aggregated neighbors become singletons.
pub fn aggregate(a: &CsrMatrix, theta: f64) -> Aggregates {
    const NONE: usize = usize::MAX;
    let g = filtered_graph(a, theta);
    let n = g.len();
    let mut agg = vec![NONE; n];
    let mut roots = Vec::new();

    for i in 0..n {
        if agg[i] != NONE || !g[i].iter().any(|&j| agg[j] == NONE) {
            continue;
        }
        let id = roots.len();
        roots.push(i);
        agg[i] = id;
        for &j in &g[i] {
            if agg[j] == NONE {
                agg[j] = id;
            }
        }
    }

    let phase1 = agg.clone();
    for i in 0..n {
        if agg[i] != NONE {
            continue;
        }
        let mut counts: Vec<(usize, usize)> = Vec::new();
        for &j in &g[i] {
            let a = phase1[j];
            if a == NONE {
                continue;
            }
            match counts.iter_mut().find(|(id, _)| *id == a) {
                Some((_, c)) => *c += 1,
                None => counts.push((a, 1)),
            }
        }
        // most connections, then lowest id
        if let Some(&(best, _)) = counts
            .iter()
            .max_by(|x, y| x.1.cmp(&y.1).then(y.0.cmp(&x.0)))
        {
            agg[i] = best;
        }
    }

    for i in 0..n {
        if agg[i] == NONE {
            agg[i] = roots.len();
            roots.push(i);
        }
    }
    Aggregates {
        aggregate_of: agg,
        roots,
    }
}
