use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::comm::Comm;
use crate::error::{Error, Result};

/// Global index type.
pub type Gid = u64;
/// Local index type, dense `0..local_len` within a rank.
pub type Lid = u32;

enum Lookup {
    /// Owned gids are `start..start + len`.
    Range(Gid),
    Table(HashMap<Gid, Lid>),
}

/// Owner lookup for a one-to-one map, replicated on every rank.
enum Directory {
    /// `starts[r]..starts[r + 1]` is owned by rank `r`.
    Ranges(Vec<Gid>),
    Table(HashMap<Gid, u32>),
}

struct Inner {
    global_len: u64,
    gids: Vec<Gid>,
    lookup: Lookup,
    comm: Comm,
    directory: Option<Directory>,
}

/// Assignment of global indices to ranks.
///
/// A one-to-one map partitions `0..global_len` among the ranks and carries
/// a replicated ownership directory. Overlapping maps (column maps, Schwarz
/// subdomains) may repeat indices across ranks and have no directory.
#[derive(Clone)]
pub struct Map(Arc<Inner>);

impl fmt::Debug for Map {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Map")
            .field("rank", &self.0.comm.rank())
            .field("global_len", &self.0.global_len)
            .field("local_len", &self.0.gids.len())
            .field("one_to_one", &self.is_one_to_one())
            .finish()
    }
}

fn block_start(n: u64, p: u64, r: u64) -> u64 {
    let base = n / p;
    let extra = n % p;
    r * base + r.min(extra)
}

fn build_lookup(gids: &[Gid]) -> Result<Lookup> {
    let consecutive = gids.windows(2).all(|w| w[1] == w[0] + 1);
    if consecutive {
        return Ok(Lookup::Range(gids.first().copied().unwrap_or(0)));
    }
    let mut table = HashMap::with_capacity(gids.len());
    for (i, &g) in gids.iter().enumerate() {
        if table.insert(g, i as Lid).is_some() {
            return Err(Error::NotOneToOne(format!(
                "global index {g} listed twice on one rank"
            )));
        }
    }
    Ok(Lookup::Table(table))
}

impl Map {
    /// Contiguous block distribution: rank `r` owns `floor(N/P)` indices
    /// plus one more for the first `N mod P` ranks. Not collective.
    pub fn contiguous(global_len: u64, comm: &Comm) -> Map {
        let p = comm.size() as u64;
        let r = comm.rank() as u64;
        let lo = block_start(global_len, p, r);
        let hi = block_start(global_len, p, r + 1);
        let starts = (0..=p).map(|q| block_start(global_len, p, q)).collect();
        Map(Arc::new(Inner {
            global_len,
            gids: (lo..hi).collect(),
            lookup: Lookup::Range(lo),
            comm: comm.clone(),
            directory: Some(Directory::Ranges(starts)),
        }))
    }

    /// One-to-one map from each rank's owned indices. Collective: gathers
    /// the ownership table and checks that the owned sets partition
    /// `0..N`, where `N` is the total owned count.
    pub fn from_owned(gids: Vec<Gid>, comm: &Comm) -> Result<Map> {
        let lookup = build_lookup(&gids)?;
        let all = comm.all_gather_u64s(&gids)?;
        let global_len: u64 = all.iter().map(|v| v.len() as u64).sum();

        let mut next = 0u64;
        let ranges = all.iter().all(|v| {
            let ok = v.iter().enumerate().all(|(i, &g)| g == next + i as u64);
            next += v.len() as u64;
            ok
        });
        let directory = if ranges {
            let mut starts = vec![0u64];
            for v in &all {
                starts.push(starts.last().unwrap() + v.len() as u64);
            }
            Directory::Ranges(starts)
        } else {
            let mut table = HashMap::with_capacity(global_len as usize);
            for (r, v) in all.iter().enumerate() {
                for &g in v {
                    if g >= global_len {
                        return Err(Error::NotOneToOne(format!(
                            "index {g} outside 0..{global_len}"
                        )));
                    }
                    if table.insert(g, r as u32).is_some() {
                        return Err(Error::NotOneToOne(format!(
                            "index {g} owned by more than one rank"
                        )));
                    }
                }
            }
            Directory::Table(table)
        };
        Ok(Map(Arc::new(Inner {
            global_len,
            gids,
            lookup,
            comm: comm.clone(),
            directory: Some(directory),
        })))
    }

    /// Map where ranks may share indices. Local only; no directory.
    pub fn overlapping(global_len: u64, gids: Vec<Gid>, comm: &Comm) -> Result<Map> {
        if let Some(&g) = gids.iter().find(|&&g| g >= global_len) {
            return Err(Error::IndexNotFound(g));
        }
        let lookup = build_lookup(&gids)?;
        Ok(Map(Arc::new(Inner {
            global_len,
            gids,
            lookup,
            comm: comm.clone(),
            directory: None,
        })))
    }

    pub fn comm(&self) -> &Comm {
        &self.0.comm
    }

    pub fn global_len(&self) -> u64 {
        self.0.global_len
    }

    pub fn local_len(&self) -> usize {
        self.0.gids.len()
    }

    pub fn gids(&self) -> &[Gid] {
        &self.0.gids
    }

    pub fn gid(&self, lid: usize) -> Gid {
        self.0.gids[lid]
    }

    pub fn lid(&self, gid: Gid) -> Option<Lid> {
        match &self.0.lookup {
            Lookup::Range(start) => {
                let off = gid.checked_sub(*start)?;
                (off < self.0.gids.len() as u64).then_some(off as Lid)
            }
            Lookup::Table(t) => t.get(&gid).copied(),
        }
    }

    pub fn is_one_to_one(&self) -> bool {
        self.0.directory.is_some()
    }

    /// Owning rank of each gid, from the replicated directory.
    pub fn owners(&self, gids: &[Gid]) -> Result<Vec<usize>> {
        let dir = self.0.directory.as_ref().ok_or_else(|| {
            Error::NotOneToOne("owner lookup requires a one-to-one map".into())
        })?;
        gids.iter()
            .map(|&g| match dir {
                Directory::Ranges(starts) => {
                    if g >= *starts.last().unwrap() {
                        return Err(Error::IndexNotFound(g));
                    }
                    // last r with starts[r] <= g
                    Ok(starts.partition_point(|&s| s <= g) - 1)
                }
                Directory::Table(t) => {
                    t.get(&g).map(|&r| r as usize).ok_or(Error::IndexNotFound(g))
                }
            })
            .collect()
    }

    /// Local comparison: same handle, or same global size and local gids.
    pub fn same_as(&self, other: &Map) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.global_len == other.0.global_len
                && self.0.gids == other.0.gids
                && self.is_one_to_one() == other.is_one_to_one())
    }

    pub(crate) fn require_same(&self, other: &Map, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::MapMismatch(what.to_string()))
        }
    }
}
