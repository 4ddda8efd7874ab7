//! Communication plans between two maps and the pack/unpack contract that
//! distributed objects implement to move entries along them.

use crate::codec;
use crate::comm::TAG_INTERNAL_BASE;
use crate::error::{Error, Result};

use super::map::{Gid, Lid, Map};

const TAG_FORWARD: i64 = TAG_INTERNAL_BASE - 1;
const TAG_REVERSE: i64 = TAG_INTERNAL_BASE - 2;

/// How incoming entries combine with existing target entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombineMode {
    /// Overwrite. When several sources hit one entry, the highest source
    /// rank is applied last and wins.
    Insert,
    Add,
}

/// Serializes the entries at a set of local indices.
pub trait Pack {
    fn pack(&self, lids: &[Lid], buf: &mut Vec<u8>);
}

/// Receives entries produced by the matching [`Pack`] implementation.
pub trait Unpack {
    fn unpack(&mut self, lids: &[Lid], buf: &[u8], mode: CombineMode) -> Result<()>;
}

/// Precomputed exchange schedule from a one-to-one source map to a target
/// map.
///
/// Each target local index is classified exactly once: the leading run
/// whose gids match the source's local order (`same`), other locally owned
/// indices (`permute`), and indices owned by another rank (`remote`).
#[derive(Debug, Clone)]
pub struct ImportPlan {
    source: Map,
    target: Map,
    num_same: usize,
    permute_src: Vec<Lid>,
    permute_tgt: Vec<Lid>,
    /// Target lids filled from other ranks, grouped by ascending rank.
    remote_lids: Vec<Lid>,
    remote_segments: Vec<(usize, usize)>,
    /// Source lids sent to other ranks, grouped by ascending rank.
    export_lids: Vec<Lid>,
    export_segments: Vec<(usize, usize)>,
}

fn segments(ranks: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &r in ranks {
        match out.last_mut() {
            Some((last, n)) if *last == r => *n += 1,
            _ => out.push((r, 1)),
        }
    }
    out
}

impl ImportPlan {
    /// Collective. Fails if the target lists a gid absent from the source.
    pub fn build(source: &Map, target: &Map) -> Result<ImportPlan> {
        if !source.is_one_to_one() {
            return Err(Error::NotOneToOne("import source must be one-to-one".into()));
        }
        let comm = source.comm();
        let num_same = source
            .gids()
            .iter()
            .zip(target.gids())
            .take_while(|(a, b)| a == b)
            .count();
        let mut permute_src = Vec::new();
        let mut permute_tgt = Vec::new();
        let mut remote: Vec<(Lid, Gid)> = Vec::new();
        for (t, &g) in target.gids().iter().enumerate().skip(num_same) {
            match source.lid(g) {
                Some(s) => {
                    permute_src.push(s);
                    permute_tgt.push(t as Lid);
                }
                None => remote.push((t as Lid, g)),
            }
        }
        let remote_gids: Vec<Gid> = remote.iter().map(|r| r.1).collect();
        let owners = source.owners(&remote_gids);
        // every rank must reach the exchange below, even when lookup failed
        let (owners, lookup_err) = match owners {
            Ok(o) => (o, None),
            Err(e) => (Vec::new(), Some(e)),
        };
        let mut order: Vec<usize> = (0..owners.len()).collect();
        order.sort_by_key(|&i| (owners[i], remote[i].1));
        let remote_lids: Vec<Lid> = order.iter().map(|&i| remote[i].0).collect();
        let remote_ranks: Vec<usize> = order.iter().map(|&i| owners[i]).collect();
        let remote_segments = segments(&remote_ranks);

        let mut requests = vec![Vec::new(); comm.size()];
        let mut pos = 0;
        for &(r, n) in &remote_segments {
            let gids: Vec<Gid> = remote_lids[pos..pos + n]
                .iter()
                .map(|&t| target.gid(t as usize))
                .collect();
            requests[r] = codec::encode_u64s(&gids);
            pos += n;
        }
        let incoming = comm.all_to_all(requests)?;
        if let Some(e) = lookup_err {
            return Err(e);
        }
        let mut export_lids = Vec::new();
        let mut export_segments = Vec::new();
        for (r, bytes) in incoming.iter().enumerate() {
            if bytes.is_empty() {
                continue;
            }
            let gids = codec::decode_u64s(bytes);
            for g in &gids {
                let lid = source.lid(*g).ok_or(Error::IndexNotFound(*g))?;
                export_lids.push(lid);
            }
            if !gids.is_empty() {
                export_segments.push((r, gids.len()));
            }
        }
        Ok(ImportPlan {
            source: source.clone(),
            target: target.clone(),
            num_same,
            permute_src,
            permute_tgt,
            remote_lids,
            remote_segments,
            export_lids,
            export_segments,
        })
    }

    pub fn source(&self) -> &Map {
        &self.source
    }

    pub fn target(&self) -> &Map {
        &self.target
    }

    pub fn num_same(&self) -> usize {
        self.num_same
    }

    pub fn permutes(&self) -> impl Iterator<Item = (Lid, Lid)> + '_ {
        self.permute_src
            .iter()
            .copied()
            .zip(self.permute_tgt.iter().copied())
    }

    pub fn remote_lids(&self) -> &[Lid] {
        &self.remote_lids
    }

    pub fn export_lids(&self) -> &[Lid] {
        &self.export_lids
    }

    /// `(rank, count)` of entries received from each source rank.
    pub fn remote_segments(&self) -> &[(usize, usize)] {
        &self.remote_segments
    }

    /// `(rank, count)` of entries sent to each destination rank.
    pub fn export_segments(&self) -> &[(usize, usize)] {
        &self.export_segments
    }

    fn same_lids(&self) -> Vec<Lid> {
        (0..self.num_same as Lid).collect()
    }

    /// Move entries from `src` (laid out on the source map) into `tgt` (laid
    /// out on the target map). Collective.
    pub fn forward<S, T>(&self, src: &S, tgt: &mut T, mode: CombineMode) -> Result<()>
    where
        S: Pack + ?Sized,
        T: Unpack + ?Sized,
    {
        let comm = self.source.comm();
        let mut pos = 0;
        for &(r, n) in &self.export_segments {
            let mut buf = Vec::new();
            src.pack(&self.export_lids[pos..pos + n], &mut buf);
            comm.send(r, TAG_FORWARD, buf)?;
            pos += n;
        }
        let same = self.same_lids();
        let mut buf = Vec::new();
        src.pack(&same, &mut buf);
        tgt.unpack(&same, &buf, mode)?;
        buf.clear();
        src.pack(&self.permute_src, &mut buf);
        tgt.unpack(&self.permute_tgt, &buf, mode)?;

        let mut pos = 0;
        for &(r, n) in &self.remote_segments {
            let buf = comm.recv(r, TAG_FORWARD)?;
            tgt.unpack(&self.remote_lids[pos..pos + n], &buf, mode)?;
            pos += n;
        }
        Ok(())
    }

    /// Reverse (export) direction: entries of `src` laid out on the target
    /// map flow back to their owners in `tgt` on the source map.
    /// Contributions are applied in ascending source-rank order, with this
    /// rank's own entries at its rank position.
    pub fn reverse<S, T>(&self, src: &S, tgt: &mut T, mode: CombineMode) -> Result<()>
    where
        S: Pack + ?Sized,
        T: Unpack + ?Sized,
    {
        let comm = self.source.comm();
        let me = comm.rank();
        let mut pos = 0;
        for &(r, n) in &self.remote_segments {
            let mut buf = Vec::new();
            src.pack(&self.remote_lids[pos..pos + n], &mut buf);
            comm.send(r, TAG_REVERSE, buf)?;
            pos += n;
        }
        let mut local_done = false;
        let apply_local = |tgt: &mut T| -> Result<()> {
            let same = self.same_lids();
            let mut buf = Vec::new();
            src.pack(&same, &mut buf);
            tgt.unpack(&same, &buf, mode)?;
            buf.clear();
            src.pack(&self.permute_tgt, &mut buf);
            tgt.unpack(&self.permute_src, &buf, mode)
        };
        let mut pos = 0;
        for &(r, n) in &self.export_segments {
            if !local_done && r > me {
                apply_local(tgt)?;
                local_done = true;
            }
            let buf = comm.recv(r, TAG_REVERSE)?;
            tgt.unpack(&self.export_lids[pos..pos + n], &buf, mode)?;
            pos += n;
        }
        if !local_done {
            apply_local(tgt)?;
        }
        Ok(())
    }
}

/// Rows of a sparse matrix keyed by global column index, laid out on a map.
/// Used as the landing buffer for row transfers.
#[derive(Debug, Clone)]
pub struct RowSet {
    pub map: Map,
    pub rows: Vec<Vec<(Gid, f64)>>,
}

impl RowSet {
    pub fn new(map: &Map) -> RowSet {
        RowSet {
            map: map.clone(),
            rows: vec![Vec::new(); map.local_len()],
        }
    }
}

pub(crate) fn pack_row(buf: &mut Vec<u8>, entries: impl ExactSizeIterator<Item = (Gid, f64)>) {
    codec::put_u64(buf, entries.len() as u64);
    for (g, v) in entries {
        codec::put_u64(buf, g);
        codec::put_f64(buf, v);
    }
}

/// Merge `incoming` into a sorted row by gid, summing coincident entries.
pub(crate) fn merge_add(row: &mut Vec<(Gid, f64)>, incoming: &[(Gid, f64)]) {
    row.extend_from_slice(incoming);
    normalize_row(row);
}

/// Sort by gid and sum duplicates. Zeros produced by cancellation stay.
pub(crate) fn normalize_row(row: &mut Vec<(Gid, f64)>) {
    row.sort_by_key(|e| e.0);
    let mut out: Vec<(Gid, f64)> = Vec::with_capacity(row.len());
    for &(g, v) in row.iter() {
        match out.last_mut() {
            Some(last) if last.0 == g => last.1 += v,
            _ => out.push((g, v)),
        }
    }
    *row = out;
}

impl Pack for RowSet {
    fn pack(&self, lids: &[Lid], buf: &mut Vec<u8>) {
        for &l in lids {
            pack_row(buf, self.rows[l as usize].iter().copied());
        }
    }
}

impl Unpack for RowSet {
    fn unpack(&mut self, lids: &[Lid], buf: &[u8], mode: CombineMode) -> Result<()> {
        let mut rd = codec::Reader::new(buf);
        for &l in lids {
            let n = rd.u64() as usize;
            let entries: Vec<(Gid, f64)> = (0..n).map(|_| (rd.u64(), rd.f64())).collect();
            let row = &mut self.rows[l as usize];
            match mode {
                CombineMode::Insert => {
                    *row = entries;
                    normalize_row(row);
                }
                CombineMode::Add => merge_add(row, &entries),
            }
        }
        Ok(())
    }
}
