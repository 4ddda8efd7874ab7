use std::fmt::Write as _;
use std::path::Path;

use crate::codec;
use crate::comm::Comm;
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Gid, Map};

/// Sparse matrix in coordinate form, 0-based, symmetric storage expanded.
#[derive(Clone, Debug, PartialEq)]
pub struct Coordinate {
    pub nrows: u64,
    pub ncols: u64,
    pub entries: Vec<(Gid, Gid, f64)>,
}

fn mm_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::MatrixMarket(format!("line {line}: {msg}"))
}

/// Parse a `coordinate real|integer general|symmetric` Matrix Market text.
pub fn parse_matrix_market(text: &str) -> Result<Coordinate> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::MatrixMarket("empty file".into()))?;
    let h: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(mm_err(1, format!("malformed header {header:?}")));
    }
    if h[2] != "coordinate" {
        return Err(mm_err(1, format!("unsupported format {:?}", h[2])));
    }
    if h[3] != "real" && h[3] != "integer" {
        return Err(mm_err(1, format!("unsupported field {:?}", h[3])));
    }
    let symmetric = match h[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(mm_err(1, format!("unsupported symmetry {other:?}"))),
    };

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (sl, size) = body
        .next()
        .ok_or_else(|| Error::MatrixMarket("missing size line".into()))?;
    let dims: Vec<u64> = size
        .split_whitespace()
        .map(|t| t.parse::<u64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| mm_err(sl + 1, e))?;
    let [nrows, ncols, nnz] = dims[..] else {
        return Err(mm_err(sl + 1, "size line needs rows, columns and entries"));
    };
    if symmetric && nrows != ncols {
        return Err(mm_err(sl + 1, "symmetric matrix must be square"));
    }

    let mut entries = Vec::with_capacity(nnz as usize * (1 + symmetric as usize));
    let mut count = 0u64;
    for (ln, line) in body {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 3 {
            return Err(mm_err(ln + 1, "entry needs row, column and value"));
        }
        let i: u64 = t[0].parse().map_err(|e| mm_err(ln + 1, e))?;
        let j: u64 = t[1].parse().map_err(|e| mm_err(ln + 1, e))?;
        let v: f64 = t[2].parse().map_err(|e| mm_err(ln + 1, e))?;
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(mm_err(
                ln + 1,
                format!("index ({i}, {j}) outside {nrows}x{ncols}"),
            ));
        }
        entries.push((i - 1, j - 1, v));
        if symmetric && i != j {
            entries.push((j - 1, i - 1, v));
        }
        count += 1;
    }
    if count != nnz {
        return Err(Error::MatrixMarket(format!(
            "size line announces {nnz} entries, found {count}"
        )));
    }
    Ok(Coordinate {
        nrows,
        ncols,
        entries,
    })
}

/// `general` coordinate text, rows then columns ascending, values in
/// shortest round-trip form. Duplicates must already be summed.
pub fn format_matrix_market(c: &Coordinate) -> String {
    let mut e = c.entries.clone();
    e.sort_by_key(|&(i, j, _)| (i, j));
    let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", c.nrows, c.ncols, e.len());
    for (i, j, v) in e {
        let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
    }
    s
}

/// Read a square matrix file on rank 0 and distribute its rows with the
/// contiguous map. Duplicate entries are summed. Collective.
pub fn mm_read(path: impl AsRef<Path>, comm: &Comm) -> Result<CsrMatrix> {
    let payload = if comm.rank() == 0 {
        let parsed = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))
            .and_then(|t| parse_matrix_market(&t));
        let mut buf = Vec::new();
        match parsed {
            Ok(c) => {
                codec::put_u64(&mut buf, 0);
                codec::put_u64(&mut buf, c.nrows);
                codec::put_u64(&mut buf, c.ncols);
                let (mut ij, mut v) = (Vec::new(), Vec::new());
                for (i, j, x) in c.entries {
                    ij.extend([i, j]);
                    v.push(x);
                }
                codec::put_u64s(&mut buf, &ij);
                codec::put_f64s(&mut buf, &v);
            }
            Err(e) => {
                codec::put_u64(&mut buf, 1);
                codec::put_bytes(&mut buf, e.to_string().as_bytes());
            }
        }
        buf
    } else {
        Vec::new()
    };
    let buf = comm.broadcast(0, &payload)?;
    let mut rd = codec::Reader::new(&buf);
    if rd.u64() != 0 {
        let msg = String::from_utf8_lossy(rd.bytes()).into_owned();
        return Err(Error::MatrixMarket(msg));
    }
    let (nrows, ncols) = (rd.u64(), rd.u64());
    if nrows != ncols {
        return Err(Error::MatrixMarket(format!(
            "expected a square matrix, found {nrows}x{ncols}"
        )));
    }
    let ij = rd.u64s();
    let v = rd.f64s();
    let map = Map::contiguous(nrows, comm);
    let mut rows: Vec<Vec<(Gid, f64)>> = vec![Vec::new(); map.local_len()];
    for (k, &x) in v.iter().enumerate() {
        if let Some(l) = map.lid(ij[2 * k]) {
            rows[l as usize].push((ij[2 * k + 1], x));
        }
    }
    CsrMatrix::from_rows(&map, &map, rows)
}

/// Write `a` as a general coordinate file from rank 0. Collective.
pub fn mm_write(path: impl AsRef<Path>, a: &CsrMatrix) -> Result<()> {
    let entries = a.gather_triplets()?;
    let comm = a.row_map().comm();
    let status = if comm.rank() == 0 {
        let c = Coordinate {
            nrows: a.row_map().global_len(),
            ncols: a.domain_map().global_len(),
            entries,
        };
        match std::fs::write(path.as_ref(), format_matrix_market(&c)) {
            Ok(()) => Vec::new(),
            Err(e) => format!("{}: {e}", path.as_ref().display()).into_bytes(),
        }
    } else {
        Vec::new()
    };
    let status = comm.broadcast(0, &status)?;
    if status.is_empty() {
        Ok(())
    } else {
        Err(Error::Io(String::from_utf8_lossy(&status).into_owned()))
    }
}
