//! Simulated message-passing ranks.
//!
//! [`launch`] runs one copy of a program per rank, each on its own thread,
//! sharing an in-memory transport. Ranks talk only through [`Comm`]: blocking
//! point-to-point [`Comm::send`]/[`Comm::recv`] plus collectives built on
//! top of them. Messages on a fixed `(source, destination, tag)` triple are
//! delivered in send order.
//!
//! Reductions gather to rank 0 and combine in rank order, so collective
//! results are bitwise reproducible for a fixed rank count.
//!
//! A rank that blocks in `recv` while every other rank is either finished
//! or blocked on an empty queue is deadlocked; the transport detects this
//! immediately and aborts all ranks with a diagnostic. A wall-clock timeout
//! (default 30 s, `TRELLIS_COMM_TIMEOUT_S`) backs up the exact check.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use crate::codec::{self, Reader};
use crate::error::{Error, Result};

/// Rank count used by the harness when `TRELLIS_RANKS` is unset.
pub const DEFAULT_RANKS: usize = 4;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

// Reserved tags for collectives; user tags must be non-negative.
const TAG_BARRIER: i64 = -1;
const TAG_BARRIER_RELEASE: i64 = -2;
const TAG_REDUCE: i64 = -3;
const TAG_REDUCE_RESULT: i64 = -4;
const TAG_GATHER: i64 = -5;
const TAG_GATHER_RESULT: i64 = -6;
const TAG_BCAST: i64 = -7;
const TAG_ALLTOALL: i64 = -8;
/// First tag available to crate-internal point-to-point protocols.
pub(crate) const TAG_INTERNAL_BASE: i64 = -100;

fn tag_name(tag: i64) -> String {
    match tag {
        TAG_BARRIER | TAG_BARRIER_RELEASE => "barrier".into(),
        TAG_REDUCE | TAG_REDUCE_RESULT => "all_reduce".into(),
        TAG_GATHER | TAG_GATHER_RESULT => "all_gather".into(),
        TAG_BCAST => "broadcast".into(),
        TAG_ALLTOALL => "all_to_all".into(),
        t if t <= TAG_INTERNAL_BASE => format!("internal exchange {t}"),
        t => format!("tag {t}"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Max,
    Min,
}

impl ReduceOp {
    fn combine(self, acc: &mut [f64], v: &[f64]) {
        for (a, &b) in acc.iter_mut().zip(v) {
            *a = match self {
                ReduceOp::Sum => *a + b,
                ReduceOp::Max => a.max(b),
                ReduceOp::Min => a.min(b),
            };
        }
    }
}

#[derive(Clone, Debug)]
pub struct LaunchOptions {
    pub timeout: Duration,
}

impl Default for LaunchOptions {
    fn default() -> Self {
        LaunchOptions {
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

impl LaunchOptions {
    /// Defaults overridden by `TRELLIS_COMM_TIMEOUT_S` when set.
    pub fn from_env() -> Self {
        let timeout = std::env::var("TRELLIS_COMM_TIMEOUT_S")
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|s| *s > 0.0)
            .map(Duration::from_secs_f64)
            .unwrap_or(DEFAULT_TIMEOUT);
        LaunchOptions { timeout }
    }
}

/// Rank count from `TRELLIS_RANKS`, or [`DEFAULT_RANKS`].
pub fn ranks_from_env() -> usize {
    std::env::var("TRELLIS_RANKS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&p| p >= 1)
        .unwrap_or(DEFAULT_RANKS)
}

#[derive(Default)]
struct State {
    queues: HashMap<(usize, usize, i64), VecDeque<Vec<u8>>>,
    waiting: Vec<Option<(usize, i64)>>,
    finished: Vec<bool>,
    abort: Option<(usize, String)>,
    first_error: Option<Error>,
}

struct Transport {
    size: usize,
    state: Mutex<State>,
    wake: Vec<Condvar>,
    timeout: Duration,
}

impl Transport {
    fn new(size: usize, timeout: Duration) -> Self {
        Transport {
            size,
            state: Mutex::new(State {
                waiting: vec![None; size],
                finished: vec![false; size],
                ..State::default()
            }),
            wake: (0..size).map(|_| Condvar::new()).collect(),
            timeout,
        }
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        // a panicking rank poisons nothing we rely on; keep going
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn wake_all(&self) {
        for cv in &self.wake {
            cv.notify_all();
        }
    }

    fn deadlocked(&self, st: &State) -> bool {
        (0..self.size).all(|q| {
            st.finished[q]
                || match st.waiting[q] {
                    Some((src, tag)) => st
                        .queues
                        .get(&(src, q, tag))
                        .is_none_or(|queue| queue.is_empty()),
                    None => false,
                }
        })
    }

    fn describe(&self, st: &State) -> String {
        let mut s = String::new();
        for q in 0..self.size {
            if q > 0 {
                s.push_str("; ");
            }
            if st.finished[q] {
                let _ = write!(s, "rank {q}: finished");
            } else if let Some((src, tag)) = st.waiting[q] {
                let _ = write!(
                    s,
                    "rank {q}: waiting on {} from rank {src}",
                    tag_name(tag)
                );
            } else {
                let _ = write!(s, "rank {q}: running");
            }
        }
        s
    }

    fn finish(&self, rank: usize, outcome: Option<&Error>) {
        let mut st = self.lock();
        st.finished[rank] = true;
        st.waiting[rank] = None;
        if let Some(err) = outcome {
            if st.first_error.is_none() {
                st.first_error = Some(err.clone());
            }
            if st.abort.is_none() {
                st.abort = Some((rank, err.to_string()));
            }
        }
        drop(st);
        self.wake_all();
    }
}

/// Per-rank communicator handle. Cloning yields another handle to the same
/// rank; handles must stay on the thread of their rank.
#[derive(Clone)]
pub struct Comm {
    rank: usize,
    size: usize,
    transport: Arc<Transport>,
}

impl std::fmt::Debug for Comm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Comm")
            .field("rank", &self.rank)
            .field("size", &self.size)
            .finish()
    }
}

/// Run `program` once per rank on `size` ranks and collect the results in
/// rank order. Uses [`LaunchOptions::from_env`].
pub fn launch<T, F>(size: usize, program: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Comm) -> Result<T> + Sync,
{
    launch_with(&LaunchOptions::from_env(), size, program)
}

pub fn launch_with<T, F>(opts: &LaunchOptions, size: usize, program: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Comm) -> Result<T> + Sync,
{
    if size == 0 {
        return Err(Error::InvalidArgument("rank count must be at least 1".into()));
    }
    let transport = Arc::new(Transport::new(size, opts.timeout));

    struct FinishGuard<'a> {
        transport: &'a Transport,
        rank: usize,
        done: bool,
    }
    impl Drop for FinishGuard<'_> {
        fn drop(&mut self) {
            if !self.done {
                self.transport
                    .finish(self.rank, Some(&Error::RankPanicked(self.rank)));
            }
        }
    }

    let outcomes: Vec<std::thread::Result<Result<T>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..size)
            .map(|rank| {
                let comm = Comm {
                    rank,
                    size,
                    transport: transport.clone(),
                };
                let program = &program;
                std::thread::Builder::new()
                    .name(format!("rank-{rank}"))
                    .stack_size(16 << 20)
                    .spawn_scoped(scope, move || {
                        let mut guard = FinishGuard {
                            transport: &comm.transport,
                            rank,
                            done: false,
                        };
                        let out = program(&comm);
                        guard.done = true;
                        comm.transport.finish(rank, out.as_ref().err());
                        out
                    })
                    .expect("failed to spawn rank thread")
            })
            .collect();
        handles.into_iter().map(|h| h.join()).collect()
    });

    let first = transport.lock().first_error.clone();
    if let Some(err) = first {
        return Err(err);
    }
    outcomes
        .into_iter()
        .enumerate()
        .map(|(rank, o)| match o {
            Ok(r) => r,
            Err(_) => Err(Error::RankPanicked(rank)),
        })
        .collect()
}

impl Comm {
    /// A standalone single-rank communicator for serial use outside
    /// [`launch`].
    pub fn serial() -> Comm {
        Comm {
            rank: 0,
            size: 1,
            transport: Arc::new(Transport::new(1, DEFAULT_TIMEOUT)),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Whether two handles belong to the same transport.
    pub fn same_transport(&self, other: &Comm) -> bool {
        Arc::ptr_eq(&self.transport, &other.transport)
    }

    fn check_rank(&self, r: usize) -> Result<()> {
        if r >= self.size {
            Err(Error::InvalidRank {
                rank: r,
                size: self.size,
            })
        } else {
            Ok(())
        }
    }

    /// Buffered send; never blocks. Self-sends are allowed.
    pub fn send(&self, dest: usize, tag: i64, payload: Vec<u8>) -> Result<()> {
        self.check_rank(dest)?;
        let mut st = self.transport.lock();
        if let Some((origin, reason)) = &st.abort {
            return Err(Error::Aborted {
                rank: *origin,
                reason: reason.clone(),
            });
        }
        st.queues
            .entry((self.rank, dest, tag))
            .or_default()
            .push_back(payload);
        drop(st);
        self.transport.wake[dest].notify_all();
        Ok(())
    }

    /// Blocking receive of the next message from `source` with `tag`.
    pub fn recv(&self, source: usize, tag: i64) -> Result<Vec<u8>> {
        self.check_rank(source)?;
        let t = &*self.transport;
        let start = Instant::now();
        let mut st = t.lock();
        let key = (source, self.rank, tag);
        loop {
            if let Some((origin, reason)) = &st.abort {
                let err = Error::Aborted {
                    rank: *origin,
                    reason: reason.clone(),
                };
                st.waiting[self.rank] = None;
                return Err(err);
            }
            if let Some(msg) = st.queues.get_mut(&key).and_then(|q| q.pop_front()) {
                st.waiting[self.rank] = None;
                return Ok(msg);
            }
            st.waiting[self.rank] = Some((source, tag));
            if t.deadlocked(&st) {
                let diag = t.describe(&st);
                st.abort = Some((self.rank, format!("deadlock: {diag}")));
                st.first_error.get_or_insert(Error::Deadlock(diag.clone()));
                st.waiting[self.rank] = None;
                drop(st);
                t.wake_all();
                return Err(Error::Deadlock(diag));
            }
            let elapsed = start.elapsed();
            if elapsed >= t.timeout {
                let diag = format!(
                    "no message after {:.1} s; {}",
                    t.timeout.as_secs_f64(),
                    t.describe(&st)
                );
                st.abort = Some((self.rank, format!("deadlock: {diag}")));
                st.first_error.get_or_insert(Error::Deadlock(diag.clone()));
                st.waiting[self.rank] = None;
                drop(st);
                t.wake_all();
                return Err(Error::Deadlock(diag));
            }
            st = t.wake[self.rank]
                .wait_timeout(st, t.timeout - elapsed)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }

    pub fn barrier(&self) -> Result<()> {
        if self.rank == 0 {
            for r in 1..self.size {
                self.recv(r, TAG_BARRIER)?;
            }
            for r in 1..self.size {
                self.send(r, TAG_BARRIER_RELEASE, Vec::new())?;
            }
        } else {
            self.send(0, TAG_BARRIER, Vec::new())?;
            self.recv(0, TAG_BARRIER_RELEASE)?;
        }
        Ok(())
    }

    /// Elementwise reduction, combined on rank 0 in rank order.
    pub fn all_reduce(&self, local: &[f64], op: ReduceOp) -> Result<Vec<f64>> {
        if self.size == 1 {
            return Ok(local.to_vec());
        }
        if self.rank == 0 {
            let mut acc = local.to_vec();
            let mut mismatch = None;
            for r in 1..self.size {
                let v = codec::decode_f64s(&self.recv(r, TAG_REDUCE)?);
                if v.len() != acc.len() {
                    mismatch.get_or_insert(v.len());
                    continue;
                }
                op.combine(&mut acc, &v);
            }
            if let Some(found) = mismatch {
                return Err(Error::LengthMismatch {
                    expected: acc.len(),
                    found,
                });
            }
            let bytes = codec::encode_f64s(&acc);
            for r in 1..self.size {
                self.send(r, TAG_REDUCE_RESULT, bytes.clone())?;
            }
            Ok(acc)
        } else {
            self.send(0, TAG_REDUCE, codec::encode_f64s(local))?;
            let out = codec::decode_f64s(&self.recv(0, TAG_REDUCE_RESULT)?);
            if out.len() != local.len() {
                return Err(Error::LengthMismatch {
                    expected: local.len(),
                    found: out.len(),
                });
            }
            Ok(out)
        }
    }

    pub fn all_reduce_scalar(&self, v: f64, op: ReduceOp) -> Result<f64> {
        Ok(self.all_reduce(&[v], op)?[0])
    }

    /// Every rank receives every rank's payload, indexed by rank.
    pub fn all_gather(&self, local: &[u8]) -> Result<Vec<Vec<u8>>> {
        if self.size == 1 {
            return Ok(vec![local.to_vec()]);
        }
        if self.rank == 0 {
            let mut parts = vec![local.to_vec()];
            for r in 1..self.size {
                parts.push(self.recv(r, TAG_GATHER)?);
            }
            let mut buf = Vec::new();
            for p in &parts {
                codec::put_bytes(&mut buf, p);
            }
            for r in 1..self.size {
                self.send(r, TAG_GATHER_RESULT, buf.clone())?;
            }
            Ok(parts)
        } else {
            self.send(0, TAG_GATHER, local.to_vec())?;
            let buf = self.recv(0, TAG_GATHER_RESULT)?;
            let mut rd = Reader::new(&buf);
            Ok((0..self.size).map(|_| rd.bytes().to_vec()).collect())
        }
    }

    pub fn all_gather_u64s(&self, local: &[u64]) -> Result<Vec<Vec<u64>>> {
        Ok(self
            .all_gather(&codec::encode_u64s(local))?
            .iter()
            .map(|b| codec::decode_u64s(b))
            .collect())
    }

    /// `payload` is significant on `root` only; every rank returns root's.
    pub fn broadcast(&self, root: usize, payload: &[u8]) -> Result<Vec<u8>> {
        self.check_rank(root)?;
        if self.rank == root {
            for r in (0..self.size).filter(|&r| r != root) {
                self.send(r, TAG_BCAST, payload.to_vec())?;
            }
            Ok(payload.to_vec())
        } else {
            self.recv(root, TAG_BCAST)
        }
    }

    /// Personalized exchange: `outgoing[r]` goes to rank `r`; the result
    /// holds what each rank sent here.
    pub fn all_to_all(&self, mut outgoing: Vec<Vec<u8>>) -> Result<Vec<Vec<u8>>> {
        if outgoing.len() != self.size {
            return Err(Error::LengthMismatch {
                expected: self.size,
                found: outgoing.len(),
            });
        }
        let own = std::mem::take(&mut outgoing[self.rank]);
        for (r, msg) in outgoing.into_iter().enumerate() {
            if r != self.rank {
                self.send(r, TAG_ALLTOALL, msg)?;
            }
        }
        let mut incoming = Vec::with_capacity(self.size);
        for r in 0..self.size {
            if r == self.rank {
                incoming.push(Vec::new());
            } else {
                incoming.push(self.recv(r, TAG_ALLTOALL)?);
            }
        }
        incoming[self.rank] = own;
        Ok(incoming)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> LaunchOptions {
        LaunchOptions {
            timeout: Duration::from_secs(5),
        }
    }

    #[test]
    fn launch_returns_ranks_in_order() {
        assert_eq!(launch_with(&quick(), 1, |c| Ok(c.rank())).unwrap(), [0]);
        assert_eq!(
            launch_with(&quick(), 4, |c| Ok(c.rank())).unwrap(),
            [0, 1, 2, 3]
        );
        assert!(launch_with(&quick(), 0, |c| Ok(c.rank())).is_err());
    }

    #[test]
    fn point_to_point_is_fifo() {
        let out = launch_with(&quick(), 2, |c| {
            if c.rank() == 0 {
                c.send(1, 7, vec![1, 2, 3])?;
                c.send(1, 7, vec![4])?;
                Ok(vec![])
            } else {
                let a = c.recv(0, 7)?;
                let b = c.recv(0, 7)?;
                Ok([a, b].concat())
            }
        })
        .unwrap();
        assert_eq!(out[1], [1, 2, 3, 4]);
    }

    #[test]
    fn self_send_is_buffered() {
        let c = Comm::serial();
        c.send(0, 3, vec![9]).unwrap();
        assert_eq!(c.recv(0, 3).unwrap(), [9]);
    }

    #[test]
    fn unmatched_recv_is_a_deadlock() {
        let err = launch_with(&quick(), 2, |c| {
            if c.rank() == 0 {
                c.recv(1, 0)?;
            }
            Ok(())
        })
        .unwrap_err();
        assert!(matches!(err, Error::Deadlock(_)), "{err}");
    }

    #[test]
    fn wrong_tag_never_matches() {
        let err = launch_with(&quick(), 2, |c| {
            if c.rank() == 0 {
                c.send(1, 1, vec![0])?;
            } else {
                c.recv(0, 2)?;
            }
            Ok(())
        })
        .unwrap_err();
        match err {
            Error::Deadlock(d) => assert!(d.contains("tag 2"), "{d}"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn invalid_rank() {
        let c = Comm::serial();
        assert!(matches!(
            c.send(3, 0, vec![]),
            Err(Error::InvalidRank { rank: 3, size: 1 })
        ));
    }

    #[test]
    fn all_reduce_variants() {
        let sums = launch_with(&quick(), 4, |c| {
            c.all_reduce(&[c.rank() as f64], ReduceOp::Sum)
        })
        .unwrap();
        assert!(sums.iter().all(|v| v == &[6.0]));

        let vals = [3.0, 1.0, 4.0, 1.0];
        let maxes = launch_with(&quick(), 4, |c| {
            c.all_reduce(&[vals[c.rank()]], ReduceOp::Max)
        })
        .unwrap();
        assert!(maxes.iter().all(|v| v == &[4.0]));
        let mins = launch_with(&quick(), 4, |c| {
            c.all_reduce(&[vals[c.rank()]], ReduceOp::Min)
        })
        .unwrap();
        assert!(mins.iter().all(|v| v == &[1.0]));

        let c = Comm::serial();
        assert_eq!(c.all_reduce(&[2.5, 1.0], ReduceOp::Sum).unwrap(), [2.5, 1.0]);
    }

    #[test]
    fn all_reduce_length_mismatch() {
        let err = launch_with(&quick(), 2, |c| {
            c.all_reduce(&vec![1.0; c.rank() + 1], ReduceOp::Sum)
        })
        .unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }), "{err}");
    }

    #[test]
    fn all_reduce_is_bitwise_reproducible() {
        let run = || {
            launch_with(&quick(), 8, |c| {
                let x = 0.1 * (c.rank() as f64 + 1.0).sqrt();
                c.all_reduce(&[x, x * 1e-17, -x], ReduceOp::Sum)
            })
            .unwrap()
        };
        let a = run();
        let b = run();
        for (x, y) in a.iter().zip(&b) {
            for (u, v) in x.iter().zip(y) {
                assert_eq!(u.to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn gather_and_broadcast() {
        let g = launch_with(&quick(), 3, |c| c.all_gather(&[c.rank() as u8])).unwrap();
        for parts in g {
            assert_eq!(parts, vec![vec![0u8], vec![1], vec![2]]);
        }
        let b = launch_with(&quick(), 3, |c| {
            let payload = if c.rank() == 2 { vec![42u8, 7] } else { vec![] };
            c.broadcast(2, &payload)
        })
        .unwrap();
        assert!(b.iter().all(|v| v == &[42, 7]));
        Comm::serial().barrier().unwrap();
        launch_with(&quick(), 5, |c| c.barrier()).unwrap();
    }

    #[test]
    fn all_to_all_routes_messages() {
        let out = launch_with(&quick(), 3, |c| {
            let msgs = (0..3).map(|r| vec![(10 * c.rank() + r) as u8]).collect();
            c.all_to_all(msgs)
        })
        .unwrap();
        for (me, inc) in out.iter().enumerate() {
            for (src, m) in inc.iter().enumerate() {
                assert_eq!(m, &vec![(10 * src + me) as u8]);
            }
        }
    }

    #[test]
    fn skipped_collective_is_diagnosed() {
        let err = launch_with(&quick(), 3, |c| {
            if c.rank() != 1 {
                c.barrier()?;
            }
            Ok(())
        })
        .unwrap_err();
        match err {
            Error::Deadlock(d) => assert!(d.contains("barrier"), "{d}"),
            e => panic!("unexpected {e}"),
        }

        // mismatched collectives use different tags and cannot cross-match
        let err = launch_with(&quick(), 2, |c| {
            if c.rank() == 0 {
                c.barrier()
            } else {
                c.all_reduce(&[1.0], ReduceOp::Sum).map(|_| ())
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::Deadlock(_)), "{err}");
    }

    #[test]
    fn first_failure_is_propagated() {
        let err = launch_with(&quick(), 3, |c| {
            if c.rank() == 2 {
                return Err(Error::Model("boom".into()));
            }
            c.barrier()
        })
        .unwrap_err();
        assert_eq!(err, Error::Model("boom".into()));
    }

    #[test]
    fn panicking_rank_does_not_hang_others() {
        let err = launch_with(&quick(), 2, |c| {
            if c.rank() == 1 {
                panic!("rank failure");
            }
            c.barrier()
        })
        .unwrap_err();
        assert_eq!(err, Error::RankPanicked(1));
    }

    #[test]
    fn timeout_backstop_fires() {
        let opts = LaunchOptions {
            timeout: Duration::from_millis(200),
        };
        let err = launch_with(&opts, 2, |c| {
            if c.rank() == 0 {
                c.recv(1, 0)?;
            } else {
                // busy, not blocked: exact detection cannot fire
                std::thread::sleep(Duration::from_millis(600));
            }
            Ok(())
        })
        .unwrap_err();
        match err {
            Error::Deadlock(d) => assert!(d.contains("no message after"), "{d}"),
            e => panic!("unexpected {e}"),
        }
    }
}
