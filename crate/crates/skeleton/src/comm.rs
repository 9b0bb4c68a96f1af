//! SPMD workers that talk only through messages.
//!
//! Every worker owns one inbox. Messages carry their source rank, a kind and
//! a sequence tag; a receiver asks for a specific `(source, kind)` pair and
//! stashes anything else until it is asked for. Per-sender FIFO order plus
//! identical call sequences on every worker means tags always line up; a
//! mismatch is a protocol violation and aborts the run.

use std::any::Any;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::time::Duration;

use crate::dmatrix::DMatrix;
use crate::topology::{BlockLayout, Side, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// Halo strip landing on the receiver's given side.
    Halo(Side),
    ReduceUp,
    ReduceDown,
    Gather,
}

struct Envelope {
    source: usize,
    kind: Kind,
    tag: u64,
    payload: Box<dyn Any + Send>,
}

/// A packed strip of `ghost` rows or columns sent across one block face.
#[derive(Debug, Clone)]
pub struct HaloMessage<T> {
    pub source: usize,
    /// The receiver's side the strip is written into.
    pub direction: Side,
    pub strip: Vec<T>,
    pub tag: u64,
}

/// Counters for one worker's communication.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct CommStats {
    /// Halo exchanges issued (one per field per exchange call).
    pub exchanges: usize,
    pub messages_sent: usize,
    pub reductions: usize,
}

/// One SPMD participant: a rank, its block layout and its mailboxes.
pub struct Worker {
    rank: usize,
    topology: Arc<Topology>,
    outboxes: Vec<Sender<Envelope>>,
    inbox: Receiver<Envelope>,
    pending: Vec<Envelope>,
    abort: Arc<AtomicBool>,
    halo_seq: u64,
    reduce_seq: u64,
    gather_seq: u64,
    stats: CommStats,
}

const POLL: Duration = Duration::from_millis(50);

impl Worker {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn workers(&self) -> usize {
        self.topology.workers
    }

    pub fn is_root(&self) -> bool {
        self.rank == 0
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn layout(&self) -> &BlockLayout {
        self.topology.block(self.rank)
    }

    pub fn stats(&self) -> CommStats {
        self.stats
    }

    /// A fresh block for this worker filled with `fill`.
    pub fn matrix<T: Copy>(&self, fill: T) -> DMatrix<T> {
        DMatrix::new(self.layout(), fill)
    }

    /// This worker's block of a global row-major raster.
    pub fn scatter<T: Copy>(&self, global: &[T], fill: T) -> DMatrix<T> {
        DMatrix::from_global(self.layout(), fill, global)
    }

    fn send(&mut self, to: usize, kind: Kind, tag: u64, payload: Box<dyn Any + Send>) {
        self.stats.messages_sent += 1;
        let env = Envelope {
            source: self.rank,
            kind,
            tag,
            payload,
        };
        if self.outboxes[to].send(env).is_err() {
            panic!("worker {} is gone; run aborted", to);
        }
    }

    fn recv(&mut self, source: usize, kind: Kind) -> Envelope {
        if let Some(pos) = self
            .pending
            .iter()
            .position(|e| e.source == source && e.kind == kind)
        {
            return self.pending.remove(pos);
        }
        loop {
            match self.inbox.recv_timeout(POLL) {
                Ok(e) if e.source == source && e.kind == kind => return e,
                Ok(e) => self.pending.push(e),
                Err(RecvTimeoutError::Timeout) => {
                    if self.abort.load(Ordering::SeqCst) {
                        panic!("worker {}: a peer worker aborted", self.rank);
                    }
                }
                Err(RecvTimeoutError::Disconnected) => {
                    panic!("worker {}: mailbox disconnected", self.rank)
                }
            }
        }
    }

    fn expect_tag(&self, env: &Envelope, tag: u64) {
        assert_eq!(
            env.tag, tag,
            "protocol error on worker {}: message {:?} from {} carries tag {} but {} was expected",
            self.rank, env.kind, env.source, env.tag, tag
        );
    }

    /// Fills every halo cell that borders another block (or a periodic wrap)
    /// with that block's adjacent interior values. Ghost cells on physical
    /// boundaries are left alone.
    ///
    /// Two phases: E/W columns over the interior rows first, then N/S rows
    /// over the full width including the just-filled ghost columns, so that
    /// corner cells arrive without diagonal messages.
    pub fn halo_exchange<T: Copy + Send + 'static>(&mut self, m: &mut DMatrix<T>) {
        debug_assert_eq!(m.layout(), self.layout(), "matrix belongs to another worker");
        self.halo_seq += 1;
        self.stats.exchanges += 1;
        let tag = self.halo_seq;
        let g = m.ghost();
        let (nx, ny) = (m.nx() as isize, m.ny() as isize);
        let layout = self.layout().clone();

        // Phase 1: x faces.
        for side in [Side::West, Side::East] {
            if let Some(to) = layout.neighbor(side) {
                let i0 = if side == Side::West { 0 } else { nx - g as isize };
                let strip = m.pack_cols(i0, g);
                let msg = HaloMessage {
                    source: self.rank,
                    direction: side.opposite(),
                    strip,
                    tag,
                };
                self.send(to, Kind::Halo(side.opposite()), tag, Box::new(msg));
            }
        }
        for side in [Side::West, Side::East] {
            if let Some(from) = layout.neighbor(side) {
                let msg = self.recv_halo::<T>(from, side, tag);
                let i0 = if side == Side::West { -(g as isize) } else { nx };
                m.unpack_cols(i0, g, &msg.strip);
            }
        }

        // Phase 2: y faces over the widened extent.
        let (i0, i1) = (-(g as isize), nx + g as isize);
        for side in [Side::South, Side::North] {
            if let Some(to) = layout.neighbor(side) {
                let j0 = if side == Side::South { 0 } else { ny - g as isize };
                let strip = m.pack_rows(j0, g, i0, i1);
                let msg = HaloMessage {
                    source: self.rank,
                    direction: side.opposite(),
                    strip,
                    tag,
                };
                self.send(to, Kind::Halo(side.opposite()), tag, Box::new(msg));
            }
        }
        for side in [Side::South, Side::North] {
            if let Some(from) = layout.neighbor(side) {
                let msg = self.recv_halo::<T>(from, side, tag);
                let j0 = if side == Side::South { -(g as isize) } else { ny };
                m.unpack_rows(j0, g, i0, i1, &msg.strip);
            }
        }
        m.set_halo_valid(g);
    }

    fn recv_halo<T: 'static>(&mut self, from: usize, side: Side, tag: u64) -> HaloMessage<T> {
        let env = self.recv(from, Kind::Halo(side));
        self.expect_tag(&env, tag);
        let msg = *env
            .payload
            .downcast::<HaloMessage<T>>()
            .unwrap_or_else(|_| panic!("protocol error: halo payload of unexpected type"));
        assert_eq!(msg.direction, side, "halo strip delivered to the wrong side");
        msg
    }

    /// Combines one value per worker with `op`, folding in rank order on the
    /// root, and hands the result back to every worker.
    pub fn all_reduce<T, F>(&mut self, value: T, op: F) -> T
    where
        T: Clone + Send + 'static,
        F: Fn(T, T) -> T,
    {
        self.reduce_seq += 1;
        self.stats.reductions += 1;
        let tag = self.reduce_seq;
        let p = self.workers();
        if self.is_root() {
            let mut acc = value;
            for r in 1..p {
                let env = self.recv(r, Kind::ReduceUp);
                self.expect_tag(&env, tag);
                let v = *env
                    .payload
                    .downcast::<T>()
                    .unwrap_or_else(|_| panic!("protocol error: reduction payload type"));
                acc = op(acc, v);
            }
            for r in 1..p {
                self.send(r, Kind::ReduceDown, tag, Box::new(acc.clone()));
            }
            acc
        } else {
            self.send(0, Kind::ReduceUp, tag, Box::new(value));
            let env = self.recv(0, Kind::ReduceDown);
            self.expect_tag(&env, tag);
            *env.payload
                .downcast::<T>()
                .unwrap_or_else(|_| panic!("protocol error: reduction payload type"))
        }
    }

    /// Global minimum, bit-identical on every worker.
    pub fn reduce_min<T: PartialOrd + Copy + Send + 'static>(&mut self, value: T) -> T {
        self.all_reduce(value, |a, b| if b < a { b } else { a })
    }

    pub fn reduce_max<T: PartialOrd + Copy + Send + 'static>(&mut self, value: T) -> T {
        self.all_reduce(value, |a, b| if b > a { b } else { a })
    }

    pub fn reduce_any(&mut self, flag: bool) -> bool {
        self.all_reduce(flag, |a, b| a || b)
    }

    /// Collects one value per worker on the root, in rank order.
    pub fn gather_values<T: Send + 'static>(&mut self, value: T) -> Option<Vec<T>> {
        self.gather_seq += 1;
        let tag = self.gather_seq;
        if self.is_root() {
            let mut out = Vec::with_capacity(self.workers());
            out.push(value);
            for r in 1..self.workers() {
                let env = self.recv(r, Kind::Gather);
                self.expect_tag(&env, tag);
                out.push(
                    *env.payload
                        .downcast::<T>()
                        .unwrap_or_else(|_| panic!("protocol error: gather payload type")),
                );
            }
            Some(out)
        } else {
            self.send(0, Kind::Gather, tag, Box::new(value));
            None
        }
    }

    /// Reassembles the global row-major raster on the root.
    pub fn gather<T: Copy + Send + 'static>(&mut self, m: &DMatrix<T>) -> Option<Vec<T>> {
        let parts = self.gather_values((m.layout().rank, m.interior_to_vec()))?;
        let (gnx, gny) = self.topology.global;
        let mut out: Vec<Option<T>> = vec![None; gnx * gny];
        for (rank, block) in parts {
            let b = self.topology.block(rank);
            for j in 0..b.ny() {
                let row = (b.origin.1 + j) * gnx + b.origin.0;
                for i in 0..b.nx() {
                    out[row + i] = Some(block[j * b.nx() + i]);
                }
            }
        }
        Some(out.into_iter().map(|v| v.expect("blocks tile the domain")).collect())
    }
}

/// Launches one long-lived thread per block and runs the same program on
/// each of them.
pub struct Executor {
    topology: Arc<Topology>,
}

impl Executor {
    pub fn new(topology: Topology) -> Self {
        Self {
            topology: Arc::new(topology),
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Runs `program` on every worker and returns the results in rank order.
    /// A panic on any worker aborts the others and is re-raised here.
    pub fn run<R, F>(&self, program: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&mut Worker) -> R + Sync,
    {
        let p = self.topology.workers;
        let abort = Arc::new(AtomicBool::new(false));
        let (senders, receivers): (Vec<_>, Vec<_>) = (0..p).map(|_| channel::<Envelope>()).unzip();

        let mut workers: Vec<Worker> = receivers
            .into_iter()
            .enumerate()
            .map(|(rank, inbox)| Worker {
                rank,
                topology: Arc::clone(&self.topology),
                outboxes: senders.clone(),
                inbox,
                pending: Vec::new(),
                abort: Arc::clone(&abort),
                halo_seq: 0,
                reduce_seq: 0,
                gather_seq: 0,
                stats: CommStats::default(),
            })
            .collect();
        drop(senders);

        let program = &program;
        let outcomes: Vec<std::thread::Result<R>> = std::thread::scope(|s| {
            let handles: Vec<_> = workers
                .iter_mut()
                .map(|w| {
                    let abort = Arc::clone(&abort);
                    s.spawn(move || {
                        let out = panic::catch_unwind(AssertUnwindSafe(|| program(w)));
                        if out.is_err() {
                            abort.store(true, Ordering::SeqCst);
                        }
                        out
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(Err))
                .collect()
        });

        let mut results = Vec::with_capacity(p);
        let mut original = None;
        let mut echo = None;
        for o in outcomes {
            match o {
                Ok(r) => results.push(r),
                Err(e) => {
                    // Peers that noticed the abort echo it; report the root cause.
                    let echoed = e
                        .downcast_ref::<String>()
                        .is_some_and(|m| m.contains("peer worker aborted"));
                    let slot = if echoed { &mut echo } else { &mut original };
                    slot.get_or_insert(e);
                }
            }
        }
        if let Some(e) = original.or(echo) {
            panic::resume_unwind(e);
        }
        results
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::decompose;

    #[test]
    fn reduce_min_same_everywhere() {
        let exec = Executor::new(decompose(4, 8, 8, 1, (false, false)).unwrap());
        let vals = [0.3, 0.1, 0.2, 0.4];
        let out = exec.run(|w| w.reduce_min(vals[w.rank()]));
        assert_eq!(out, vec![0.1; 4]);
    }

    #[test]
    fn single_worker_reduce_is_identity() {
        let exec = Executor::new(decompose(1, 8, 8, 1, (false, false)).unwrap());
        assert_eq!(exec.run(|w| w.reduce_min(2.5f64)), vec![2.5]);
    }

    #[test]
    fn side_by_side_column_copy() {
        let exec = Executor::new(decompose(2, 6, 3, 1, (false, false)).unwrap());
        let out = exec.run(|w| {
            let mut m = w.matrix(0i32);
            if w.rank() == 0 {
                // right edge of the left block is [1, 2, 3]
                for j in 0..3 {
                    m.set(2, j, j as i32 + 1);
                }
            }
            w.halo_exchange(&mut m);
            (0..3).map(|j| m.get(-1, j)).collect::<Vec<_>>()
        });
        assert_eq!(out[1], vec![1, 2, 3]);
    }

    #[test]
    fn worker_panic_propagates() {
        let exec = Executor::new(decompose(2, 4, 4, 1, (false, false)).unwrap());
        let r = panic::catch_unwind(AssertUnwindSafe(|| {
            exec.run(|w| {
                if w.rank() == 1 {
                    panic!("boom");
                }
                w.reduce_min(1.0)
            })
        }));
        let err = r.unwrap_err();
        let msg = err
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| err.downcast_ref::<String>().cloned())
            .unwrap();
        assert_eq!(msg, "boom");
    }
}
