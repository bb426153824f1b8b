//! Worker threads: the execute / pop / resume / steal loop.
//!
//! A worker executes its assigned frame, then looks for the next one in
//! this order: children enabled by the frame, the bottom of its active
//! deque, its mailbox and own resumable deques, and finally stealing. On
//! a blocked get it does not pop on; it suspends the whole active deque,
//! donates it to a random other worker, allocates a fresh deque, and
//! turns thief. The put side pushes the join frame back into the
//! suspended deque and marks it resumable; whichever worker picks the
//! deque up adopts it wholesale.

use std::os::fd::RawFd;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::Ordering;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use lathide_deque::{DequePool, StealResult, WsDeque};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::counters::{IoStats, PendingFutures, WorkerCounters};
use crate::io::{blocking_perform, InlineReactor, IoCompletion, IoFuture, IoKind, IoRequest};
use crate::spsc::Producer;
use crate::task::{
    AwaitDecision, Completion, Frame, FutureHandle, HandleCore, RunStamp, RunToken, Step, TaskUnit,
};
use crate::{IoMode, RuntimeConfig};

const MAX_BACKOFF_US: u64 = 64;

pub(crate) struct RunSlot {
    pub active: bool,
    pub token: Option<Arc<RunToken>>,
}

pub(crate) struct WorkerShared {
    pub pool: DequePool<TaskUnit>,
    pub counters: WorkerCounters,
    pub io_stats: Arc<IoStats>,
    pub wake: Option<lathide_reactor::WakeChannel>,
}

pub(crate) struct Shared {
    pub config: RuntimeConfig,
    pub workers: Vec<WorkerShared>,
    pub shutdown: Arc<std::sync::atomic::AtomicBool>,
    pub run: Mutex<RunSlot>,
    pub run_cv: Condvar,
    pub injector: Mutex<Option<TaskUnit>>,
    pub run_seq: std::sync::atomic::AtomicU64,
    pub in_run: std::sync::atomic::AtomicUsize,
    pub pending: Arc<PendingFutures>,
    pub census: Arc<std::sync::atomic::AtomicUsize>,
}

impl Shared {
    fn run_active(&self) -> bool {
        self.run.lock().unwrap().active
    }

    fn current_token(&self) -> Option<Arc<RunToken>> {
        self.run.lock().unwrap().token.clone()
    }

    pub(crate) fn stamp(self: &Arc<Self>) -> RunStamp {
        RunStamp {
            runtime: Arc::as_ptr(self) as usize,
            run_seq: self.run_seq.load(Ordering::Acquire),
        }
    }
}

pub(crate) struct Worker {
    pub id: usize,
    pub shared: Arc<Shared>,
    pub rng: ChaCha8Rng,
    pub next: Option<TaskUnit>,
    pub active: Option<Arc<WsDeque<TaskUnit>>>,
    pub queue: Option<Producer<IoRequest>>,
    pub inline_reactor: Option<InlineReactor>,
    backoff_us: u64,
}

impl Worker {
    pub fn new(
        id: usize,
        shared: Arc<Shared>,
        queue: Option<Producer<IoRequest>>,
        inline_reactor: Option<InlineReactor>,
    ) -> Worker {
        let seed = shared.config.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(id as u64 + 1));
        Worker {
            id,
            shared,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next: None,
            active: None,
            queue,
            inline_reactor,
            backoff_us: 0,
        }
    }

    fn counters(&self) -> &WorkerCounters {
        &self.shared.workers[self.id].counters
    }

    fn pool(&self) -> &DequePool<TaskUnit> {
        &self.shared.workers[self.id].pool
    }

    pub fn main_loop(&mut self) {
        loop {
            // Park until a run begins or the runtime shuts down.
            {
                let mut run = self.shared.run.lock().unwrap();
                loop {
                    if self.shared.shutdown.load(Ordering::Acquire) {
                        return;
                    }
                    if run.active {
                        break;
                    }
                    run = self.shared.run_cv.wait(run).unwrap();
                }
            }
            self.shared.in_run.fetch_add(1, Ordering::AcqRel);
            self.participate();
            if let Some(r) = &mut self.inline_reactor {
                r.drain_with_error();
            }
            self.shared.in_run.fetch_sub(1, Ordering::AcqRel);
        }
    }

    fn participate(&mut self) {
        self.ensure_active();
        self.backoff_us = 0;
        loop {
            while let Some(unit) = self.next.take() {
                self.execute(unit);
            }
            if let Some(unit) = self.acquire_local() {
                self.next = Some(unit);
                continue;
            }
            if self.shared.shutdown.load(Ordering::Acquire) || !self.shared.run_active() {
                return;
            }
            if let Some(unit) = self.claim_injected() {
                self.next = Some(unit);
                continue;
            }
            if let Some(r) = &mut self.inline_reactor {
                if r.poll() > 0 {
                    continue;
                }
            }
            match self.steal_attempt() {
                Some(unit) => {
                    self.next = Some(unit);
                    self.backoff_us = 0;
                }
                None => self.backoff(),
            }
        }
    }

    fn ensure_active(&mut self) {
        if self.pool().active().is_none() {
            let d = WsDeque::new_counted(self.id, self.shared.census.clone());
            self.pool().replace_active(Some(d.clone()));
            self.active = Some(d);
        } else if self.active.is_none() {
            self.active = self.pool().active();
        }
    }

    fn execute(&mut self, unit: TaskUnit) {
        WorkerCounters::bump(&self.counters().frames_executed);
        let wrapped = AssertUnwindSafe((&mut *self, unit));
        let outcome = catch_unwind(move || {
            // Capture the wrapper whole; destructuring in the closure
            // head would capture the unwind-unsafe fields directly.
            let wrapped = wrapped;
            let (worker, unit) = wrapped.0;
            let TaskUnit { frame, completion } = unit;
            let step = frame(&mut Ctx { worker });
            worker.apply(step, completion);
        });
        if let Err(payload) = outcome {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "worker panicked".to_string());
            self.fail_run(msg);
        }
    }

    fn apply(&mut self, step: Step, completion: Completion) {
        match step {
            Step::Done => self.complete(completion),
            Step::Spawn { join, child, cont } => {
                join.add_child();
                let active = self.active.clone().expect("running worker has a deque");
                active.push_bottom(
                    self.id,
                    TaskUnit {
                        frame: cont,
                        completion,
                    },
                );
                self.next = Some(TaskUnit {
                    frame: child,
                    completion: Completion::DecJoin(join),
                });
            }
            Step::SpawnFuture {
                handle,
                child,
                cont,
            } => {
                self.check_stamp(&handle);
                self.shared.pending.inc();
                let active = self.active.clone().expect("running worker has a deque");
                active.push_bottom(
                    self.id,
                    TaskUnit {
                        frame: cont,
                        completion,
                    },
                );
                self.next = Some(TaskUnit {
                    frame: child,
                    completion: Completion::Put(handle.core),
                });
            }
            Step::Sync { join, cont } => {
                if let Some(unit) = join.arrive_sync(TaskUnit {
                    frame: cont,
                    completion,
                }) {
                    self.next = Some(unit);
                }
            }
            Step::Await { handle, cont } => {
                self.check_stamp(&handle);
                self.handle_await(handle, cont, completion);
            }
        }
    }

    fn check_stamp(&self, handle: &FutureHandle) {
        let now = self.shared.stamp();
        if handle.core.stamp != now {
            panic!("future handle used outside the run that created it");
        }
    }

    fn complete(&mut self, completion: Completion) {
        match completion {
            Completion::DecJoin(join) => {
                if let Some(unit) = join.child_done() {
                    // Last child to return continues the parent.
                    self.next = Some(unit);
                }
            }
            Completion::Put(core) => {
                self.shared.pending.dec();
                match core.complete() {
                    Ok(Some(waiter)) => {
                        waiter
                            .deque
                            .push_resume(waiter.unit)
                            .expect("waiter deque accepts the resume frame");
                    }
                    Ok(None) => {}
                    Err(_) => panic!("future put twice"),
                }
            }
            Completion::Root(token) => token.finish(Ok(())),
        }
    }

    /// Blocked-get handling. Fast path: ready handle, no deque motion.
    /// Slow path: suspend, donate, fresh deque, go steal.
    fn handle_await(&mut self, handle: FutureHandle, cont: Frame, completion: Completion) {
        let unit = TaskUnit {
            frame: cont,
            completion,
        };
        let active = self.active.clone().expect("running worker has a deque");
        match handle.core.await_or_park(unit, &active, self.id) {
            AwaitDecision::Ready(unit) => self.next = Some(unit),
            AwaitDecision::Parked => {
                WorkerCounters::bump(&self.counters().suspensions);
                self.pool().retire_active();
                self.active = None;
                self.donate(active);
                let fresh = WsDeque::new_counted(self.id, self.shared.census.clone());
                self.pool().replace_active(Some(fresh.clone()));
                self.active = Some(fresh);
            }
        }
    }

    /// Donate a suspended deque to a uniformly random other worker (or to
    /// this worker when it is the only one).
    fn donate(&mut self, d: Arc<WsDeque<TaskUnit>>) {
        let p = self.shared.workers.len();
        let target = if p == 1 {
            0
        } else {
            let mut t = self.rng.gen_range(0..p - 1);
            if t >= self.id {
                t += 1;
            }
            t
        };
        WorkerCounters::bump(&self.counters().donations_sent);
        let offset = (target + p - self.id - 1) % p;
        WorkerCounters::bump(&self.counters().donation_offsets[offset]);
        match self.shared.workers[target].pool.donate(d) {
            Ok(()) => {}
            Err(lathide_deque::DonateError(d)) => {
                // Target mailbox full: keep it home rather than block.
                self.pool().add_inactive(d);
            }
        }
    }

    fn acquire_local(&mut self) -> Option<TaskUnit> {
        if let Some(active) = &self.active {
            if let Some(unit) = active.pop_bottom(self.id) {
                return Some(unit);
            }
        }
        self.pool().drain_mailbox();
        if let Some(d) = self.pool().take_own_resumable(self.id) {
            WorkerCounters::bump(&self.counters().resumptions);
            self.pool().replace_active(Some(d.clone()));
            self.active = Some(d.clone());
            if let Some(unit) = d.pop_bottom(self.id) {
                return Some(unit);
            }
        }
        None
    }

    fn claim_injected(&mut self) -> Option<TaskUnit> {
        self.shared.injector.lock().unwrap().take()
    }

    fn steal_attempt(&mut self) -> Option<TaskUnit> {
        self.pool().drain_mailbox();
        WorkerCounters::bump(&self.counters().steal_attempts);
        let p = self.shared.workers.len();
        let victim = self.rng.gen_range(0..p);
        let mut candidates = self.shared.workers[victim].pool.stealable_deques();
        if let Some(own) = &self.active {
            candidates.retain(|d| !Arc::ptr_eq(d, own));
        }
        if candidates.is_empty() {
            return None;
        }
        let d = candidates[self.rng.gen_range(0..candidates.len())].clone();
        if d.state() == lathide_deque::DequeState::Resumable {
            if d.try_adopt(self.id) {
                self.shared.workers[victim].pool.remove_inactive(&d);
                WorkerCounters::bump(&self.counters().successful_steals);
                WorkerCounters::bump(&self.counters().resumptions);
                // The old active deque is empty; adopting replaces it.
                self.pool().replace_active(Some(d.clone()));
                self.active = Some(d.clone());
                return d.pop_bottom(self.id);
            }
            return None;
        }
        match d.steal_top(self.id) {
            StealResult::Stolen(unit) => {
                WorkerCounters::bump(&self.counters().successful_steals);
                Some(unit)
            }
            StealResult::Empty | StealResult::LostRace => None,
        }
    }

    fn backoff(&mut self) {
        let us = self.backoff_us.max(1);
        std::thread::sleep(Duration::from_micros(us));
        self.backoff_us = (us * 2).min(MAX_BACKOFF_US);
    }

    fn fail_run(&mut self, msg: String) {
        log::error!("worker {} aborting run: {msg}", self.id);
        self.next = None;
        if let Some(token) = self.shared.current_token() {
            token.finish(Err(msg));
        }
    }
}

/// Task-side view of the executing worker, passed to every frame.
pub struct Ctx<'w> {
    pub(crate) worker: &'w mut Worker,
}

impl Ctx<'_> {
    pub fn worker_id(&self) -> usize {
        self.worker.id
    }

    pub fn workers(&self) -> usize {
        self.worker.shared.workers.len()
    }

    /// A fresh pending future handle bound to the current run.
    pub fn future_handle(&mut self) -> FutureHandle {
        FutureHandle {
            core: HandleCore::new(self.worker.shared.stamp()),
        }
    }

    /// Issue an asynchronous read of up to `len` bytes into `buffer`.
    /// Returns immediately; get on the handle to obtain the completion.
    pub fn read_async(&mut self, fd: RawFd, buffer: Vec<u8>, len: usize) -> IoFuture {
        self.submit_io(IoKind::Read, fd, buffer, len)
    }

    /// Issue an asynchronous write of the first `len` bytes of `buffer`.
    pub fn write_async(&mut self, fd: RawFd, buffer: Vec<u8>, len: usize) -> IoFuture {
        self.submit_io(IoKind::Write, fd, buffer, len)
    }

    fn submit_io(&mut self, kind: IoKind, fd: RawFd, buffer: Vec<u8>, len: usize) -> IoFuture {
        assert!(len <= buffer.len(), "length {len} exceeds buffer capacity");
        let w = &mut *self.worker;
        let handle = FutureHandle {
            core: HandleCore::new(w.shared.stamp()),
        };
        let cell: Arc<std::sync::OnceLock<IoCompletion>> = Arc::new(std::sync::OnceLock::new());
        let fut = IoFuture {
            handle: handle.clone(),
            cell: cell.clone(),
        };
        let req = IoRequest {
            kind,
            fd,
            buffer,
            len,
            handle,
            cell,
        };
        w.shared.pending.inc();

        match w.shared.config.io_mode {
            IoMode::Threads => {
                let ws = &w.shared.workers[w.id];
                match w.queue.as_ref().expect("io threads enabled").push(req) {
                    Ok(()) => {
                        ws.io_stats.enqueued.fetch_add(1, Ordering::Relaxed);
                        ws.wake
                            .as_ref()
                            .expect("io threads enabled")
                            .signal()
                            .expect("wake channel signal");
                    }
                    Err(req) => {
                        // Communication queue full: complete inline,
                        // degraded but correct.
                        WorkerCounters::bump(&ws.counters.inline_completions);
                        Self::complete_inline(w, req);
                    }
                }
            }
            IoMode::WorkerReactor => {
                w.inline_reactor
                    .as_mut()
                    .expect("worker reactor configured")
                    .submit(req);
            }
            IoMode::Inline => {
                let ws = &w.shared.workers[w.id];
                WorkerCounters::bump(&ws.counters.inline_completions);
                Self::complete_inline(w, req);
            }
        }
        fut
    }

    fn complete_inline(w: &mut Worker, mut req: IoRequest) {
        let ws = &w.shared.workers[w.id];
        WorkerCounters::bump(&ws.counters.worker_blocking_ops);
        let result = match blocking_perform(req.kind, req.fd, &mut req.buffer, req.len) {
            Ok(n) => Ok(n),
            Err(e) => Err(e.raw_os_error().unwrap_or(libc::EIO)),
        };
        let IoRequest {
            buffer,
            handle,
            cell,
            ..
        } = req;
        let _ = cell.set(IoCompletion { result, buffer });
        w.shared.pending.dec();
        match handle.core.complete() {
            Ok(Some(waiter)) => {
                waiter
                    .deque
                    .push_resume(waiter.unit)
                    .expect("waiter deque accepts the resume frame");
            }
            Ok(None) => {}
            Err(_) => unreachable!("inline completion puts once"),
        }
    }
}
