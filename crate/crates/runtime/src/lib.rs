//! A task-parallel runtime that hides I/O latency with futures scheduled
//! by proactive work stealing.
//!
//! Programs are built from continuation frames (see [`task`] docs):
//! `Spawn`/`Sync` give fork-join parallelism, `SpawnFuture`/`Await` give
//! futures, and [`Ctx::read_async`]/[`Ctx::write_async`] give I/O
//! futures whose puts are performed by per-worker I/O threads. A worker
//! that blocks on a pending future suspends its whole deque, donates it
//! to a random other worker, and steals; the deque comes back resumable
//! once the put lands.
//!
//! ```no_run
//! use lathide_runtime::{frame, Program, Runtime, RuntimeConfig, Slot, Step};
//!
//! let rt = Runtime::new(RuntimeConfig::default()).unwrap();
//! let program = Program::new(|out: Slot<u64>| {
//!     frame(move |_ctx| {
//!         out.set(41 + 1);
//!         Step::Done
//!     })
//! });
//! let (answer, counters) = rt.run(program).unwrap();
//! assert_eq!(answer, 42);
//! assert_eq!(counters.suspensions, 0);
//! ```

mod affinity;
mod counters;
mod io;
mod spsc;
mod task;
mod worker;

pub use counters::{IoStats, SchedCounters};
pub use io::{IoCompletion, IoFuture, IoKind, SHUTDOWN_ERRNO};
pub use lathide_reactor::{Backend, TimedFd};
pub use task::{frame, Frame, FutureHandle, JoinCounter, Slot, Step};
pub use worker::Ctx;

use std::io as stdio;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

use lathide_deque::DequePool;
use lathide_reactor::Reactor;
use thiserror::Error;

use counters::{PendingFutures, WorkerCounters};
use io::IoThread;
use task::{Completion, RunToken, TaskUnit};
use worker::{RunSlot, Shared, Worker, WorkerShared};

/// How asynchronous I/O submitted through [`Ctx::read_async`] /
/// [`Ctx::write_async`] is serviced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IoMode {
    /// One I/O thread per worker, fed through a communication queue.
    #[default]
    Threads,
    /// No I/O threads: the requesting worker drives a private reactor
    /// between steal attempts.
    WorkerReactor,
    /// No reactor at all: operations complete synchronously in the
    /// caller (readiness awaited with a blocking poll).
    Inline,
}

#[derive(Debug, Clone)]
pub struct RuntimeConfig {
    pub workers: usize,
    /// Seeds the per-worker RNG streams (victim and donation choices).
    pub seed: u64,
    pub io_mode: IoMode,
    /// Pin workers (and their I/O threads) to cores.
    pub pin: bool,
    pub backend: Backend,
    /// Communication queue capacity per worker/I/O thread pair.
    pub comm_queue_capacity: usize,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            workers: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            seed: 0,
            io_mode: IoMode::Threads,
            pin: true,
            backend: Backend::default(),
            comm_queue_capacity: 1024,
        }
    }
}

impl RuntimeConfig {
    pub fn with_workers(workers: usize) -> RuntimeConfig {
        RuntimeConfig {
            workers,
            ..Default::default()
        }
    }
}

/// A runnable program: a root frame plus the slot its result lands in.
pub struct Program<T> {
    root: Frame,
    out: Slot<T>,
}

impl<T: Send + Sync + 'static> Program<T> {
    /// `build` receives the output slot and returns the root frame. The
    /// program must set the slot before the root task finishes.
    pub fn new(build: impl FnOnce(Slot<T>) -> Frame) -> Program<T> {
        let out = Slot::new();
        let root = build(out.clone());
        Program { root, out }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("run failed: {0}")]
    Failed(String),
    #[error("program finished without setting its result slot")]
    NoResult,
    #[error("runtime is shut down")]
    Terminated,
}

/// The runtime: P worker threads, and with [`IoMode::Threads`] also one
/// I/O thread per worker, all persistent across runs.
pub struct Runtime {
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
    run_gate: Mutex<()>,
}

impl Runtime {
    pub fn new(config: RuntimeConfig) -> stdio::Result<Runtime> {
        assert!(config.workers >= 1, "need at least one worker");
        let plan = affinity::plan(config.workers);
        let census = Arc::new(AtomicUsize::new(0));
        let pending = Arc::new(PendingFutures::default());
        let shutdown = Arc::new(AtomicBool::new(false));

        // Reactors and queues come first so the wake handles can live in
        // the shared worker table.
        let mut io_parts = Vec::new();
        let mut workers_shared = Vec::new();
        for id in 0..config.workers {
            let io_stats = Arc::new(IoStats::default());
            let mut wake = None;
            let mut part = None;
            if config.io_mode == IoMode::Threads {
                let reactor = Reactor::new(config.backend).map_err(|e| {
                    stdio::Error::new(e.kind(), format!("reactor for worker {id}: {e}"))
                })?;
                wake = Some(reactor.wake_handle());
                let (producer, consumer) = spsc::channel(config.comm_queue_capacity);
                part = Some((reactor, consumer, Some(producer)));
            }
            workers_shared.push(WorkerShared {
                pool: DequePool::new(id),
                counters: WorkerCounters::new(config.workers),
                io_stats,
                wake,
            });
            io_parts.push(part);
        }

        let shared = Arc::new(Shared {
            config: config.clone(),
            workers: workers_shared,
            shutdown: shutdown.clone(),
            run: Mutex::new(RunSlot {
                active: false,
                token: None,
            }),
            run_cv: Condvar::new(),
            injector: Mutex::new(None),
            run_seq: AtomicU64::new(0),
            in_run: AtomicUsize::new(0),
            pending: pending.clone(),
            census,
        });

        let mut threads = Vec::new();
        for (id, part) in io_parts.into_iter().enumerate() {
            let mut producer = None;
            if let Some((reactor, consumer, prod)) = part {
                producer = prod;
                let io = IoThread {
                    queue: consumer,
                    reactor,
                    stats: shared.workers[id].io_stats.clone(),
                    shutdown: shutdown.clone(),
                    pending_futures: pending.clone(),
                };
                let pin = config.pin.then_some(plan[id].io_cpu);
                threads.push(
                    std::thread::Builder::new()
                        .name(format!("lathide-io-{id}"))
                        .spawn(move || {
                            if let Some(cpu) = pin {
                                affinity::pin_current_thread(cpu);
                            }
                            io.run();
                        })?,
                );
            }

            let inline_reactor = if config.io_mode == IoMode::WorkerReactor {
                Some(io::InlineReactor::new(
                    config.backend,
                    shared.workers[id].io_stats.clone(),
                    pending.clone(),
                )?)
            } else {
                None
            };
            let shared = shared.clone();
            let pin = config.pin.then_some(plan[id].worker_cpu);
            threads.push(
                std::thread::Builder::new()
                    .name(format!("lathide-worker-{id}"))
                    .spawn(move || {
                        if let Some(cpu) = pin {
                            affinity::pin_current_thread(cpu);
                        }
                        Worker::new(id, shared, producer, inline_reactor).main_loop();
                    })?,
            );
        }

        Ok(Runtime {
            shared,
            threads,
            run_gate: Mutex::new(()),
        })
    }

    pub fn workers(&self) -> usize {
        self.shared.config.workers
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.shared.config
    }

    /// Execute a program to completion and return its result along with
    /// the scheduler counters for this run.
    pub fn run<T: Clone + Send + Sync + 'static>(
        &self,
        program: Program<T>,
    ) -> Result<(T, SchedCounters), RunError> {
        let _gate = self.run_gate.lock().unwrap();
        if self.shared.shutdown.load(Ordering::Acquire) {
            return Err(RunError::Terminated);
        }
        // Let stragglers from the previous run leave before resetting.
        while self.shared.in_run.load(Ordering::Acquire) > 0 {
            std::thread::yield_now();
        }
        for w in &self.shared.workers {
            w.pool.clear();
        }
        self.shared.pending.reset();
        *self.shared.injector.lock().unwrap() = None;
        self.shared.run_seq.fetch_add(1, Ordering::AcqRel);

        let before = self.counters_snapshot();
        let token = RunToken::new();
        let root = TaskUnit {
            frame: program.root,
            completion: Completion::Root(token.clone()),
        };
        *self.shared.injector.lock().unwrap() = Some(root);
        {
            let mut run = self.shared.run.lock().unwrap();
            run.active = true;
            run.token = Some(token.clone());
            self.shared.run_cv.notify_all();
        }

        let result = token.wait();

        {
            let mut run = self.shared.run.lock().unwrap();
            run.active = false;
            run.token = None;
        }
        while self.shared.in_run.load(Ordering::Acquire) > 0 {
            std::thread::yield_now();
        }
        let after = self.counters_snapshot();
        let mut counters = SchedCounters::delta(&after, &before);
        counters.peak_pending_futures = self.shared.pending.peak();

        match result {
            Ok(()) => match program.out.try_get() {
                Some(v) => Ok((v.clone(), counters)),
                None => Err(RunError::NoResult),
            },
            Err(msg) => Err(RunError::Failed(msg)),
        }
    }

    /// Cumulative counters since startup.
    pub fn counters_snapshot(&self) -> SchedCounters {
        let mut c = SchedCounters::default();
        for w in &self.shared.workers {
            c.steal_attempts += w.counters.steal_attempts.load(Ordering::Relaxed);
            c.successful_steals += w.counters.successful_steals.load(Ordering::Relaxed);
            c.suspensions += w.counters.suspensions.load(Ordering::Relaxed);
            c.resumptions += w.counters.resumptions.load(Ordering::Relaxed);
            c.donations += w.counters.donations_sent.load(Ordering::Relaxed);
            c.inline_completions += w.counters.inline_completions.load(Ordering::Relaxed);
            c.worker_blocking_ops += w.counters.worker_blocking_ops.load(Ordering::Relaxed);
            c.frames_executed += w.counters.frames_executed.load(Ordering::Relaxed);
            c.io_wakeups += w.io_stats.wakeups.load(Ordering::Relaxed);
            c.io_puts += w.io_stats.puts.load(Ordering::Relaxed);
            c.io_registrations += w.io_stats.registrations.load(Ordering::Relaxed);
            c.donation_matrix.push(
                w.counters
                    .donation_offsets
                    .iter()
                    .map(|a| a.load(Ordering::Relaxed))
                    .collect(),
            );
            c.per_worker_steal_attempts
                .push(w.counters.steal_attempts.load(Ordering::Relaxed));
        }
        c.peak_pending_futures = self.shared.pending.peak();
        c
    }

    /// I/O statistics for one worker/I/O-thread pair.
    pub fn io_stats(&self, pair: usize) -> Arc<IoStats> {
        self.shared.workers[pair].io_stats.clone()
    }

    /// Stealable deques per worker right now (racy snapshot).
    pub fn stealable_counts(&self) -> Vec<usize> {
        self.shared
            .workers
            .iter()
            .map(|w| w.pool.stealable_count())
            .collect()
    }

    /// Live deques allocated by this runtime.
    pub fn deque_census(&self) -> usize {
        self.shared.census.load(Ordering::Relaxed)
    }

    /// Handle to the live-deque counter that stays valid across
    /// shutdown, for leak audits.
    pub fn deque_census_counter(&self) -> Arc<AtomicUsize> {
        self.shared.census.clone()
    }

    fn shutdown_inner(&mut self) {
        if self.shared.shutdown.swap(true, Ordering::AcqRel) {
            return;
        }
        self.shared.run_cv.notify_all();
        for w in &self.shared.workers {
            if let Some(wake) = &w.wake {
                let _ = wake.signal();
            }
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
        for w in &self.shared.workers {
            w.pool.clear();
        }
    }

    /// Stop all threads, completing pending I/O with a shutdown error.
    pub fn shutdown(mut self) {
        self.shutdown_inner();
    }
}

impl Drop for Runtime {
    fn drop(&mut self) {
        self.shutdown_inner();
    }
}
