//! Scheduler and I/O instrumentation.

use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};

/// Per-worker scheduler counters. Written by the owning worker (plus the
/// donation-received cell written by donors); read at aggregation time.
#[derive(Default)]
pub(crate) struct WorkerCounters {
    pub steal_attempts: AtomicU64,
    pub successful_steals: AtomicU64,
    pub suspensions: AtomicU64,
    pub resumptions: AtomicU64,
    pub donations_sent: AtomicU64,
    /// Indexed by (target - donor - 1) mod P; fixed width covers any P we run.
    pub donation_offsets: Vec<AtomicU64>,
    pub inline_completions: AtomicU64,
    /// Blocking operations executed on this worker thread. Only the
    /// sanctioned inline-backpressure path may raise this.
    pub worker_blocking_ops: AtomicU64,
    pub frames_executed: AtomicU64,
}

impl WorkerCounters {
    pub fn new(workers: usize) -> WorkerCounters {
        WorkerCounters {
            donation_offsets: (0..workers).map(|_| AtomicU64::new(0)).collect(),
            ..Default::default()
        }
    }

    pub fn bump(c: &AtomicU64) {
        c.fetch_add(1, Ordering::Relaxed);
    }
}

/// Per I/O-thread statistics, shared with tests and the benchmark CLI.
#[derive(Default)]
pub struct IoStats {
    pub wakeups: AtomicU64,
    pub puts: AtomicU64,
    pub enqueued: AtomicU64,
    pub dequeued: AtomicU64,
    pub registrations: AtomicU64,
    pub cpu_ns: AtomicU64,
}

/// Snapshot of one run's scheduler activity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchedCounters {
    pub steal_attempts: u64,
    pub successful_steals: u64,
    pub suspensions: u64,
    pub resumptions: u64,
    pub donations: u64,
    pub inline_completions: u64,
    pub worker_blocking_ops: u64,
    pub frames_executed: u64,
    /// Peak number of simultaneously pending futures during the run.
    pub peak_pending_futures: u64,
    /// I/O thread activity summed over all pairs.
    pub io_wakeups: u64,
    pub io_puts: u64,
    pub io_registrations: u64,
    /// donation_matrix[donor][offset]: donations whose target sat
    /// `offset` places after the donor (mod P, self excluded).
    pub donation_matrix: Vec<Vec<u64>>,
    pub per_worker_steal_attempts: Vec<u64>,
}

impl SchedCounters {
    /// Difference of two cumulative snapshots (end minus start).
    pub(crate) fn delta(end: &SchedCounters, start: &SchedCounters) -> SchedCounters {
        SchedCounters {
            steal_attempts: end.steal_attempts - start.steal_attempts,
            successful_steals: end.successful_steals - start.successful_steals,
            suspensions: end.suspensions - start.suspensions,
            resumptions: end.resumptions - start.resumptions,
            donations: end.donations - start.donations,
            inline_completions: end.inline_completions - start.inline_completions,
            worker_blocking_ops: end.worker_blocking_ops - start.worker_blocking_ops,
            frames_executed: end.frames_executed - start.frames_executed,
            peak_pending_futures: end.peak_pending_futures,
            io_wakeups: end.io_wakeups - start.io_wakeups,
            io_puts: end.io_puts - start.io_puts,
            io_registrations: end.io_registrations - start.io_registrations,
            donation_matrix: end
                .donation_matrix
                .iter()
                .zip(start.donation_matrix.iter())
                .map(|(e, s)| e.iter().zip(s.iter()).map(|(a, b)| a - b).collect())
                .collect(),
            per_worker_steal_attempts: end
                .per_worker_steal_attempts
                .iter()
                .zip(start.per_worker_steal_attempts.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `key=value` lines, one counter per line.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: u64| s.push_str(&format!("{k}={v}\n"));
        kv("steal_attempts", self.steal_attempts);
        kv("successful_steals", self.successful_steals);
        kv("suspensions", self.suspensions);
        kv("resumptions", self.resumptions);
        kv("donations", self.donations);
        kv("inline_completions", self.inline_completions);
        kv("worker_blocking_ops", self.worker_blocking_ops);
        kv("frames_executed", self.frames_executed);
        kv("peak_pending_futures", self.peak_pending_futures);
        kv("io_wakeups", self.io_wakeups);
        kv("io_puts", self.io_puts);
        kv("io_registrations", self.io_registrations);
        s
    }
}

/// Live count and high-water mark of pending futures.
#[derive(Default)]
pub(crate) struct PendingFutures {
    current: AtomicI64,
    peak: AtomicI64,
}

impl PendingFutures {
    pub fn reset(&self) {
        self.current.store(0, Ordering::Relaxed);
        self.peak.store(0, Ordering::Relaxed);
    }

    pub fn inc(&self) {
        let now = self.current.fetch_add(1, Ordering::Relaxed) + 1;
        self.peak.fetch_max(now, Ordering::Relaxed);
    }

    pub fn dec(&self) {
        self.current.fetch_sub(1, Ordering::Relaxed);
    }

    pub fn peak(&self) -> u64 {
        self.peak.load(Ordering::Relaxed).max(0) as u64
    }
}
