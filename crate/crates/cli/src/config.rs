//! Benchmark configuration and environment defaults.

use std::time::Duration;

use lathide_runtime::{Backend, IoMode, RuntimeConfig};

/// How the map-reduce benchmark performs its reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// Baseline: plain blocking reads on P workers.
    #[value(name = "blocking")]
    Blocking,
    /// Blocking reads on 2P workers, letting the OS hide latency.
    #[value(name = "oversubscribed")]
    Oversubscribed,
    /// The full system: I/O futures serviced by I/O threads.
    #[value(name = "iofutures")]
    Iofutures,
    /// Baseline at effectively zero latency (forces the minimum delay).
    #[value(name = "ideal")]
    Ideal,
    /// Futures created and completed synchronously in the caller; no
    /// reactor, no I/O threads.
    #[value(name = "plus_future")]
    PlusFuture,
    /// Futures with a reactor driven inline by the requesting worker.
    #[value(name = "plus_epoll")]
    PlusEpoll,
    /// Full system at whatever latency is configured; alias used by the
    /// overhead breakdown.
    #[value(name = "plus_iothread")]
    PlusIothread,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::Blocking,
        Mode::Oversubscribed,
        Mode::Iofutures,
        Mode::Ideal,
        Mode::PlusFuture,
        Mode::PlusEpoll,
        Mode::PlusIothread,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Blocking => "blocking",
            Mode::Oversubscribed => "oversubscribed",
            Mode::Iofutures => "iofutures",
            Mode::Ideal => "ideal",
            Mode::PlusFuture => "plus_future",
            Mode::PlusEpoll => "plus_epoll",
            Mode::PlusIothread => "plus_iothread",
        }
    }

    /// Reads go through blocking syscalls on worker threads.
    pub fn blocking_reads(self) -> bool {
        matches!(self, Mode::Blocking | Mode::Oversubscribed | Mode::Ideal)
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Emulated connections (n).
    pub connections: u32,
    pub latency: Duration,
    pub fib_n: u64,
    pub serial_base: u64,
    /// Cores (P); the oversubscribed mode allocates 2P workers itself.
    pub workers: usize,
    pub mode: Mode,
    pub reps: u32,
    pub seed: u64,
    pub backend: Backend,
}

impl BenchConfig {
    /// Desk-scale defaults: 64 connections, 50 ms, fib 25 with serial
    /// base 15.
    pub fn desk_default() -> BenchConfig {
        BenchConfig {
            connections: 64,
            latency: Duration::from_millis(50),
            fib_n: 25,
            serial_base: 15,
            workers: default_workers(),
            mode: Mode::Iofutures,
            reps: 10,
            seed: default_seed(),
            backend: Backend::default(),
        }
    }

    /// Latency as the benchmark actually applies it: the ideal mode runs
    /// at the minimum timer granularity no matter what was requested.
    pub fn effective_latency(&self) -> Duration {
        match self.mode {
            Mode::Ideal => Duration::ZERO,
            _ => self.latency,
        }
    }

    /// Worker threads the runtime gets for this mode.
    pub fn runtime_workers(&self) -> usize {
        match self.mode {
            Mode::Oversubscribed => self.workers * 2,
            _ => self.workers,
        }
    }

    pub fn runtime_config(&self) -> RuntimeConfig {
        let io_mode = match self.mode {
            Mode::Iofutures | Mode::PlusIothread => IoMode::Threads,
            Mode::PlusEpoll => IoMode::WorkerReactor,
            _ => IoMode::Inline,
        };
        RuntimeConfig {
            workers: self.runtime_workers(),
            seed: self.seed,
            io_mode,
            pin: true,
            backend: self.backend,
            comm_queue_capacity: 1024,
        }
    }
}

/// LATHIDE_WORKERS, defaulting to the available cores.
pub fn default_workers() -> usize {
    std::env::var("LATHIDE_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w| w >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// LATHIDE_SEED, defaulting to 0.
pub fn default_seed() -> u64 {
    std::env::var("LATHIDE_SEED")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

/// Whether this host exposes a hyperthread sibling for core 0; the
/// oversubscribed mode flags its rows when it cannot pair workers on
/// siblings.
pub fn has_smt_siblings() -> bool {
    std::fs::read_to_string("/sys/devices/system/cpu/cpu0/topology/thread_siblings_list")
        .map(|s| s.trim().contains(',') || s.trim().contains('-'))
        .unwrap_or(false)
}
