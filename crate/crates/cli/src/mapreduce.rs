//! The distributed map-and-reduce microbenchmark.
//!
//! For each of n emulated connections the leaf opens a timed descriptor
//! (standing in for a remote connection), reads an 8-byte value x from
//! it, computes `f(x) = parallel_fib(fib_n) + (x mod 2)` and the results
//! are combined pairwise with `g = sum` over a balanced binary splitting
//! of the range. How the read happens depends on the mode: a blocking
//! syscall on the worker, a synchronously completed future, an inline
//! worker-driven reactor, or the full I/O-thread path.
//!
//! The result is verified against the sequential oracle on every run
//! before any timing is reported; a wrong result aborts the row.

use std::os::fd::AsRawFd;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use lathide_runtime::{
    frame, Frame, JoinCounter, Program, Runtime, SchedCounters, Slot, Step, TimedFd,
};

use crate::config::{has_smt_siblings, BenchConfig, Mode};

/// One benchmark measurement: configuration echo, wall-clock statistics,
/// and the scheduler counters of the last repetition.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub mode: Mode,
    pub connections: u32,
    pub latency_ms: f64,
    pub fib_n: u64,
    pub serial_base: u64,
    pub workers: usize,
    pub reps: u32,
    pub seed: u64,
    pub mean_s: f64,
    pub stddev_s: f64,
    /// Wall-time of a stored one-worker blocking baseline over this
    /// row's mean, when a baseline was supplied.
    pub speedup: Option<f64>,
    /// This row's mean over the ideal-mode mean (overhead suite only).
    pub vs_ideal: Option<f64>,
    pub result: u64,
    pub counters: SchedCounters,
    pub flagged: String,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "mode,n,latency_ms,fib_n,serial_base,workers,reps,seed,mean_s,stddev_s,speedup,vs_ideal,steal_attempts,successful_steals,suspensions,resumptions,inline_completions,io_wakeups,io_registrations,peak_pending_futures,result,flagged";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{:.6},{:.6},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.mode.name(),
            self.connections,
            self.latency_ms,
            self.fib_n,
            self.serial_base,
            self.workers,
            self.reps,
            self.seed,
            self.mean_s,
            self.stddev_s,
            opt(self.speedup),
            opt(self.vs_ideal),
            self.counters.steal_attempts,
            self.counters.successful_steals,
            self.counters.suspensions,
            self.counters.resumptions,
            self.counters.inline_completions,
            self.counters.io_wakeups,
            self.counters.io_registrations,
            self.counters.peak_pending_futures,
            self.result,
            self.flagged,
        )
    }
}

pub fn fib_serial(n: u64) -> u64 {
    if n < 2 {
        n
    } else {
        fib_serial(n - 1) + fib_serial(n - 2)
    }
}

/// The sequential oracle: each one-shot timer reports exactly one
/// expiration, so every leaf contributes fib(fib_n) + 1.
pub fn mapreduce_oracle(cfg: &BenchConfig) -> u64 {
    cfg.connections as u64 * (fib_serial(cfg.fib_n) + 1)
}

/// A runnable parallel fib program, the benchmark's compute payload.
pub fn fib_program(n: u64, base: u64) -> Program<u64> {
    Program::new(move |out| fib_frame(n, base, out, frame(|_| Step::Done)))
}

/// Parallel fib with a serial base case, continuation-passing.
fn fib_frame(n: u64, base: u64, out: Slot<u64>, k: Frame) -> Frame {
    frame(move |ctx| {
        if n <= base || n < 2 {
            out.set(fib_serial(n));
            return k(ctx);
        }
        let join = JoinCounter::new();
        let a = Slot::new();
        let b = Slot::new();
        let sync_cont = {
            let (a, b, out) = (a.clone(), b.clone(), out.clone());
            frame(move |ctx| {
                out.set(a.get() + b.get());
                k(ctx)
            })
        };
        let cont = {
            let join = join.clone();
            fib_frame(
                n - 2,
                base,
                b,
                frame(move |_| Step::Sync {
                    join,
                    cont: sync_cont,
                }),
            )
        };
        Step::Spawn {
            join,
            child: fib_frame(n - 1, base, a, frame(|_| Step::Done)),
            cont,
        }
    })
}

struct LeafParams {
    latency: Duration,
    fib_n: u64,
    serial_base: u64,
    mode: Mode,
    backend: lathide_runtime::Backend,
}

/// One connection: open the timed descriptor, read 8 bytes by whatever
/// route the mode prescribes, compute f, combine into `out`.
fn leaf_frame(p: Arc<LeafParams>, out: Slot<u64>, k: Frame) -> Frame {
    frame(move |ctx| {
        match p.mode {
            Mode::Blocking | Mode::Oversubscribed | Mode::Ideal => {
                // The baseline simply blocks the worker in the read.
                let t = TimedFd::new(p.latency, p.backend, false).expect("timed descriptor");
                let x = t.read_count().expect("timed read");
                let f = Slot::new();
                let combine = {
                    let (f, out) = (f.clone(), out.clone());
                    frame(move |ctx| {
                        out.set(f.get() + x % 2);
                        k(ctx)
                    })
                };
                fib_frame(p.fib_n, p.serial_base, f, combine)(ctx)
            }
            Mode::PlusFuture => {
                // Future created and completed synchronously: the future
                // task (left child) performs the read on this worker
                // before the continuation runs.
                let t = TimedFd::new(p.latency, p.backend, false).expect("timed descriptor");
                let handle = ctx.future_handle();
                let x = Slot::new();
                let f = Slot::new();
                let after_get = {
                    let (x, f, out) = (x.clone(), f.clone(), out.clone());
                    frame(move |ctx| {
                        out.set(f.get() + x.get() % 2);
                        k(ctx)
                    })
                };
                let h2 = handle.clone();
                let get_frame = frame(move |_| Step::Await {
                    handle: h2,
                    cont: after_get,
                });
                let fib = fib_frame(p.fib_n, p.serial_base, f, get_frame);
                Step::SpawnFuture {
                    handle,
                    child: {
                        let x = x.clone();
                        frame(move |_| {
                            x.set(t.read_count().expect("timed read"));
                            Step::Done
                        })
                    },
                    cont: fib,
                }
            }
            Mode::Iofutures | Mode::PlusEpoll | Mode::PlusIothread => {
                // Asynchronous read; the fib runs while the I/O is in
                // flight and the get joins the two.
                let t = TimedFd::new(p.latency, p.backend, true).expect("timed descriptor");
                let fut = ctx.read_async(t.as_raw_fd(), vec![0u8; 8], 8);
                let handle = fut.handle();
                let f = Slot::new();
                let after_get = {
                    let (f, out) = (f.clone(), out.clone());
                    frame(move |ctx| {
                        let c = fut.completion();
                        let x = u64::from_ne_bytes(
                            c.buffer[..8].try_into().expect("8-byte expiration count"),
                        );
                        out.set(f.get() + x % 2);
                        drop(t);
                        k(ctx)
                    })
                };
                let get_frame = frame(move |_| Step::Await {
                    handle,
                    cont: after_get,
                });
                fib_frame(p.fib_n, p.serial_base, f, get_frame)(ctx)
            }
        }
    })
}

/// Balanced binary splitting of [lo, hi): spawn the left half, run the
/// right half inline, sync, sum.
fn split_frame(lo: u32, hi: u32, p: Arc<LeafParams>, out: Slot<u64>, k: Frame) -> Frame {
    if hi - lo == 1 {
        return leaf_frame(p, out, k);
    }
    frame(move |_| {
        let mid = lo + (hi - lo) / 2;
        let join = JoinCounter::new();
        let a = Slot::new();
        let b = Slot::new();
        let sync_cont = {
            let (a, b, out) = (a.clone(), b.clone(), out.clone());
            frame(move |ctx| {
                out.set(a.get() + b.get());
                k(ctx)
            })
        };
        let cont = {
            let join = join.clone();
            split_frame(
                mid,
                hi,
                p.clone(),
                b,
                frame(move |_| Step::Sync {
                    join,
                    cont: sync_cont,
                }),
            )
        };
        Step::Spawn {
            join,
            child: split_frame(lo, mid, p.clone(), a, frame(|_| Step::Done)),
            cont,
        }
    })
}

pub fn mapreduce_program(cfg: &BenchConfig) -> Program<u64> {
    let params = Arc::new(LeafParams {
        latency: cfg.effective_latency(),
        fib_n: cfg.fib_n,
        serial_base: cfg.serial_base,
        mode: cfg.mode,
        backend: cfg.backend,
    });
    let n = cfg.connections;
    Program::new(move |out| split_frame(0, n, params, out, frame(|_| Step::Done)))
}

/// Run the benchmark on an existing runtime: one verified warmup, then
/// `reps` timed and verified repetitions. Returns the wall times and the
/// counters of the last repetition.
pub fn measure(
    rt: &Runtime,
    cfg: &BenchConfig,
) -> anyhow::Result<(Vec<Duration>, SchedCounters, u64)> {
    let oracle = mapreduce_oracle(cfg);
    let (warm, _) = rt
        .run(mapreduce_program(cfg))
        .map_err(|e| anyhow::anyhow!("warmup run failed: {e}"))?;
    if warm != oracle {
        bail!("result {warm} does not match the sequential oracle {oracle}; aborting row");
    }
    let mut times = Vec::with_capacity(cfg.reps as usize);
    let mut counters = SchedCounters::default();
    for rep in 0..cfg.reps {
        let program = mapreduce_program(cfg);
        let start = Instant::now();
        let (v, c) = rt
            .run(program)
            .map_err(|e| anyhow::anyhow!("rep {rep} failed: {e}"))?;
        times.push(start.elapsed());
        if v != oracle {
            bail!("rep {rep}: result {v} does not match the oracle {oracle}; aborting row");
        }
        counters = c;
    }
    Ok((times, counters, oracle))
}

pub fn mean_stddev(times: &[Duration]) -> (f64, f64) {
    let xs: Vec<f64> = times.iter().map(|d| d.as_secs_f64()).collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Build a runtime for the row, measure, and assemble the row.
pub fn run_mapreduce(cfg: &BenchConfig) -> anyhow::Result<BenchRow> {
    let rt = Runtime::new(cfg.runtime_config()).context("starting runtime")?;
    let (times, counters, result) = measure(&rt, cfg)?;
    let (mean_s, stddev_s) = mean_stddev(&times);
    let mut flagged = String::new();
    if cfg.mode == Mode::Oversubscribed && !has_smt_siblings() {
        flagged.push_str("no-smt-round-robin-pinning");
    }
    #[cfg(not(target_os = "linux"))]
    {
        flagged.push_str(if flagged.is_empty() { "" } else { ";" });
        flagged.push_str("portable-reactor-fallback");
    }
    Ok(BenchRow {
        mode: cfg.mode,
        connections: cfg.connections,
        latency_ms: cfg.effective_latency().as_secs_f64() * 1e3,
        fib_n: cfg.fib_n,
        serial_base: cfg.serial_base,
        workers: cfg.workers,
        reps: cfg.reps,
        seed: cfg.seed,
        mean_s,
        stddev_s,
        speedup: None,
        vs_ideal: None,
        result,
        counters,
        flagged,
    })
}
