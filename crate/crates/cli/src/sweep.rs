//! Latency, core, and break-even sweeps of the map-reduce benchmark.

use std::time::Duration;

use crate::config::{BenchConfig, Mode};
use crate::mapreduce::{run_mapreduce, BenchRow};

pub const LATENCIES_MS: [u64; 6] = [1, 5, 10, 50, 100, 500];

/// The three series the latency/core figures compare.
const SERIES: [Mode; 3] = [Mode::Blocking, Mode::Oversubscribed, Mode::Iofutures];

/// One-worker blocking baseline at the sweep's latency, for speedups.
fn baseline(base: &BenchConfig, latency: Duration) -> anyhow::Result<f64> {
    let cfg = BenchConfig {
        mode: Mode::Blocking,
        workers: 1,
        latency,
        ..base.clone()
    };
    Ok(run_mapreduce(&cfg)?.mean_s)
}

/// Sweep the paper's latency points at a fixed worker count.
pub fn latency_sweep(base: &BenchConfig, latencies_ms: &[u64]) -> anyhow::Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &ms in latencies_ms {
        let latency = Duration::from_millis(ms);
        let t1 = baseline(base, latency)?;
        for mode in SERIES {
            let cfg = BenchConfig {
                mode,
                latency,
                ..base.clone()
            };
            let mut row = run_mapreduce(&cfg)?;
            row.speedup = Some(t1 / row.mean_s);
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Sweep worker counts at the configured latency.
pub fn core_sweep(base: &BenchConfig, workers: &[usize]) -> anyhow::Result<Vec<BenchRow>> {
    let t1 = baseline(base, base.latency)?;
    let mut rows = Vec::new();
    for &p in workers {
        for mode in SERIES {
            let cfg = BenchConfig {
                mode,
                workers: p,
                ..base.clone()
            };
            let mut row = run_mapreduce(&cfg)?;
            row.speedup = Some(t1 / row.mean_s);
            rows.push(row);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy)]
pub struct Breakeven {
    pub crossover_ms: f64,
    pub bracket_lo_ms: f64,
    pub bracket_hi_ms: f64,
}

/// Bisect the latency where the I/O-future build stops losing to
/// oversubscription. Below the crossover the oversubscribed baseline
/// wins (latency too short to be worth hiding); above it the futures
/// win.
pub fn breakeven(base: &BenchConfig, lo_ms: f64, hi_ms: f64, iters: u32) -> anyhow::Result<Breakeven> {
    let faster_futures = |ms: f64| -> anyhow::Result<bool> {
        let latency = Duration::from_secs_f64(ms / 1e3);
        let io = run_mapreduce(&BenchConfig {
            mode: Mode::Iofutures,
            latency,
            ..base.clone()
        })?;
        let over = run_mapreduce(&BenchConfig {
            mode: Mode::Oversubscribed,
            latency,
            ..base.clone()
        })?;
        Ok(io.mean_s <= over.mean_s)
    };
    let (mut lo, mut hi) = (lo_ms, hi_ms);
    for _ in 0..iters {
        let mid = (lo * hi).sqrt();
        if faster_futures(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Breakeven {
        crossover_ms: (lo * hi).sqrt(),
        bracket_lo_ms: lo,
        bracket_hi_ms: hi,
    })
}
