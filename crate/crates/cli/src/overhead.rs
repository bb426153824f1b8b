//! Overhead breakdown at effectively zero latency: ideal (blocking
//! baseline, no latency-hiding machinery), +future (handles completed
//! synchronously), +epoll (worker-driven reactor), +IO thread (the full
//! system). Each mode's mean is reported relative to ideal at the same
//! worker count.

use std::time::Duration;

use crate::config::{BenchConfig, Mode};
use crate::mapreduce::{run_mapreduce, BenchRow};

pub const MODES: [Mode; 4] = [
    Mode::Ideal,
    Mode::PlusFuture,
    Mode::PlusEpoll,
    Mode::PlusIothread,
];

/// Run the four modes over the given worker counts. The latency is
/// forced to the minimum granularity regardless of `base.latency`.
pub fn overhead_suite(base: &BenchConfig, workers: &[usize]) -> anyhow::Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &p in workers {
        let mut ideal_mean = None;
        for mode in MODES {
            let cfg = BenchConfig {
                mode,
                workers: p,
                latency: Duration::ZERO,
                ..base.clone()
            };
            let mut row = run_mapreduce(&cfg)?;
            match mode {
                Mode::Ideal => ideal_mean = Some(row.mean_s),
                _ => {
                    if let Some(ideal) = ideal_mean {
                        row.vs_ideal = Some(row.mean_s / ideal);
                    }
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}
