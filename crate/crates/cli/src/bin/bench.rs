//! Map-reduce benchmark harness.
//!
//! ```text
//! bench mapreduce --n 64 --latency-ms 50 --fib 25 --base 15 \
//!     --workers 4 --mode iofutures --reps 10 --seed 0 --out -
//! bench overhead --n 64 --fib 25 --workers 1,2,4 --out -
//! bench sweep --kind latency --workers 4 --out results.csv
//! ```
//!
//! `LATHIDE_WORKERS` and `LATHIDE_SEED` provide defaults; flags win.

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lathide_cli::config::{default_seed, default_workers, BenchConfig, Mode};
use lathide_cli::mapreduce::{run_mapreduce, BenchRow};
use lathide_cli::{overhead, sweep, write_output};

#[derive(Parser)]
#[command(name = "bench", about = "Latency-hiding map-reduce benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Emulated connections.
    #[arg(long, default_value_t = 64)]
    n: u32,
    /// Simulated I/O latency in milliseconds.
    #[arg(long = "latency-ms", default_value_t = 50.0)]
    latency_ms: f64,
    /// Fibonacci payload size.
    #[arg(long = "fib", default_value_t = 25)]
    fib_n: u64,
    /// Serial base case of the payload.
    #[arg(long = "base", default_value_t = 15)]
    serial_base: u64,
    /// Cores (defaults to LATHIDE_WORKERS, then the host).
    #[arg(long)]
    workers: Option<usize>,
    /// Timed repetitions per row.
    #[arg(long, default_value_t = 10)]
    reps: u32,
    /// RNG seed (defaults to LATHIDE_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Reactor backend.
    #[arg(long, default_value = "native")]
    reactor: String,
    /// Output file; `-` streams to stdout.
    #[arg(long, default_value = "-")]
    out: String,
}

impl CommonArgs {
    fn to_config(&self, mode: Mode) -> anyhow::Result<BenchConfig> {
        let backend = match self.reactor.as_str() {
            "native" => default_native(),
            "portable" => lathide_runtime::Backend::Portable,
            other => anyhow::bail!("unknown reactor backend '{other}'"),
        };
        Ok(BenchConfig {
            connections: self.n,
            latency: std::time::Duration::from_secs_f64(self.latency_ms / 1e3),
            fib_n: self.fib_n,
            serial_base: self.serial_base,
            workers: self.workers.unwrap_or_else(default_workers),
            mode,
            reps: self.reps,
            seed: self.seed.unwrap_or_else(default_seed),
            backend,
        })
    }
}

#[cfg(target_os = "linux")]
fn default_native() -> lathide_runtime::Backend {
    lathide_runtime::Backend::Native
}

#[cfg(not(target_os = "linux"))]
fn default_native() -> lathide_runtime::Backend {
    // Requested native but the platform has no native facility: fall
    // back to the portable backend (rows carry a flag).
    lathide_runtime::Backend::Portable
}

#[derive(Subcommand)]
enum Command {
    /// One benchmark row in a chosen mode.
    Mapreduce {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "iofutures")]
        mode: Mode,
        /// Stored one-worker blocking wall time, for the speedup column.
        #[arg(long = "baseline-secs")]
        baseline_secs: Option<f64>,
        /// Dump the scheduler counters as key=value text on stderr.
        #[arg(long = "dump-counters")]
        dump_counters: bool,
    },
    /// Overhead breakdown at effectively zero latency.
    Overhead {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker counts to cover (comma separated).
        #[arg(long = "worker-list", default_value = "1,2,4", value_delimiter = ',')]
        worker_list: Vec<usize>,
    },
    /// Latency, core-count, or break-even sweeps.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_parser = ["latency", "cores", "breakeven"])]
        kind: String,
        /// Latency points in ms for the latency sweep.
        #[arg(long = "latencies-ms", value_delimiter = ',')]
        latencies_ms: Option<Vec<u64>>,
        /// Worker counts for the core sweep.
        #[arg(long = "worker-list", value_delimiter = ',')]
        worker_list: Option<Vec<usize>>,
        /// Break-even search bracket in ms.
        #[arg(long, default_value_t = 1.0)]
        breakeven_lo_ms: f64,
        #[arg(long, default_value_t = 64.0)]
        breakeven_hi_ms: f64,
    },
}

fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BenchRow::CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_row());
        out.push('\n');
    }
    out
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Mapreduce {
            common,
            mode,
            baseline_secs,
        } => {
            let cfg = common.to_config(mode)?;
            let mut row = run_mapreduce(&cfg).context("mapreduce row")?;
            if let Some(t1) = baseline_secs {
                row.speedup = Some(t1 / row.mean_s);
            }
            write_output(&common.out, &rows_to_csv(&[row]))?;
        }
        Command::Overhead {
            common,
            worker_list,
        } => {
            let base = common.to_config(Mode::Ideal)?;
            let rows = overhead::overhead_suite(&base, &worker_list)?;
            write_output(&common.out, &rows_to_csv(&rows))?;
        }
        Command::Sweep {
            common,
            kind,
            latencies_ms,
            worker_list,
            breakeven_lo_ms,
            breakeven_hi_ms,
        } => {
            let base = common.to_config(Mode::Iofutures)?;
            match kind.as_str() {
                "latency" => {
                    let points = latencies_ms.unwrap_or_else(|| sweep::LATENCIES_MS.to_vec());
                    let rows = sweep::latency_sweep(&base, &points)?;
                    write_output(&common.out, &rows_to_csv(&rows))?;
                }
                "cores" => {
                    let workers = worker_list.unwrap_or_else(|| {
                        let max = default_workers();
                        (1..=max).collect()
                    });
                    let rows = sweep::core_sweep(&base, &workers)?;
                    write_output(&common.out, &rows_to_csv(&rows))?;
                }
                "breakeven" => {
                    let be = sweep::breakeven(&base, breakeven_lo_ms, breakeven_hi_ms, 6)?;
                    let csv = format!(
                        "breakeven_ms,bracket_lo_ms,bracket_hi_ms\n{:.3},{:.3},{:.3}\n",
                        be.crossover_ms, be.bracket_lo_ms, be.bracket_hi_ms
                    );
                    write_output(&common.out, &csv)?;
                }
                _ => unreachable!("clap validates the kind"),
            }
        }
    }
    Ok(())
}
