//! Shared machinery behind the `bench` and `sim` binaries: the
//! map-reduce microbenchmark in its various modes, the overhead and
//! latency sweeps, and the simulator drivers.

pub mod config;
pub mod families;
pub mod mapreduce;
pub mod overhead;
pub mod simops;
pub mod sweep;

pub use config::{BenchConfig, Mode};
pub use mapreduce::{mapreduce_oracle, run_mapreduce, BenchRow};

use std::io::Write;
use std::path::Path;

/// Write CSV text to a file, or to stdout when the path is `-`.
pub fn write_output(path: &str, contents: &str) -> anyhow::Result<()> {
    if path == "-" {
        std::io::stdout().write_all(contents.as_bytes())?;
    } else {
        std::fs::write(Path::new(path), contents)?;
    }
    Ok(())
}
