//! Simulator driver.
//!
//! ```text
//! sim gen --depth 3 --fanout 2 --futures 8 --latency 5:40 --seed 7 --out dag.txt
//! sim run --dag dag.txt --workers 4 --policy proactive --seed 0
//! sim sweep --families io_mix,suspend_rich --worker-list 1,2,4,8,16 --seeds 30
//! sim check --runs 1000
//! ```

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use lathide_cli::{simops, write_output};
use lathide_dag::{GenParams, LatencyDist};
use lathide_sim::{bound_sweep, Policy, SimConfig};

#[derive(Parser)]
#[command(name = "sim", about = "Deterministic work-stealing scheduler simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random program-shaped DAG in the text format.
    Gen {
        #[arg(long, default_value_t = 3)]
        depth: u32,
        #[arg(long, default_value_t = 2)]
        fanout: u32,
        #[arg(long, default_value_t = 8)]
        futures: u32,
        /// Latency distribution: a fixed value `l`, or a range `a:b`.
        #[arg(long, default_value = "5:40")]
        latency: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Simulate a DAG file and print the report as CSV.
    Run {
        #[arg(long)]
        dag: String,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long, default_value = "proactive")]
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "-")]
        out: String,
        /// Also write the exact potential trace to this CSV file.
        #[arg(long = "potential-out")]
        potential_out: Option<String>,
    },
    /// Normalized steal/deviation sweep over worker counts.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "io_mix,suspend_rich")]
        families: Vec<String>,
        #[arg(long = "worker-list", value_delimiter = ',', default_value = "1,2,4,8,16")]
        worker_list: Vec<usize>,
        #[arg(long, default_value_t = 30)]
        seeds: u64,
        #[arg(long, default_value = "proactive")]
        policy: String,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Run the lemma property suites; exits nonzero on any violation.
    Check {
        #[arg(long, default_value_t = 200)]
        runs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_latency(s: &str) -> anyhow::Result<LatencyDist> {
    if let Some((a, b)) = s.split_once(':') {
        Ok(LatencyDist::Uniform(a.parse()?, b.parse()?))
    } else {
        Ok(LatencyDist::Fixed(s.parse()?))
    }
}

fn parse_policy(s: &str) -> anyhow::Result<Policy> {
    Policy::from_name(s).with_context(|| format!("unknown policy '{s}'"))
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Gen {
            depth,
            fanout,
            futures,
            latency,
            seed,
            out,
        } => {
            let params = GenParams {
                depth,
                fanout,
                future_count: futures,
                latency: parse_latency(&latency)?,
                seed,
            };
            let text = simops::gen_dag(&params)?;
            write_output(&out, &text)?;
        }
        Command::Run {
            dag,
            workers,
            policy,
            seed,
            out,
            potential_out,
        } => {
            let text = std::fs::read_to_string(&dag)
                .with_context(|| format!("reading DAG file {dag}"))?;
            let parsed = simops::load_dag(&text)?;
            let cfg = SimConfig::new(workers, parse_policy(&policy)?, seed);
            let (_, csv) = simops::run_one(&parsed, &dag, &cfg);
            write_output(&out, &csv)?;
            if let Some(path) = potential_out {
                write_output(&path, &simops::potential_csv(&parsed, &cfg))?;
            }
        }
        Command::Sweep {
            families,
            worker_list,
            seeds,
            policy,
            out,
        } => {
            let names: Vec<&str> = families.iter().map(|s| s.as_str()).collect();
            let dags = simops::sweep_dags(&names)?;
            let cells = bound_sweep(&dags, &worker_list, parse_policy(&policy)?, 0..seeds);
            write_output(&out, &simops::sweep_csv(&cells))?;
        }
        Command::Check { runs, seed } => {
            let outcome = simops::check(runs, seed);
            println!("{}", outcome.summary());
            if !outcome.ok() {
                bail!("lemma checks failed");
            }
        }
    }
    Ok(())
}
