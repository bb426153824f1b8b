//! Drivers behind the `sim` subcommands, reusable from tests.

use anyhow::{bail, Context};
use lathide_dag::{
    depths, generate_random_dag, parse, potential, serialize, validate, ComputationDag,
    GenParams, NodeStatus, Potential,
};
use lathide_sim::{simulate, Policy, SimConfig, SimReport, SweepCell};

use crate::families;

pub fn gen_dag(params: &GenParams) -> anyhow::Result<String> {
    let dag = generate_random_dag(params).context("generating DAG")?;
    Ok(serialize(&dag))
}

pub fn load_dag(text: &str) -> anyhow::Result<ComputationDag> {
    let dag = parse(text).context("parsing DAG text")?;
    let violations = validate(&dag);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        bail!("invalid DAG:\n  {}", list.join("\n  "));
    }
    Ok(dag)
}

/// Run one simulation and render the report as CSV (header + row).
pub fn run_one(
    dag: &ComputationDag,
    dag_id: &str,
    cfg: &SimConfig,
) -> (SimReport, String) {
    let (report, _) = simulate(dag, cfg);
    let csv = format!(
        "{}\n{}\n",
        SimReport::CSV_HEADER,
        report.csv_row(dag_id, cfg)
    );
    (report, csv)
}

/// The potential trace as CSV: exact decimal plus a log3 view.
pub fn potential_csv(dag: &ComputationDag, cfg: &SimConfig) -> String {
    let cfg = cfg.clone().with_potential();
    let (report, _) = simulate(dag, &cfg);
    let mut out = String::from("step,potential,log3\n");
    for (i, p) in report.potential_trace.iter().enumerate() {
        let log3 = lathide_dag::log3_approx(p);
        let log3 = if log3.is_finite() {
            format!("{log3:.3}")
        } else {
            String::new()
        };
        out.push_str(&format!("{i},{p},{log3}\n"));
    }
    out
}

/// Representative instance per family for the normalized sweeps; the
/// generation seed is fixed so work and span are constants per cell.
pub fn sweep_dags(family_names: &[&str]) -> anyhow::Result<Vec<(String, ComputationDag)>> {
    let mut out = Vec::new();
    for name in family_names {
        let family =
            families::by_name(name).with_context(|| format!("unknown family '{name}'"))?;
        out.push((family.name.to_string(), family.instance(1000)));
    }
    Ok(out)
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from(SweepCell::CSV_HEADER);
    out.push('\n');
    for cell in cells {
        out.push_str(&cell.csv_row());
        out.push('\n');
    }
    out
}

/// Outcome of the lemma check suite.
#[derive(Debug, Default)]
pub struct CheckOutcome {
    pub runs: u64,
    pub potential_violations: u64,
    pub endpoint_violations: u64,
    pub conservation_violations: u64,
    pub ordering_violations: u64,
    pub balance_samples: u64,
    pub balance_within: u64,
    /// Measured top-node potential share on future-bearing snapshots
    /// (reported, not asserted).
    pub future_top_share_min: f64,
}

impl CheckOutcome {
    pub fn ok(&self) -> bool {
        self.potential_violations == 0
            && self.endpoint_violations == 0
            && self.conservation_violations == 0
            && self.ordering_violations == 0
            && (self.balance_samples == 0
                || self.balance_within as f64 >= 0.95 * self.balance_samples as f64)
    }

    pub fn summary(&self) -> String {
        format!(
            "runs={} potential_violations={} endpoint_violations={} conservation_violations={} \
             fork_join_ordering_violations={} balance={}/{} future_top_share_min={:.3}",
            self.runs,
            self.potential_violations,
            self.endpoint_violations,
            self.conservation_violations,
            self.ordering_violations,
            self.balance_within,
            self.balance_samples,
            self.future_top_share_min,
        )
    }
}

/// The property suites behind `sim check`: potential monotonicity and
/// endpoints over seeded proactive runs on mixed families, node
/// conservation, fork-join depth ordering, and deque balance.
pub fn check(runs: u64, seed_base: u64) -> CheckOutcome {
    let mut outcome = CheckOutcome {
        future_top_share_min: 1.0,
        ..Default::default()
    };
    for i in 0..runs {
        let seed = seed_base + i;
        let family = match i % 3 {
            0 => families::FORK_JOIN,
            1 => families::IO_MIX,
            _ => families::SUSPEND_RICH,
        };
        let dag = family.instance(seed);
        let span = dag.span();
        let workers = 1 + (seed % 8) as usize;
        let cfg = SimConfig::new(workers, Policy::Proactive, seed).with_potential();
        let (report, trace) = simulate(&dag, &cfg);
        outcome.runs += 1;

        let trace_p = &report.potential_trace;
        let initial = potential(span as i64, NodeStatus::Assigned).expect("span weight");
        if trace_p.first() != Some(&initial) || *trace_p.last().unwrap() != Potential::default() {
            outcome.endpoint_violations += 1;
        }
        if trace_p.windows(2).any(|w| w[1] > w[0]) {
            outcome.potential_violations += 1;
        }

        let mut counts = vec![0u32; dag.node_count()];
        for r in &trace.execs {
            counts[r.node.index()] += 1;
        }
        for (_, n) in &trace.io_completions {
            counts[n.index()] += 1;
        }
        if counts.iter().any(|&c| c != 1) {
            outcome.conservation_violations += 1;
        }

        outcome.balance_samples += report.balance.samples;
        outcome.balance_within += report.balance.within_bound;
    }

    // Depth ordering on fork-join-only snapshots, and the measured (not
    // asserted) top-node share for future-bearing runs.
    let table_runs = runs.min(100);
    for i in 0..table_runs {
        let seed = seed_base * 31 + i;
        let dag = families::FORK_JOIN.instance(seed);
        let table = depths(&dag);
        let cfg = SimConfig::new(4, Policy::Proactive, seed).with_snapshots(1);
        let (_, trace) = simulate(&dag, &cfg);
        for snap in &trace.snapshots {
            for deque in &snap.deques {
                if deque
                    .entries
                    .windows(2)
                    .any(|w| table.depth(w[0]) >= table.depth(w[1]))
                {
                    outcome.ordering_violations += 1;
                }
            }
        }

        let dag = families::IO_MIX.instance(seed);
        let table = depths(&dag);
        let span = dag.span();
        let (_, trace) = simulate(&dag, &SimConfig::new(4, Policy::Proactive, seed).with_snapshots(4));
        for snap in &trace.snapshots {
            for deque in &snap.deques {
                if deque.entries.len() < 2 {
                    continue;
                }
                let value = |n: &lathide_dag::NodeId| {
                    potential(span as i64 - table.depth(*n) as i64, NodeStatus::Ready)
                        .expect("ready weight")
                };
                let top = value(&deque.entries[0]);
                let total: lathide_dag::Potential = deque.entries.iter().map(|n| value(n)).sum();
                let share = lathide_dag::log3_approx(&top) - lathide_dag::log3_approx(&total);
                // Convert the log-ratio back to a linear share estimate.
                let share = 3f64.powf(share);
                if share < outcome.future_top_share_min {
                    outcome.future_top_share_min = share;
                }
            }
        }
    }
    outcome
}
