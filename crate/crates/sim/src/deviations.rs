//! The sequential baseline order and deviation counting.
//!
//! A deviation is a point where a worker's execution order departs from
//! the one-worker order: worker-consecutive nodes that are not
//! consecutive in the baseline, plus each worker's first node unless it
//! is the root. A one-worker parsimonious run therefore has exactly zero
//! deviations.

use std::collections::HashMap;

use lathide_dag::{ComputationDag, NodeId};

use crate::{engine, ExecTrace, Policy, SimConfig};

/// The deterministic one-worker execution order: left child first,
/// pop-bottom on no-enable, I/O puts completed by the agent after their
/// latency. This is the deviation baseline for both policies.
pub fn sequential_order(dag: &ComputationDag) -> Vec<NodeId> {
    let cfg = SimConfig::new(1, Policy::Parsimonious, 0);
    let (_, trace) = engine::simulate_inner(dag, &cfg);
    trace.execs.iter().map(|r| r.node).collect()
}

/// Count deviations of `trace` against the baseline `seq`.
pub fn count_deviations(trace: &ExecTrace, seq: &[NodeId]) -> u64 {
    let index: HashMap<NodeId, usize> = seq.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let root = seq.first().copied();
    let mut last: HashMap<u32, usize> = HashMap::new();
    let mut deviations = 0;
    for rec in &trace.execs {
        let idx = index[&rec.node];
        match last.get(&rec.worker) {
            None => {
                // First node of this worker's trace: anything but the
                // root is a departure from the sequential prefix.
                if Some(rec.node) != root {
                    deviations += 1;
                }
            }
            Some(prev) => {
                if idx != prev + 1 {
                    deviations += 1;
                }
            }
        }
        last.insert(rec.worker, idx);
    }
    deviations
}
