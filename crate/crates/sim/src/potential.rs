//! Exact potential accounting.
//!
//! The ledger tracks the total potential incrementally as the engine
//! moves nodes between ready, assigned and pending-put status; the
//! recomputation from snapshots is the independent second route used to
//! cross-check it.

use std::collections::HashSet;

use lathide_dag::{potential, DepthTable, NodeId, NodeStatus, Potential};
use num_bigint::BigUint;

use crate::{ExecTrace, StepSnapshot};

pub(crate) struct PotentialLedger {
    span: u64,
    total: BigUint,
    /// Nodes currently counted at assigned weight.
    assigned: HashSet<NodeId>,
}

impl PotentialLedger {
    pub fn new(span: u64) -> PotentialLedger {
        PotentialLedger {
            span,
            total: BigUint::default(),
            assigned: HashSet::new(),
        }
    }

    pub fn total(&self) -> &BigUint {
        &self.total
    }

    fn weight(&self, depth: u64) -> i64 {
        self.span as i64 - depth as i64
    }

    fn value(&self, depth: u64, status: NodeStatus) -> BigUint {
        potential(self.weight(depth), status).expect("live node weight >= 1")
    }

    /// A node becomes assigned to a worker (executes next step).
    pub fn add_assigned(&mut self, node: NodeId, table: &DepthTable) {
        self.assigned.insert(node);
        self.total += self.value(table.depth(node), NodeStatus::Assigned);
    }

    /// A node becomes ready on some deque.
    pub fn add_ready(&mut self, node: NodeId, table: &DepthTable) {
        self.total += self.value(table.depth(node), NodeStatus::Ready);
    }

    /// A ready node leaves a deque to execute within the current step.
    pub fn ready_to_inflight(&mut self, node: NodeId, table: &DepthTable) {
        self.total -= self.value(table.depth(node), NodeStatus::Ready);
    }

    /// A node finished executing; release whatever weight it still holds.
    pub fn remove_inflight(&mut self, node: NodeId, table: &DepthTable) {
        if self.assigned.remove(&node) {
            self.total -= self.value(table.depth(node), NodeStatus::Assigned);
        }
    }

    /// A pending I/O put enters at its initial depth.
    pub fn add_pending(&mut self, depth: u64) {
        self.total += self.value(depth, NodeStatus::Ready);
    }

    /// One pending step elapsed: the put's depth slid down a level.
    pub fn tick_pending(&mut self, old_depth: u64, new_depth: u64) {
        self.total -= self.value(old_depth, NodeStatus::Ready);
        self.total += self.value(new_depth, NodeStatus::Ready);
    }

    /// The I/O completed; the put node leaves the system.
    pub fn remove_pending(&mut self, depth: u64) {
        self.total -= self.value(depth, NodeStatus::Ready);
    }
}

/// Recompute the potential sequence from per-step snapshots: assigned
/// nodes at `3^(2w-1)`, deque entries and pending puts at `3^(2w)` (puts
/// at their sliding depth). Independent of the engine's incremental
/// ledger; requires the trace to carry a snapshot for every step.
pub fn potential_trace_from_snapshots(
    trace: &ExecTrace,
    span: u64,
    table: &DepthTable,
) -> Vec<Potential> {
    trace
        .snapshots
        .iter()
        .map(|snap| snapshot_potential(snap, span, table))
        .collect()
}

fn snapshot_potential(snap: &StepSnapshot, span: u64, table: &DepthTable) -> Potential {
    let mut total = BigUint::default();
    for node in snap.assigned.iter().flatten() {
        let w = span as i64 - table.depth(*node) as i64;
        total += potential(w, NodeStatus::Assigned).expect("assigned weight");
    }
    for deque in &snap.deques {
        for node in &deque.entries {
            let w = span as i64 - table.depth(*node) as i64;
            total += potential(w, NodeStatus::Ready).expect("ready weight");
        }
    }
    for (_, depth) in &snap.pending_puts {
        let w = span as i64 - *depth as i64;
        total += potential(w, NodeStatus::Ready).expect("pending weight");
    }
    total
}
