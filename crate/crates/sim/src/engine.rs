//! The simulation step loop.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use lathide_dag::{depths, validate, ComputationDag, DepthTable, NodeId, NodeKind};
use lathide_deque::{DequePool, DequeState, StealResult, WsDeque};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::potential::PotentialLedger;
use crate::{
    count_deviations, sequential_order, DequeSnapshot, ExecRecord, ExecTrace, Policy, SimConfig,
    SimReport, StepSnapshot,
};

struct PendingPut {
    node: NodeId,
    /// Step at whose start the I/O agent completes this put.
    finish: u64,
    /// Sliding depth, ticked once per pending step, capped at `fd`.
    depth: u64,
    fd: u64,
}

struct VirtualWorker {
    pool: DequePool<NodeId>,
    active: Arc<WsDeque<NodeId>>,
    assigned: Option<NodeId>,
    rng: ChaCha8Rng,
}

struct Engine<'d> {
    dag: &'d ComputationDag,
    table: DepthTable,
    policy: Policy,
    workers: Vec<VirtualWorker>,
    remaining: Vec<u32>,
    executed: Vec<bool>,
    executed_count: usize,
    pending_puts: Vec<PendingPut>,
    /// FutureJoin -> suspended deque waiting on it (proactive).
    waiters: HashMap<NodeId, Arc<WsDeque<NodeId>>>,
    /// IoPut -> worker that executed its setup (parsimonious re-enable).
    issuer: HashMap<NodeId, usize>,
    /// FutureSpawns with an identified put node, and those puts: the
    /// pending-futures gauge counts between the two executions.
    paired_spawns: HashSet<NodeId>,
    put_nodes: HashSet<NodeId>,
    pending_futures: i64,
    clock: u64,
    ledger: Option<PotentialLedger>,
    trace: ExecTrace,
    report: SimReport,
}

/// Run one simulation, including the deviation count against the
/// sequential baseline. Panics on an invalid DAG; callers validate first
/// when the input is untrusted.
pub fn simulate(dag: &ComputationDag, cfg: &SimConfig) -> (SimReport, ExecTrace) {
    let (mut report, trace) = simulate_inner(dag, cfg);
    let seq = sequential_order(dag);
    report.deviations = count_deviations(&trace, &seq);
    (report, trace)
}

/// The raw engine without the deviation pass (which itself runs a
/// one-worker simulation for the baseline).
pub(crate) fn simulate_inner(dag: &ComputationDag, cfg: &SimConfig) -> (SimReport, ExecTrace) {
    assert!(cfg.workers >= 1);
    assert!(
        validate(dag).is_empty(),
        "simulate requires a structurally valid DAG"
    );
    let table = depths(dag);
    let span = dag.span();

    let n = dag.node_count();
    let mut remaining: Vec<u32> = vec![0; n];
    for e in dag.edges() {
        remaining[e.dst.index()] += 1;
    }

    let workers = (0..cfg.workers)
        .map(|id| {
            let pool = DequePool::new(id);
            let active = WsDeque::new(id);
            pool.replace_active(Some(active.clone()));
            VirtualWorker {
                pool,
                active,
                assigned: None,
                rng: ChaCha8Rng::seed_from_u64(
                    cfg.seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(id as u64 + 1),
                ),
            }
        })
        .collect();

    let (paired_spawns, put_nodes) = future_pairs(dag);
    let mut engine = Engine {
        dag,
        policy: cfg.policy,
        workers,
        remaining,
        executed: vec![false; n],
        executed_count: 0,
        pending_puts: Vec::new(),
        waiters: HashMap::new(),
        issuer: HashMap::new(),
        paired_spawns,
        put_nodes,
        pending_futures: 0,
        clock: 0,
        ledger: cfg.potential.then(|| PotentialLedger::new(span)),
        trace: ExecTrace::default(),
        report: SimReport::default(),
        table,
    };

    engine.run(cfg);
    let trace = std::mem::take(&mut engine.trace);
    (engine.report, trace)
}

impl Engine<'_> {
    fn run(&mut self, cfg: &SimConfig) {
        let total = self.dag.node_count();
        // The root starts out assigned to worker 0.
        self.workers[0].assigned = Some(self.dag.root());
        if let Some(ledger) = &mut self.ledger {
            ledger.add_assigned(self.dag.root(), &self.table);
            self.report.potential_trace.push(ledger.total().clone());
        }
        self.snapshot_if_due(cfg, 0);

        while self.executed_count < total {
            self.io_agent_phase();
            for w in 0..self.workers.len() {
                self.worker_step(w);
            }
            self.clock += 1;
            if let Some(ledger) = &self.ledger {
                self.report.potential_trace.push(ledger.total().clone());
            }
            self.classify_phase();
            self.snapshot_if_due(cfg, self.clock);
        }
        self.report.makespan = self.clock;
        debug_assert_eq!(
            self.report.worker_execs + self.report.io_completions,
            total as u64
        );
    }

    /// Complete due puts and tick the depths of the rest.
    fn io_agent_phase(&mut self) {
        let clock = self.clock;
        let mut due = Vec::new();
        let mut i = 0;
        while i < self.pending_puts.len() {
            if self.pending_puts[i].finish <= clock {
                due.push(self.pending_puts.swap_remove(i));
            } else {
                let p = &mut self.pending_puts[i];
                let old = p.depth;
                p.depth = (p.depth + 1).min(p.fd);
                if old != p.depth {
                    if let Some(ledger) = &mut self.ledger {
                        ledger.tick_pending(old, p.depth);
                    }
                }
                i += 1;
            }
        }
        due.sort_by_key(|p| p.node);
        for put in due {
            if let Some(ledger) = &mut self.ledger {
                ledger.remove_pending(put.depth);
            }
            self.executed[put.node.index()] = true;
            self.executed_count += 1;
            self.report.io_completions += 1;
            self.trace.io_completions.push((clock, put.node));
            self.note_put_executed(put.node);
            self.deliver_enabled(put.node, None);
        }
    }

    /// Handle children enabled by `done` finishing. `executor` names the
    /// worker that ran it, or `None` for the I/O agent.
    ///
    /// Worker-enabled children come back in edge (left-to-right) order;
    /// pending puts, waiter-bound future joins, and agent-enabled joins
    /// are routed directly.
    fn deliver_enabled(&mut self, done: NodeId, executor: Option<usize>) -> Vec<NodeId> {
        let mut local = Vec::new();
        let children: Vec<(NodeId, u64)> = self
            .dag
            .out_edges(done)
            .map(|e| (e.dst, e.weight))
            .collect();
        for (child, weight) in children {
            self.remaining[child.index()] -= 1;
            if self.remaining[child.index()] > 0 {
                continue;
            }
            if self.dag.kind(child) == NodeKind::IoPut {
                // Enters the I/O agent's world, not a deque.
                let id = self.table.initial_depth(child).expect("io put has depths");
                let fd = self.table.final_depth(child).expect("io put has depths");
                self.pending_puts.push(PendingPut {
                    node: child,
                    finish: self.clock + 1 + weight,
                    depth: id,
                    fd,
                });
                if let Some(executor) = executor {
                    self.issuer.insert(child, executor);
                }
                if let Some(ledger) = &mut self.ledger {
                    ledger.add_pending(id);
                }
                continue;
            }
            if self.dag.kind(child) == NodeKind::FutureJoin {
                if let Some(deque) = self.waiters.remove(&child) {
                    // The put side finished last: resume the suspended
                    // deque with the join node.
                    deque
                        .push_resume(child)
                        .expect("suspended waiter accepts the join node");
                    if let Some(ledger) = &mut self.ledger {
                        ledger.add_ready(child, &self.table);
                    }
                    continue;
                }
            }
            local.push(child);
        }
        match executor {
            Some(_) => local,
            None => {
                // I/O agent: under the proactive policy an agent-enabled
                // join always had a waiter; the parsimonious baseline
                // re-enables it onto the deque of the worker that issued
                // the I/O.
                for child in local.drain(..) {
                    let issuer = self.issuer.get(&done).copied().unwrap_or(0);
                    let deque = self.workers[issuer].active.clone();
                    deque.push_bottom(issuer, child);
                    if let Some(ledger) = &mut self.ledger {
                        ledger.add_ready(child, &self.table);
                    }
                }
                Vec::new()
            }
        }
    }

    fn worker_step(&mut self, w: usize) {
        // Acquire locally if idle: own bottom first, then mailbox and own
        // resumable deques. Local acquisition is free; the step is spent
        // executing.
        if self.workers[w].assigned.is_none() {
            self.workers[w].assigned = self.acquire_local(w);
        }
        match self.workers[w].assigned.take() {
            Some(node) => self.execute(w, node),
            None => {
                if let Some(node) = self.steal_attempt(w) {
                    // The attempt consumed this step; the node runs next.
                    self.workers[w].assigned = Some(node);
                    if let Some(ledger) = &mut self.ledger {
                        ledger.add_assigned(node, &self.table);
                    }
                }
            }
        }
    }

    fn acquire_local(&mut self, w: usize) -> Option<NodeId> {
        if let Some(node) = self.workers[w].active.pop_bottom(w) {
            if let Some(ledger) = &mut self.ledger {
                ledger.ready_to_inflight(node, &self.table);
            }
            return Some(node);
        }
        self.workers[w].pool.drain_mailbox();
        if let Some(d) = self.workers[w].pool.take_own_resumable(w) {
            self.report.resumptions += 1;
            self.workers[w].pool.replace_active(Some(d.clone()));
            self.workers[w].active = d.clone();
            if let Some(node) = d.pop_bottom(w) {
                if let Some(ledger) = &mut self.ledger {
                    ledger.ready_to_inflight(node, &self.table);
                }
                return Some(node);
            }
        }
        None
    }

    fn execute(&mut self, w: usize, node: NodeId) {
        debug_assert!(
            self.dag.parents(node).all(|p| self.executed[p.index()]),
            "precedence violation at node {node}"
        );
        self.executed[node.index()] = true;
        self.executed_count += 1;
        self.report.worker_execs += 1;
        self.trace.execs.push(ExecRecord {
            step: self.clock,
            worker: w as u32,
            node,
        });
        if let Some(ledger) = &mut self.ledger {
            ledger.remove_inflight(node, &self.table);
        }
        if self.paired_spawns.contains(&node) {
            self.pending_futures += 1;
            self.report.peak_pending_futures = self
                .report
                .peak_pending_futures
                .max(self.pending_futures as u64);
        }
        self.note_put_executed(node);

        let enabled = self.deliver_enabled(node, Some(w));
        match enabled.as_slice() {
            [] => {
                if self.policy == Policy::Proactive {
                    self.maybe_suspend(w, node);
                }
            }
            [only] => {
                self.workers[w].assigned = Some(*only);
                if let Some(ledger) = &mut self.ledger {
                    ledger.add_assigned(*only, &self.table);
                }
            }
            [left, right] => {
                self.workers[w].assigned = Some(*left);
                let active = self.workers[w].active.clone();
                active.push_bottom(w, *right);
                if let Some(ledger) = &mut self.ledger {
                    ledger.add_assigned(*left, &self.table);
                    ledger.add_ready(*right, &self.table);
                }
            }
            more => unreachable!("out-degree <= 2, got {}", more.len()),
        }
    }

    /// Proactive blocked get: executing a get node whose future join is
    /// not yet enabled suspends the active deque.
    fn maybe_suspend(&mut self, w: usize, done: NodeId) {
        if self.dag.kind(done) != NodeKind::GetNode {
            return;
        }
        let Some(join) = self.dag.children(done).next() else {
            return;
        };
        if self.remaining[join.index()] == 0 || self.dag.kind(join) != NodeKind::FutureJoin {
            return;
        }
        let deque = self.workers[w].active.clone();
        deque.suspend(w).expect("active deque suspends");
        self.waiters.insert(join, deque.clone());
        self.report.suspensions += 1;
        self.workers[w].pool.retire_active();
        let p = self.workers.len();
        let target = if p == 1 {
            0
        } else {
            let mut t = self.workers[w].rng.gen_range(0..p - 1);
            if t >= w {
                t += 1;
            }
            t
        };
        match self.workers[target].pool.donate(deque) {
            Ok(()) => {}
            Err(lathide_deque::DonateError(d)) => self.workers[w].pool.add_inactive(d),
        }
        let fresh = WsDeque::new(w);
        self.workers[w].pool.replace_active(Some(fresh.clone()));
        self.workers[w].active = fresh;
    }

    fn steal_attempt(&mut self, w: usize) -> Option<NodeId> {
        self.workers[w].pool.drain_mailbox();
        self.report.steal_attempts += 1;
        let p = self.workers.len();
        let victim = self.workers[w].rng.gen_range(0..p);
        let own_active = self.workers[w].active.clone();
        let mut candidates = self.workers[victim].pool.stealable_deques();
        candidates.retain(|d| !Arc::ptr_eq(d, &own_active));
        if candidates.is_empty() {
            return None;
        }
        let pick = self.workers[w].rng.gen_range(0..candidates.len());
        let d = candidates[pick].clone();
        if d.state() == DequeState::Resumable {
            if d.try_adopt(w) {
                self.workers[victim].pool.remove_inactive(&d);
                self.report.successful_steals += 1;
                self.report.resumptions += 1;
                self.workers[w].pool.replace_active(Some(d.clone()));
                self.workers[w].active = d.clone();
                let node = d.pop_bottom(w)?;
                if let Some(ledger) = &mut self.ledger {
                    ledger.ready_to_inflight(node, &self.table);
                }
                return Some(node);
            }
            return None;
        }
        match d.steal_top(w) {
            StealResult::Stolen(node) => {
                self.report.successful_steals += 1;
                if let Some(ledger) = &mut self.ledger {
                    ledger.ready_to_inflight(node, &self.table);
                }
                Some(node)
            }
            StealResult::Empty | StealResult::LostRace => None,
        }
    }

    /// The pending-futures gauge drops when a put-side node executes.
    fn note_put_executed(&mut self, node: NodeId) {
        if self.put_nodes.contains(&node) {
            self.pending_futures -= 1;
        }
    }

    fn classify_phase(&mut self) {
        let p = self.workers.len() as u64;
        let per_worker: Vec<usize> = self
            .workers
            .iter()
            .map(|w| w.pool.stealable_count())
            .collect();
        let stealable: usize = per_worker.iter().sum();
        if stealable as u64 > 3 * p {
            self.report.work_bounded_steps += 1;
        } else {
            self.report.steal_bounded_steps += 1;
            if stealable >= 10 {
                let max_per_worker = per_worker.iter().copied().max().unwrap_or(0);
                let bound = stealable as f64 / p as f64 + 4.0 * (p as f64).log2();
                self.report.balance.samples += 1;
                if (max_per_worker as f64) <= bound {
                    self.report.balance.within_bound += 1;
                }
            }
        }
    }

    fn snapshot_if_due(&mut self, cfg: &SimConfig, step: u64) {
        let Some(every) = cfg.snapshot_every else {
            return;
        };
        if every == 0 || step % every != 0 {
            return;
        }
        let mut deques = Vec::new();
        for (holder, w) in self.workers.iter().enumerate() {
            if let Some(a) = w.pool.active() {
                deques.push(snapshot_deque(holder, &a));
            }
            for d in w.pool.inactive_deques() {
                deques.push(snapshot_deque(holder, &d));
            }
            // Donated deques in transit still hold live potential.
            for d in w.pool.mailbox_deques() {
                deques.push(snapshot_deque(holder, &d));
            }
        }
        self.trace.snapshots.push(StepSnapshot {
            step,
            assigned: self.workers.iter().map(|w| w.assigned).collect(),
            deques,
            pending_puts: self
                .pending_puts
                .iter()
                .map(|p| (p.node, p.depth))
                .collect(),
        });
    }
}

fn snapshot_deque(holder: usize, d: &Arc<WsDeque<NodeId>>) -> DequeSnapshot {
    DequeSnapshot {
        holder,
        deque_id: d.id(),
        state: d.state(),
        stealable: d.is_stealable(),
        entries: d.snapshot(),
    }
}

/// Identify each future task's put-side node by walking the single-out
/// chain from the FutureSpawn's left child. Futures whose task branches
/// are left out of the gauge (it is a proxy measurement, not asserted).
fn future_pairs(dag: &ComputationDag) -> (HashSet<NodeId>, HashSet<NodeId>) {
    let mut spawns = HashSet::new();
    let mut puts = HashSet::new();
    for (id, kind) in dag.nodes() {
        if kind != NodeKind::FutureSpawn {
            continue;
        }
        let Some(first) = dag.children(id).next() else {
            continue;
        };
        let mut cur = first;
        let mut steps = 0;
        let put = loop {
            steps += 1;
            if steps > dag.node_count() {
                break None;
            }
            match dag.kind(cur) {
                NodeKind::IoPut => break Some(cur),
                NodeKind::FutureJoin => break None,
                _ => {
                    let mut children = dag.children(cur);
                    let (first_child, extra) = (children.next(), children.next());
                    match (first_child, extra) {
                        (Some(only), None) => {
                            if dag.kind(only) == NodeKind::FutureJoin {
                                // `cur` is an ordinary put node.
                                break Some(cur);
                            }
                            cur = only;
                        }
                        _ => break None,
                    }
                }
            }
        };
        if let Some(put) = put {
            spawns.insert(id);
            puts.insert(put);
        }
    }
    (spawns, puts)
}
