//! Seeded random program-shaped DAGs.
//!
//! The generator emits the DAG of a synthetic task-parallel program: a
//! spawn tree of the requested depth and fanout whose bodies optionally
//! create future tasks and get them later. Future tasks with a nonzero
//! latency are I/O futures (their task ends in an IoSetup with a heavy
//! edge to the IoPut); latency zero produces an ordinary future whose put
//! is a plain node. The same seed always reproduces the same DAG,
//! byte-for-byte under [`crate::serialize`].

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::{ComputationDag, DagBuilder, NodeId, NodeKind};

/// Latency distribution for generated I/O futures. Draws of zero produce
/// ordinary (non-I/O) futures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatencyDist {
    Fixed(u64),
    /// Inclusive range.
    Uniform(u64, u64),
}

impl LatencyDist {
    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        match *self {
            LatencyDist::Fixed(l) => l,
            LatencyDist::Uniform(a, b) => rng.gen_range(a..=b),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GenParams {
    /// Nesting depth of the spawn tree (0 = a single leaf body).
    pub depth: u32,
    /// Spawn blocks per body.
    pub fanout: u32,
    /// Exact number of future tasks to place.
    pub future_count: u32,
    pub latency: LatencyDist,
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("fanout must be at least 1")]
    ZeroFanout,
    #[error("uniform latency range {0}..={1} is empty")]
    EmptyLatencyRange(u64, u64),
    #[error("future_count {requested} exceeds capacity {capacity} for this shape")]
    Infeasible { requested: u64, capacity: u64 },
}

struct Gen {
    b: DagBuilder,
    rng: ChaCha8Rng,
    fanout: u32,
    chosen_slots: HashSet<u64>,
    next_body: u64,
    latency: LatencyDist,
}

/// Number of bodies in a full spawn tree of the given shape.
fn body_count(depth: u32, fanout: u32) -> u64 {
    let mut total = 0u64;
    let mut level = 1u64;
    for _ in 0..=depth {
        total = total.saturating_add(level);
        level = level.saturating_mul(fanout as u64);
    }
    total
}

pub fn generate_random_dag(params: &GenParams) -> Result<ComputationDag, GenError> {
    if params.fanout == 0 {
        return Err(GenError::ZeroFanout);
    }
    if let LatencyDist::Uniform(a, b) = params.latency {
        if a > b {
            return Err(GenError::EmptyLatencyRange(a, b));
        }
    }
    // Each body offers one future slot per block position.
    let capacity = body_count(params.depth, params.fanout) * params.fanout as u64;
    if params.future_count as u64 > capacity {
        return Err(GenError::Infeasible {
            requested: params.future_count as u64,
            capacity,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut slots: Vec<u64> = (0..capacity).collect();
    slots.shuffle(&mut rng);
    let chosen_slots: HashSet<u64> = slots
        .into_iter()
        .take(params.future_count as usize)
        .collect();

    let mut gen = Gen {
        b: DagBuilder::new(),
        rng,
        fanout: params.fanout,
        chosen_slots,
        next_body: 0,
        latency: params.latency,
    };
    gen.body(params.depth);
    Ok(gen.b.build())
}

impl Gen {
    /// Emit one function body; returns (entry, exit).
    fn body(&mut self, level: u32) -> (NodeId, NodeId) {
        let body_idx = self.next_body;
        self.next_body += 1;

        let entry = self.b.node(NodeKind::Regular);
        let mut cur = entry;
        let mut spawned_exits: Vec<NodeId> = Vec::new();

        for block in 0..self.fanout {
            // Stretch the serial chain a little so deques have material.
            for _ in 0..self.rng.gen_range(0..=1) {
                cur = self.chain(cur, NodeKind::Regular);
            }

            if level > 0 {
                let spawn = self.chain(cur, NodeKind::Spawn);
                let (child_entry, child_exit) = self.body(level - 1);
                // Left child first: the spawned function.
                self.b.edge(spawn, child_entry);
                let cont = self.b.node(NodeKind::Regular);
                self.b.edge(spawn, cont);
                cur = cont;
                spawned_exits.push(child_exit);
            }

            let slot = body_idx * self.fanout as u64 + block as u64;
            if self.chosen_slots.contains(&slot) {
                cur = self.future_block(cur);
            }
        }

        if !spawned_exits.is_empty() {
            let join = self.b.node(NodeKind::SyncJoin);
            self.b.edge(cur, join);
            for exit in spawned_exits {
                self.b.edge(exit, join);
            }
            cur = join;
        }

        for _ in 0..self.rng.gen_range(0..=1) {
            cur = self.chain(cur, NodeKind::Regular);
        }
        (entry, cur)
    }

    /// Emit a future-create / work / get sequence; returns the new cursor
    /// (the future join node).
    fn future_block(&mut self, cur: NodeId) -> NodeId {
        let latency = self.latency.sample(&mut self.rng);
        let fs = self.chain(cur, NodeKind::FutureSpawn);

        // Future task: a short chain, ending in an I/O setup when the
        // future carries latency.
        let task_entry = self.b.node(NodeKind::Regular);
        let mut task_cur = task_entry;
        for _ in 0..self.rng.gen_range(0..=2) {
            task_cur = self.chain(task_cur, NodeKind::Regular);
        }
        let put_side = if latency > 0 {
            let setup = self.chain(task_cur, NodeKind::IoSetup);
            let put = self.b.node(NodeKind::IoPut);
            self.b.weighted_edge(setup, put, latency);
            put
        } else {
            task_cur
        };
        self.b.edge(fs, task_entry);

        // Continuation: some local work, then the get.
        let cont = self.b.node(NodeKind::Regular);
        self.b.edge(fs, cont);
        let mut local = cont;
        for _ in 0..self.rng.gen_range(0..=2) {
            local = self.chain(local, NodeKind::Regular);
        }
        let get = self.chain(local, NodeKind::GetNode);
        let join = self.b.node(NodeKind::FutureJoin);
        self.b.edge(get, join);
        self.b.edge(put_side, join);
        join
    }

    fn chain(&mut self, from: NodeId, kind: NodeKind) -> NodeId {
        let n = self.b.node(kind);
        self.b.edge(from, n);
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{serialize, validate};

    fn params(depth: u32, fanout: u32, futures: u32, seed: u64) -> GenParams {
        GenParams {
            depth,
            fanout,
            future_count: futures,
            latency: LatencyDist::Uniform(0, 30),
            seed,
        }
    }

    #[test]
    fn no_futures_gives_valid_fork_join_dag() {
        let dag = generate_random_dag(&params(3, 2, 0, 7)).unwrap();
        assert!(validate(&dag).is_empty());
        assert!(dag
            .nodes()
            .all(|(_, k)| !matches!(k, NodeKind::FutureSpawn | NodeKind::IoPut)));
    }

    #[test]
    fn same_seed_identical_serialization() {
        let a = generate_random_dag(&params(3, 2, 6, 99)).unwrap();
        let b = generate_random_dag(&params(3, 2, 6, 99)).unwrap();
        assert_eq!(serialize(&a), serialize(&b));
    }

    #[test]
    fn different_seed_differs() {
        let a = generate_random_dag(&params(3, 2, 6, 1)).unwrap();
        let b = generate_random_dag(&params(3, 2, 6, 2)).unwrap();
        assert_ne!(serialize(&a), serialize(&b));
    }

    #[test]
    fn generated_dags_validate_across_seeds() {
        for seed in 0..50 {
            let dag = generate_random_dag(&params(2, 3, 8, seed)).unwrap();
            assert_eq!(validate(&dag), Vec::new(), "seed {seed}");
        }
    }

    #[test]
    fn infeasible_future_count_rejected() {
        let err = generate_random_dag(&params(0, 1, 100, 0)).unwrap_err();
        assert!(matches!(err, GenError::Infeasible { .. }));
    }

    #[test]
    fn requested_future_count_is_exact() {
        let dag = generate_random_dag(&params(3, 2, 9, 5)).unwrap();
        let spawns = dag
            .nodes()
            .filter(|(_, k)| *k == NodeKind::FutureSpawn)
            .count();
        assert_eq!(spawns, 9);
    }
}
