//! Weighted computation DAGs and their cost model.
//!
//! A computation DAG models a task-parallel execution: unit-time nodes,
//! light edges of weight 1, and heavy edges from an I/O setup node to its
//! I/O put node whose weight is the I/O latency. On top of the structure
//! this crate provides the analysis quantities used to reason about
//! schedulers: work (node count), span (longest weighted path), per-node
//! depths (with the special initial/final depth pair for I/O put nodes),
//! and the exponential potential assigned to ready and assigned nodes.
//!
//! Everything here is immutable after construction and safe to share
//! across threads.

mod depths;
mod format;
mod generate;
mod potential;
mod validate;

pub use depths::{depths, DepthTable};
pub use format::{parse, serialize, ParseError};
pub use generate::{generate_random_dag, GenError, GenParams, LatencyDist};
pub use potential::{log3_approx, potential, total_potential, NodeStatus, Potential, PotentialError};
pub use validate::{validate, Violation};

use std::fmt;

/// Dense, non-negative node identifier. Ids are assigned in construction
/// order; the root always has the smallest id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// What a node does in the modeled program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    /// Plain computation.
    Regular,
    /// Forks a child task; left child is the spawned function, right child
    /// the continuation.
    Spawn,
    /// Join point of a sync: parents are the syncing node and the last
    /// nodes of all spawned children.
    SyncJoin,
    /// Creates a future task; left child is the future body, right child
    /// the continuation.
    FutureSpawn,
    /// Executes a get on a future handle; its child is the future join.
    GetNode,
    /// Continuation after a get; one local parent plus one put-side parent.
    FutureJoin,
    /// Last node of an I/O future task: issues the request. Its only
    /// out-edge is the heavy edge to the I/O put node.
    IoSetup,
    /// Completion of the I/O, performed by an I/O thread after the heavy
    /// edge's latency elapses; never executed by a worker.
    IoPut,
}

impl NodeKind {
    pub const ALL: [NodeKind; 8] = [
        NodeKind::Regular,
        NodeKind::Spawn,
        NodeKind::SyncJoin,
        NodeKind::FutureSpawn,
        NodeKind::GetNode,
        NodeKind::FutureJoin,
        NodeKind::IoSetup,
        NodeKind::IoPut,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Regular => "Regular",
            NodeKind::Spawn => "Spawn",
            NodeKind::SyncJoin => "SyncJoin",
            NodeKind::FutureSpawn => "FutureSpawn",
            NodeKind::GetNode => "GetNode",
            NodeKind::FutureJoin => "FutureJoin",
            NodeKind::IoSetup => "IoSetup",
            NodeKind::IoPut => "IoPut",
        }
    }

    pub fn from_name(s: &str) -> Option<NodeKind> {
        NodeKind::ALL.iter().copied().find(|k| k.name() == s)
    }
}

/// A dependence edge. Weight 1 is a light edge; weights above 1 are only
/// legal on IoSetup -> IoPut edges, where the weight is the I/O latency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub weight: u64,
}

/// An immutable weighted computation DAG.
///
/// Edge order is significant: the first out-edge of a node is its "left"
/// child (executed first under the one-worker schedule), the second its
/// "right" child.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputationDag {
    nodes: Vec<NodeKind>,
    edges: Vec<Edge>,
    root: NodeId,
    /// Out-edges per node, in insertion order (left first).
    out: Vec<Vec<u32>>,
    /// In-edges per node, in insertion order.
    incoming: Vec<Vec<u32>>,
}

impl ComputationDag {
    pub fn new(nodes: Vec<NodeKind>, edges: Vec<Edge>, root: NodeId) -> ComputationDag {
        let n = nodes.len();
        let mut out = vec![Vec::new(); n];
        let mut incoming = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            if let Some(v) = out.get_mut(e.src.index()) {
                v.push(i as u32);
            }
            if let Some(v) = incoming.get_mut(e.dst.index()) {
                v.push(i as u32);
            }
        }
        ComputationDag {
            nodes,
            edges,
            root,
            out,
            incoming,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.index()]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, NodeKind)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, k)| (NodeId(i as u32), *k))
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Out-edges of `id` in left-to-right order.
    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.out[id.index()].iter().map(|&i| &self.edges[i as usize])
    }

    pub fn in_edges(&self, id: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.incoming[id.index()]
            .iter()
            .map(|&i| &self.edges[i as usize])
    }

    pub fn out_degree(&self, id: NodeId) -> usize {
        self.out[id.index()].len()
    }

    pub fn in_degree(&self, id: NodeId) -> usize {
        self.incoming[id.index()].len()
    }

    pub fn parents(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.in_edges(id).map(|e| e.src)
    }

    pub fn children(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.out_edges(id).map(|e| e.dst)
    }

    /// Nodes in a topological order (root first). Panics on cyclic input;
    /// run [`validate`] first on untrusted data.
    pub fn topo_order(&self) -> Vec<NodeId> {
        let n = self.node_count();
        let mut indeg: Vec<usize> = (0..n).map(|i| self.incoming[i].len()).collect();
        let mut queue: Vec<NodeId> = (0..n)
            .filter(|&i| indeg[i] == 0)
            .map(|i| NodeId(i as u32))
            .collect();
        let mut order = Vec::with_capacity(n);
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            order.push(u);
            for &ei in &self.out[u.index()] {
                let v = self.edges[ei as usize].dst;
                indeg[v.index()] -= 1;
                if indeg[v.index()] == 0 {
                    queue.push(v);
                }
            }
        }
        assert_eq!(order.len(), n, "topo_order on cyclic graph");
        order
    }

    /// Total work: the number of nodes, independent of edge weights.
    pub fn work(&self) -> u64 {
        self.nodes.len() as u64
    }

    /// Span: the longest weighted path, counting one time unit per node,
    /// so a k-node light chain has span k and a heavy edge of latency l
    /// substitutes l for a light edge's 1.
    pub fn span(&self) -> u64 {
        let order = self.topo_order();
        let mut longest = vec![0u64; self.node_count()];
        let mut best = 0;
        for u in order {
            // 1 + (weight sum along the heaviest path from the root).
            longest[u.index()] = self
                .in_edges(u)
                .map(|e| longest[e.src.index()] + e.weight)
                .max()
                .unwrap_or(1);
            best = best.max(longest[u.index()]);
        }
        best
    }
}

/// Convenience builder used by the generator and tests.
#[derive(Default)]
pub struct DagBuilder {
    nodes: Vec<NodeKind>,
    edges: Vec<Edge>,
}

impl DagBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&mut self, kind: NodeKind) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(kind);
        id
    }

    pub fn edge(&mut self, src: NodeId, dst: NodeId) {
        self.weighted_edge(src, dst, 1);
    }

    pub fn weighted_edge(&mut self, src: NodeId, dst: NodeId, weight: u64) {
        self.edges.push(Edge { src, dst, weight });
    }

    pub fn build(self) -> ComputationDag {
        ComputationDag::new(self.nodes, self.edges, NodeId(0))
    }
}
