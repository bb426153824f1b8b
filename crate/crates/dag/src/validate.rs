//! Structural validation. Violations are data, not failures: callers get
//! the full list and decide what to do.

use std::fmt;

use crate::{ComputationDag, NodeId, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Cycle,
    NoNodes,
    MultipleRoots(Vec<NodeId>),
    RootMismatch { declared: NodeId, found: NodeId },
    RootNotSmallestId { root: NodeId },
    OutDegreeExceeded { node: NodeId, degree: usize },
    ZeroWeightEdge { src: NodeId, dst: NodeId },
    HeavyEdgeMisplaced { src: NodeId, dst: NodeId, weight: u64 },
    EdgeOutOfRange { src: NodeId, dst: NodeId },
    IoSetupBadOutEdges { node: NodeId },
    IoPutBadInEdges { node: NodeId },
    IoPutBadChild { node: NodeId },
    FutureJoinBadParents { node: NodeId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle => write!(f, "graph contains a cycle"),
            Violation::NoNodes => write!(f, "graph has no nodes"),
            Violation::MultipleRoots(roots) => {
                write!(f, "multiple roots: ")?;
                for (i, r) in roots.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{r}")?;
                }
                Ok(())
            }
            Violation::RootMismatch { declared, found } => write!(
                f,
                "declared root {declared} but the unique parentless node is {found}"
            ),
            Violation::RootNotSmallestId { root } => {
                write!(f, "root {root} does not have the smallest id")
            }
            Violation::OutDegreeExceeded { node, degree } => {
                write!(f, "node {node} has out-degree {degree} > 2")
            }
            Violation::ZeroWeightEdge { src, dst } => {
                write!(f, "edge {src} -> {dst} has weight 0")
            }
            Violation::HeavyEdgeMisplaced { src, dst, weight } => write!(
                f,
                "heavy edge {src} -> {dst} (weight {weight}) is not IoSetup -> IoPut"
            ),
            Violation::EdgeOutOfRange { src, dst } => {
                write!(f, "edge {src} -> {dst} references a missing node")
            }
            Violation::IoSetupBadOutEdges { node } => write!(
                f,
                "IoSetup {node} must have exactly one out-edge, to an IoPut"
            ),
            Violation::IoPutBadInEdges { node } => write!(
                f,
                "IoPut {node} must have exactly one in-edge, from an IoSetup"
            ),
            Violation::IoPutBadChild { node } => {
                write!(f, "IoPut {node} may only feed a FutureJoin")
            }
            Violation::FutureJoinBadParents { node } => write!(
                f,
                "FutureJoin {node} must have exactly two parents, at most one of them an IoPut"
            ),
        }
    }
}

/// Check every structural invariant and return all violations found.
pub fn validate(dag: &ComputationDag) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = dag.node_count();
    if n == 0 {
        return vec![Violation::NoNodes];
    }

    let mut edges_ok = true;
    for e in dag.edges() {
        if e.src.index() >= n || e.dst.index() >= n {
            out.push(Violation::EdgeOutOfRange {
                src: e.src,
                dst: e.dst,
            });
            edges_ok = false;
        }
    }
    if !edges_ok {
        // Adjacency is unreliable past this point.
        return out;
    }

    let roots: Vec<NodeId> = dag
        .nodes()
        .filter(|(id, _)| dag.in_degree(*id) == 0)
        .map(|(id, _)| id)
        .collect();
    match roots.as_slice() {
        [] => out.push(Violation::Cycle),
        [r] => {
            if *r != dag.root() {
                out.push(Violation::RootMismatch {
                    declared: dag.root(),
                    found: *r,
                });
            }
            if r.0 != 0 {
                out.push(Violation::RootNotSmallestId { root: *r });
            }
        }
        many => out.push(Violation::MultipleRoots(many.to_vec())),
    }

    if dag.node_count() > 0 {
        // Kahn count < n means a cycle (unreachable-from-source SCC).
        let mut indeg: Vec<usize> = (0..n).map(|i| dag.in_degree(NodeId(i as u32))).collect();
        let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            seen += 1;
            for e in dag.out_edges(NodeId(u as u32)) {
                indeg[e.dst.index()] -= 1;
                if indeg[e.dst.index()] == 0 {
                    queue.push(e.dst.index());
                }
            }
        }
        if seen != n && !out.contains(&Violation::Cycle) {
            out.push(Violation::Cycle);
        }
    }

    for (id, kind) in dag.nodes() {
        let deg = dag.out_degree(id);
        if deg > 2 {
            out.push(Violation::OutDegreeExceeded { node: id, degree: deg });
        }
        match kind {
            NodeKind::IoSetup => {
                let ok = deg == 1
                    && dag
                        .out_edges(id)
                        .all(|e| dag.kind(e.dst) == NodeKind::IoPut);
                if !ok {
                    out.push(Violation::IoSetupBadOutEdges { node: id });
                }
            }
            NodeKind::IoPut => {
                let ins: Vec<_> = dag.in_edges(id).collect();
                if ins.len() != 1 || dag.kind(ins[0].src) != NodeKind::IoSetup {
                    out.push(Violation::IoPutBadInEdges { node: id });
                }
                if dag
                    .out_edges(id)
                    .any(|e| dag.kind(e.dst) != NodeKind::FutureJoin)
                    || dag.out_degree(id) > 1
                {
                    out.push(Violation::IoPutBadChild { node: id });
                }
            }
            NodeKind::FutureJoin => {
                let parents: Vec<_> = dag.parents(id).collect();
                let io_parents = parents
                    .iter()
                    .filter(|p| dag.kind(**p) == NodeKind::IoPut)
                    .count();
                if parents.len() != 2 || io_parents > 1 {
                    out.push(Violation::FutureJoinBadParents { node: id });
                }
            }
            _ => {}
        }
    }

    for e in dag.edges() {
        if e.weight == 0 {
            out.push(Violation::ZeroWeightEdge {
                src: e.src,
                dst: e.dst,
            });
        } else if e.weight > 1
            && !(dag.kind(e.src) == NodeKind::IoSetup && dag.kind(e.dst) == NodeKind::IoPut)
        {
            out.push(Violation::HeavyEdgeMisplaced {
                src: e.src,
                dst: e.dst,
                weight: e.weight,
            });
        }
    }

    out
}
