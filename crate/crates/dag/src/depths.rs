//! Node depths.
//!
//! Depth is edge count from the root, taking the deepest parent at joins,
//! with two special rules for I/O:
//!
//! * an I/O put node `u` with setup parent `v` and latency `l` has an
//!   initial depth `d(v) + 1` and a final depth `d(v) + l`; its effective
//!   depth slides from one to the other while the I/O is pending;
//! * a future join whose put-side parent is an I/O put uses that put's
//!   *final* depth: `max(final_depth(put), depth(local)) + 1`.
//!
//! Ordinary (non-I/O) future put nodes are plain nodes and need no
//! special casing.

use std::collections::HashMap;

use crate::{ComputationDag, NodeId, NodeKind};

/// Depths for every node, plus the initial/final pair for I/O put nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthTable {
    depth: Vec<u64>,
    initial: HashMap<NodeId, u64>,
    final_: HashMap<NodeId, u64>,
}

impl DepthTable {
    pub fn depth(&self, id: NodeId) -> u64 {
        self.depth[id.index()]
    }

    /// Initial depth; defined only for IoPut nodes.
    pub fn initial_depth(&self, id: NodeId) -> Option<u64> {
        self.initial.get(&id).copied()
    }

    /// Final depth; defined only for IoPut nodes.
    pub fn final_depth(&self, id: NodeId) -> Option<u64> {
        self.final_.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }
}

/// Compute the depth table. The DAG must be valid.
pub fn depths(dag: &ComputationDag) -> DepthTable {
    let n = dag.node_count();
    let mut depth = vec![0u64; n];
    let mut initial = HashMap::new();
    let mut final_ = HashMap::new();

    for u in dag.topo_order() {
        match dag.kind(u) {
            _ if dag.in_degree(u) == 0 => {
                depth[u.index()] = 0;
            }
            NodeKind::IoPut => {
                // Single parent, the setup node; in-edge weight is the latency.
                let e = dag.in_edges(u).next().expect("IoPut has a parent");
                let dv = depth[e.src.index()];
                initial.insert(u, dv + 1);
                final_.insert(u, dv + e.weight);
                // The table's plain depth for an IoPut is its final depth:
                // that is the value its children observe.
                depth[u.index()] = dv + e.weight;
            }
            NodeKind::FutureJoin => {
                let d = dag
                    .parents(u)
                    .map(|p| match dag.kind(p) {
                        NodeKind::IoPut => final_[&p],
                        _ => depth[p.index()],
                    })
                    .max()
                    .expect("FutureJoin has parents");
                depth[u.index()] = d + 1;
            }
            _ => {
                let d = dag
                    .parents(u)
                    .map(|p| depth[p.index()])
                    .max()
                    .expect("non-root node has parents");
                depth[u.index()] = d + 1;
            }
        }
    }

    DepthTable {
        depth,
        initial,
        final_,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DagBuilder;

    #[test]
    fn root_depth_zero() {
        let mut b = DagBuilder::new();
        b.node(NodeKind::Regular);
        let t = depths(&b.build());
        assert_eq!(t.depth(NodeId(0)), 0);
    }

    #[test]
    fn chain_depths_increment() {
        let mut b = DagBuilder::new();
        let a = b.node(NodeKind::Regular);
        let c = b.node(NodeKind::Regular);
        let d = b.node(NodeKind::Regular);
        b.edge(a, c);
        b.edge(c, d);
        let t = depths(&b.build());
        assert_eq!(t.depth(a), 0);
        assert_eq!(t.depth(c), 1);
        assert_eq!(t.depth(d), 2);
    }

    #[test]
    fn io_put_initial_and_final_depth() {
        // Setup at depth 3, latency 5: initial 4, final 8.
        let mut b = DagBuilder::new();
        let n0 = b.node(NodeKind::Regular);
        let n1 = b.node(NodeKind::Regular);
        let n2 = b.node(NodeKind::Regular);
        let setup = b.node(NodeKind::IoSetup);
        let put = b.node(NodeKind::IoPut);
        b.edge(n0, n1);
        b.edge(n1, n2);
        b.edge(n2, setup);
        b.weighted_edge(setup, put, 5);
        let t = depths(&b.build());
        assert_eq!(t.depth(setup), 3);
        assert_eq!(t.initial_depth(put), Some(4));
        assert_eq!(t.final_depth(put), Some(8));
    }

    #[test]
    fn future_join_uses_put_final_depth() {
        // Put with final depth 8, get node at depth 5: join depth 9.
        let mut b = DagBuilder::new();
        let root = b.node(NodeKind::FutureSpawn);
        let s1 = b.node(NodeKind::Regular);
        let s2 = b.node(NodeKind::Regular);
        let setup = b.node(NodeKind::IoSetup);
        let put = b.node(NodeKind::IoPut);
        let c1 = b.node(NodeKind::Regular);
        let c2 = b.node(NodeKind::Regular);
        let c3 = b.node(NodeKind::Regular);
        let c4 = b.node(NodeKind::Regular);
        let get = b.node(NodeKind::GetNode);
        let join = b.node(NodeKind::FutureJoin);
        b.edge(root, s1); // left: future task
        b.edge(root, c1); // right: continuation
        b.edge(s1, s2);
        b.edge(s2, setup); // setup depth 3
        b.weighted_edge(setup, put, 5); // initial 4, final 8
        b.edge(c1, c2);
        b.edge(c2, c3);
        b.edge(c3, c4);
        b.edge(c4, get); // get depth 5
        b.edge(get, join);
        b.edge(put, join);
        let dag = b.build();
        assert!(crate::validate(&dag).is_empty());
        let t = depths(&dag);
        assert_eq!(t.final_depth(put), Some(8));
        assert_eq!(t.depth(get), 5);
        assert_eq!(t.depth(join), 9);
    }

    #[test]
    fn multi_parent_uses_deepest() {
        let mut b = DagBuilder::new();
        let r = b.node(NodeKind::Spawn);
        let a = b.node(NodeKind::Regular);
        let c = b.node(NodeKind::Regular);
        let d = b.node(NodeKind::Regular);
        let j = b.node(NodeKind::SyncJoin);
        b.edge(r, a);
        b.edge(r, j);
        b.edge(a, c);
        b.edge(c, d);
        b.edge(d, j);
        let t = depths(&b.build());
        assert_eq!(t.depth(j), 4); // via a -> c -> d, not the direct edge
    }
}
