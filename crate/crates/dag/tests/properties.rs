//! Property tests for the cost-model invariants.

use lathide_dag::{
    depths, generate_random_dag, parse, potential, serialize, validate, ComputationDag, Edge,
    GenParams, LatencyDist, NodeKind, NodeStatus,
};
use proptest::prelude::*;

fn arb_params() -> impl Strategy<Value = GenParams> {
    (0u32..3, 1u32..4, 0u32..8, 0u64..25, any::<u64>()).prop_map(
        |(depth, fanout, futures, max_latency, seed)| GenParams {
            depth,
            fanout,
            future_count: futures,
            latency: LatencyDist::Uniform(0, max_latency),
            seed,
        },
    )
}

fn gen(params: &GenParams) -> Option<ComputationDag> {
    generate_random_dag(params).ok()
}

/// Rebuild the DAG with different (valid-shape-agnostic) edge weights.
fn reweight(dag: &ComputationDag, f: impl Fn(usize, &Edge) -> u64) -> ComputationDag {
    let nodes: Vec<NodeKind> = dag.nodes().map(|(_, k)| k).collect();
    let edges: Vec<Edge> = dag
        .edges()
        .iter()
        .enumerate()
        .map(|(i, e)| Edge {
            src: e.src,
            dst: e.dst,
            weight: f(i, e),
        })
        .collect();
    ComputationDag::new(nodes, edges, dag.root())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn work_invariant_under_reweighting(params in arb_params(), salt in any::<u64>()) {
        if let Some(dag) = gen(&params) {
            let rewired = reweight(&dag, |i, _| 1 + (salt.wrapping_add(i as u64) % 50));
            prop_assert_eq!(dag.work(), rewired.work());
        }
    }

    #[test]
    fn span_monotone_in_edge_weights(params in arb_params(), bump in 1u64..20) {
        if let Some(dag) = gen(&params) {
            let base = dag.span();
            for i in 0..dag.edges().len().min(8) {
                let heavier = reweight(&dag, |j, e| if i == j { e.weight + bump } else { e.weight });
                prop_assert!(heavier.span() >= base);
            }
        }
    }

    #[test]
    fn single_parent_depth_is_parent_plus_one(params in arb_params()) {
        if let Some(dag) = gen(&params) {
            let t = depths(&dag);
            for (id, kind) in dag.nodes() {
                if dag.in_degree(id) == 1 && kind != NodeKind::IoPut {
                    let parent = dag.parents(id).next().unwrap();
                    if dag.kind(parent) != NodeKind::IoPut {
                        prop_assert_eq!(t.depth(id), t.depth(parent) + 1);
                    }
                }
            }
        }
    }

    #[test]
    fn live_potentials_within_bounds(params in arb_params()) {
        if let Some(dag) = gen(&params) {
            let span = dag.span();
            let t = depths(&dag);
            let lo = potential(1, NodeStatus::Assigned).unwrap();
            let hi = potential(span as i64, NodeStatus::Ready).unwrap();
            for (id, _) in dag.nodes() {
                let w = span as i64 - t.depth(id) as i64;
                let ready = potential(w, NodeStatus::Ready).unwrap();
                let assigned = potential(w, NodeStatus::Assigned).unwrap();
                prop_assert!(assigned >= lo.clone() && ready <= hi.clone());
                prop_assert_eq!(ready, assigned * 3u32);
            }
        }
    }

    #[test]
    fn serialize_parse_round_trips(params in arb_params()) {
        if let Some(dag) = gen(&params) {
            let text = serialize(&dag);
            let back = parse(&text).unwrap();
            prop_assert_eq!(&back, &dag);
            // parse . serialize is also the identity on the text side.
            prop_assert_eq!(serialize(&back), text);
        }
    }

    #[test]
    fn generated_dags_always_validate(params in arb_params()) {
        if let Some(dag) = gen(&params) {
            prop_assert_eq!(validate(&dag), Vec::new());
        }
    }
}
