//! Named DAG families for the simulator sweeps and check suites.

use lathide_dag::{generate_random_dag, ComputationDag, GenParams, LatencyDist};

/// A family is a DAG shape; `instance(seed)` draws one member.
#[derive(Debug, Clone, Copy)]
pub struct Family {
    pub name: &'static str,
    pub params: GenParams,
}

impl Family {
    pub fn instance(&self, seed: u64) -> ComputationDag {
        generate_random_dag(&GenParams {
            seed,
            ..self.params
        })
        .expect("family parameters are feasible")
    }
}

/// Pure fork-join, no futures; used by the depth-ordering checks and as
/// the policies-coincide control.
pub const FORK_JOIN: Family = Family {
    name: "fork_join",
    params: GenParams {
        depth: 3,
        fanout: 2,
        future_count: 0,
        latency: LatencyDist::Fixed(0),
        seed: 0,
    },
};

/// A moderate mix of I/O futures over a spawn tree, with latencies long
/// enough that a lone worker keeps stalling on them.
pub const IO_MIX: Family = Family {
    name: "io_mix",
    params: GenParams {
        depth: 3,
        fanout: 3,
        future_count: 30,
        latency: LatencyDist::Uniform(30, 100),
        seed: 0,
    },
};

/// Suspension-rich: many concurrent futures with long latencies, so
/// suspended deques pile up and carry work.
pub const SUSPEND_RICH: Family = Family {
    name: "suspend_rich",
    params: GenParams {
        depth: 3,
        fanout: 3,
        future_count: 40,
        latency: LatencyDist::Uniform(20, 80),
        seed: 0,
    },
};

pub const ALL: [Family; 3] = [FORK_JOIN, IO_MIX, SUSPEND_RICH];

pub fn by_name(name: &str) -> Option<Family> {
    ALL.into_iter().find(|f| f.name == name)
}
