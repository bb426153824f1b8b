//! Deterministic discrete-event simulation of work-stealing schedules.
//!
//! The simulator executes a weighted computation DAG on `P` virtual
//! workers under either parsimonious or proactive work stealing. Each
//! step a worker executes one node or performs one steal attempt; heavy
//! edges are modeled as I/O put nodes that stay pending for the edge's
//! latency and are completed by a zero-cost I/O agent, never by a
//! worker. Runs are reproducible: the same (dag, workers, policy, seed)
//! yields the same trace byte for byte.
//!
//! Alongside the schedule the engine can track the exponential potential
//! of the live state, which the cost model says never increases, and
//! sample deque snapshots for the balance and depth-ordering checks.

mod deviations;
mod engine;
mod potential;
mod sweep;

pub use deviations::{count_deviations, sequential_order};
pub use engine::simulate;
pub use potential::potential_trace_from_snapshots;
pub use sweep::{bound_sweep, lg_p, SweepCell};

use lathide_dag::{NodeId, Potential};
use lathide_deque::DequeState;

/// Scheduling policy under simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Steal only when out of local work; a blocked get pops the next
    /// node from the deque and keeps going.
    Parsimonious,
    /// A blocked get suspends the whole deque, donates it to a random
    /// worker, and turns thief.
    Proactive,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Parsimonious => "parsimonious",
            Policy::Proactive => "proactive",
        }
    }

    pub fn from_name(s: &str) -> Option<Policy> {
        match s {
            "parsimonious" => Some(Policy::Parsimonious),
            "proactive" => Some(Policy::Proactive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub workers: usize,
    pub policy: Policy,
    pub seed: u64,
    /// Record a deque/pending snapshot after every k-th step (1 = every
    /// step). `None` disables snapshots.
    pub snapshot_every: Option<u64>,
    /// Track the exact potential after every step.
    pub potential: bool,
}

impl SimConfig {
    pub fn new(workers: usize, policy: Policy, seed: u64) -> SimConfig {
        SimConfig {
            workers,
            policy,
            seed,
            snapshot_every: None,
            potential: false,
        }
    }

    pub fn with_potential(mut self) -> SimConfig {
        self.potential = true;
        self
    }

    pub fn with_snapshots(mut self, every: u64) -> SimConfig {
        self.snapshot_every = Some(every);
        self
    }
}

/// One worker execution event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecRecord {
    pub step: u64,
    pub worker: u32,
    pub node: NodeId,
}

/// State of one deque at a sampling point, entries top (oldest) first.
#[derive(Debug, Clone)]
pub struct DequeSnapshot {
    pub holder: usize,
    pub deque_id: u64,
    pub state: DequeState,
    pub stealable: bool,
    pub entries: Vec<NodeId>,
}

/// Full system state after one step.
#[derive(Debug, Clone)]
pub struct StepSnapshot {
    pub step: u64,
    /// Per worker: the node it will execute next, if any.
    pub assigned: Vec<Option<NodeId>>,
    pub deques: Vec<DequeSnapshot>,
    /// Pending I/O put nodes with their current sliding depth.
    pub pending_puts: Vec<(NodeId, u64)>,
}

/// Execution trace: worker events, I/O agent completions, and sampled
/// snapshots. Respects DAG precedence by construction; the test suites
/// re-verify it.
#[derive(Debug, Clone, Default)]
pub struct ExecTrace {
    pub execs: Vec<ExecRecord>,
    pub io_completions: Vec<(u64, NodeId)>,
    pub snapshots: Vec<StepSnapshot>,
}

/// Balance sampling accumulated over steal-bounded states.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BalanceStats {
    /// Steal-bounded states observed with at least 10 stealable deques.
    pub samples: u64,
    /// Samples where max stealable deques per worker <= D/P + 4 lg P.
    pub within_bound: u64,
}

/// Counters and derived quantities for one simulation run.
#[derive(Debug, Clone, Default)]
pub struct SimReport {
    pub makespan: u64,
    pub steal_attempts: u64,
    pub successful_steals: u64,
    pub deviations: u64,
    pub suspensions: u64,
    pub resumptions: u64,
    pub peak_pending_futures: u64,
    pub worker_execs: u64,
    pub io_completions: u64,
    pub idle_steps: u64,
    pub work_bounded_steps: u64,
    pub steal_bounded_steps: u64,
    pub balance: BalanceStats,
    /// Potential after every step, starting with the initial state.
    pub potential_trace: Vec<Potential>,
}

impl SimReport {
    pub const CSV_HEADER: &'static str = "dag_id,workers,policy,seed,makespan,steal_attempts,successful_steals,deviations,suspensions,peak_pending_futures";

    pub fn csv_row(&self, dag_id: &str, cfg: &SimConfig) -> String {
        format!(
            "{dag_id},{},{},{},{},{},{},{},{},{}",
            cfg.workers,
            cfg.policy.name(),
            cfg.seed,
            self.makespan,
            self.steal_attempts,
            self.successful_steals,
            self.deviations,
            self.suspensions,
            self.peak_pending_futures
        )
    }
}
