//! Normalized steal/deviation sweeps over worker counts.

use lathide_dag::ComputationDag;

use crate::{engine, Policy, SimConfig};

/// `lg P` as the bounds use it, floored at 1 so the steal budget never
/// vanishes: a lone worker stalled on I/O latency still performs steal
/// attempts, which a literal `lg 1 = 0` budget could not absorb.
pub fn lg_p(workers: usize) -> f64 {
    (workers as f64).log2().max(1.0)
}

/// One (dag, P) cell of the sweep, averaged over seeds.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub dag_id: String,
    pub policy: Policy,
    pub workers: usize,
    pub seeds: u64,
    pub work: u64,
    pub span: u64,
    pub mean_makespan: f64,
    pub mean_steal_attempts: f64,
    pub mean_successful_steals: f64,
    pub mean_deviations: f64,
    pub mean_suspensions: f64,
    pub mean_peak_pending: f64,
    /// mean steal attempts / (T1 + P lg P Tinf).
    pub attempts_ratio: f64,
    /// mean deviations / ((P lg P + peak pending) Tinf).
    pub deviations_ratio: f64,
}

impl SweepCell {
    pub const CSV_HEADER: &'static str = "dag_id,policy,workers,seeds,work,span,mean_makespan,mean_steal_attempts,mean_successful_steals,mean_deviations,mean_suspensions,mean_peak_pending,attempts_ratio,deviations_ratio";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.6},{:.6}",
            self.dag_id,
            self.policy.name(),
            self.workers,
            self.seeds,
            self.work,
            self.span,
            self.mean_makespan,
            self.mean_steal_attempts,
            self.mean_successful_steals,
            self.mean_deviations,
            self.mean_suspensions,
            self.mean_peak_pending,
            self.attempts_ratio,
            self.deviations_ratio,
        )
    }
}

/// Run `seeds` simulations per (dag, P) cell and aggregate the
/// normalized ratios the steal and deviation bounds predict are flat.
pub fn bound_sweep(
    dags: &[(String, ComputationDag)],
    workers: &[usize],
    policy: Policy,
    seeds: std::ops::Range<u64>,
) -> Vec<SweepCell> {
    let mut cells = Vec::new();
    for (dag_id, dag) in dags {
        let work = dag.work();
        let span = dag.span();
        for &p in workers {
            let mut sum_makespan = 0.0;
            let mut sum_attempts = 0.0;
            let mut sum_success = 0.0;
            let mut sum_devs = 0.0;
            let mut sum_susp = 0.0;
            let mut sum_peak = 0.0;
            let count = seeds.end - seeds.start;
            for seed in seeds.clone() {
                let (report, _) = engine::simulate(dag, &SimConfig::new(p, policy, seed));
                sum_makespan += report.makespan as f64;
                sum_attempts += report.steal_attempts as f64;
                sum_success += report.successful_steals as f64;
                sum_devs += report.deviations as f64;
                sum_susp += report.suspensions as f64;
                sum_peak += report.peak_pending_futures as f64;
            }
            let n = count as f64;
            let mean_attempts = sum_attempts / n;
            let mean_devs = sum_devs / n;
            let mean_peak = sum_peak / n;
            let attempts_denved = work as f64 + (p as f64) * lg_p(p) * span as f64;
            let devs_denved = ((p as f64) * lg_p(p) + mean_peak) * span as f64;
            cells.push(SweepCell {
                dag_id: dag_id.clone(),
                policy,
                workers: p,
                seeds: count,
                work,
                span,
                mean_makespan: sum_makespan / n,
                mean_steal_attempts: mean_attempts,
                mean_successful_steals: sum_success / n,
                mean_deviations: mean_devs,
                mean_suspensions: sum_susp / n,
                mean_peak_pending: mean_peak,
                attempts_ratio: mean_attempts / attempts_denved,
                deviations_ratio: mean_devs / devs_denved,
            });
        }
    }
    cells
}
