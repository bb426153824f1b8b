//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line with its measurements. Wall-clock criteria serialize on a shared
//! lock so they do not skew each other.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, OnceLock};
use std::time::Duration;

use lathide_cli::config::{BenchConfig, Mode};
use lathide_cli::mapreduce::{fib_program, fib_serial, run_mapreduce};
use lathide_cli::{families, overhead, simops};
use lathide_dag::{depths, potential, NodeStatus, Potential};
use lathide_deque::{StealResult, WsDeque};
use lathide_runtime::{IoStats, Runtime, RuntimeConfig};
use lathide_sim::{bound_sweep, simulate, Policy, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: OnceLock<Mutex<()>> = OnceLock::new();
    match LOCK.get_or_init(|| Mutex::new(())).lock() {
        Ok(g) => g,
        Err(poisoned) => poisoned.into_inner(),
    }
}

fn verdict(criterion: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn base_config() -> BenchConfig {
    BenchConfig {
        connections: 64,
        latency: Duration::from_millis(50),
        fib_n: 25,
        serial_base: 15,
        workers: 4,
        mode: Mode::Iofutures,
        reps: 3,
        seed: 0,
        backend: Default::default(),
    }
}

/// 1. Latency hiding, quantitative: blocking is pinned above n*L/P while
/// the I/O-future build beats it by at least 4x.
#[test]
fn criterion_01_latency_hiding() {
    let _serial = serial();
    let blocking = run_mapreduce(&BenchConfig {
        mode: Mode::Blocking,
        ..base_config()
    })
    .expect("blocking row");
    let iofutures = run_mapreduce(&BenchConfig {
        mode: Mode::Iofutures,
        ..base_config()
    })
    .expect("iofutures row");
    let ok = blocking.mean_s >= 0.8 && iofutures.mean_s <= 0.25 * blocking.mean_s;
    verdict(
        "1 (latency hiding)",
        ok,
        &format!(
            "blocking {:.3}s (>= 0.8s), iofutures {:.3}s ({:.1}x speedup, need >= 4x)",
            blocking.mean_s,
            iofutures.mean_s,
            blocking.mean_s / iofutures.mean_s
        ),
    );
}

/// 2. Zero-latency overhead: the full system stays within 1.5x of the
/// ideal baseline at minimum timer granularity for P in {1, 2, 4}.
#[test]
fn criterion_02_zero_latency_overhead() {
    let _serial = serial();
    let base = BenchConfig {
        reps: 10,
        ..base_config()
    };
    let rows = overhead::overhead_suite(&base, &[1, 2, 4]).expect("overhead suite");
    let mut detail = String::new();
    let mut ok = true;
    for p in [1usize, 2, 4] {
        let ideal = rows
            .iter()
            .find(|r| r.workers == p && r.mode == Mode::Ideal)
            .unwrap();
        let full = rows
            .iter()
            .find(|r| r.workers == p && r.mode == Mode::PlusIothread)
            .unwrap();
        let ratio = full.mean_s / ideal.mean_s;
        ok &= ratio <= 1.5;
        detail.push_str(&format!("P={p}: {ratio:.3}x  "));
        // Mode definition: the ideal baseline never touches the reactor.
        assert_eq!(ideal.counters.io_registrations, 0, "ideal registered fds");
    }
    verdict("2 (zero-latency overhead <= 1.5x ideal)", ok, detail.trim());
}

/// 3. Correctness oracle: randomized configurations across all modes
/// match the sequential result exactly (checked inside every run).
#[test]
fn criterion_03_correctness_oracle() {
    let _serial = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut by_mode = [0u32; 7];
    for case in 0..100 {
        let mode = Mode::ALL[rng.gen_range(0..Mode::ALL.len())];
        let cfg = BenchConfig {
            connections: rng.gen_range(1..=24),
            latency: Duration::from_micros(rng.gen_range(0..=8000)),
            fib_n: rng.gen_range(5..=15),
            serial_base: rng.gen_range(3..=8),
            workers: rng.gen_range(1..=4),
            mode,
            reps: 1,
            seed: case,
            backend: Default::default(),
        };
        // run_mapreduce verifies every repetition against the oracle and
        // errors out on any mismatch.
        let row = run_mapreduce(&cfg)
            .unwrap_or_else(|e| panic!("case {case} ({}) failed: {e}", mode.name()));
        assert_eq!(row.result, lathide_cli::mapreduce_oracle(&cfg));
        by_mode[Mode::ALL.iter().position(|m| *m == mode).unwrap()] += 1;
    }
    let all_modes_hit = by_mode.iter().all(|&c| c > 0);
    verdict(
        "3 (correctness oracle, 100 randomized configs)",
        all_modes_hit,
        &format!("per-mode case counts {by_mode:?}"),
    );
}

/// 4. Lemma noInc: 1000 seeded proactive simulations show no potential
/// increase, with the exact initial and final values.
#[test]
fn criterion_04_potential_never_increases() {
    let outcome = simops::check(1000, 0);
    let ok = outcome.potential_violations == 0
        && outcome.endpoint_violations == 0
        && outcome.conservation_violations == 0;
    verdict(
        "4 (noInc over 1000 runs)",
        ok,
        &outcome.summary(),
    );
}

/// 5. Bound sweep: normalized steal attempts stay within a 2x band over
/// P in {1,2,4,8,16}; normalized deviations never grow past 2x their
/// P=1 level.
#[test]
fn criterion_05_bound_sweep() {
    let dags = simops::sweep_dags(&["io_mix", "suspend_rich"]).unwrap();
    let cells = bound_sweep(&dags, &[1, 2, 4, 8, 16], Policy::Proactive, 0..30);
    let mut ok = true;
    let mut detail = String::new();
    for (name, _) in &dags {
        let fam: Vec<_> = cells.iter().filter(|c| &c.dag_id == name).collect();
        let attempts: Vec<f64> = fam.iter().map(|c| c.attempts_ratio).collect();
        let devs: Vec<f64> = fam.iter().map(|c| c.deviations_ratio).collect();
        let band = attempts.iter().cloned().fold(f64::MIN, f64::max)
            / attempts.iter().cloned().fold(f64::MAX, f64::min);
        let dev_growth = devs.iter().cloned().fold(f64::MIN, f64::max) / devs[0];
        ok &= band <= 2.0 && dev_growth <= 2.0;
        detail.push_str(&format!(
            "{name}: attempts band {band:.2}x, deviations growth {dev_growth:.2}x  "
        ));
    }
    verdict("5 (bound sweep, 30 seeds/cell)", ok, detail.trim());
}

/// 6. Deque balance: in steal-bounded states with >= 10 stealable
/// deques, the max per worker stays within D/P + 4 lg P for >= 95% of
/// samples.
#[test]
fn criterion_06_deque_balance() {
    let mut samples = 0u64;
    let mut within = 0u64;
    for seed in 0..50u64 {
        let dag = families::SUSPEND_RICH.instance(seed);
        for p in [8usize, 16] {
            let (report, _) = simulate(&dag, &SimConfig::new(p, Policy::Proactive, seed));
            samples += report.balance.samples;
            within += report.balance.within_bound;
        }
    }
    let ok = samples >= 200 && within as f64 >= 0.95 * samples as f64;
    verdict(
        "6 (deque balance D/P + 4 lg P)",
        ok,
        &format!("{within}/{samples} samples within bound"),
    );
}

/// 7. Deque exactly-once: 1 owner and 8 thieves over 1e5 frames, 50
/// repetitions, with full multiset conservation.
#[test]
fn criterion_07_deque_exactly_once() {
    const FRAMES: u64 = 100_000;
    const REPS: usize = 50;
    for rep in 0..REPS {
        let deque = WsDeque::<u64>::new(0);
        let done = Arc::new(AtomicBool::new(false));
        let counts: Arc<Vec<AtomicUsize>> =
            Arc::new((0..FRAMES).map(|_| AtomicUsize::new(0)).collect());
        std::thread::scope(|s| {
            for t in 0..8 {
                let deque = deque.clone();
                let done = done.clone();
                let counts = counts.clone();
                s.spawn(move || loop {
                    match deque.steal_top(1 + t) {
                        StealResult::Stolen(v) => {
                            counts[v as usize].fetch_add(1, Ordering::Relaxed);
                        }
                        StealResult::LostRace => {}
                        StealResult::Empty => {
                            if done.load(Ordering::Acquire) && deque.is_empty() {
                                break;
                            }
                            std::hint::spin_loop();
                        }
                    }
                });
            }
            let mut next = 0u64;
            while next < FRAMES {
                for _ in 0..3.min(FRAMES - next) {
                    deque.push_bottom(0, next);
                    next += 1;
                }
                if let Some(v) = deque.pop_bottom(0) {
                    counts[v as usize].fetch_add(1, Ordering::Relaxed);
                }
            }
            while let Some(v) = deque.pop_bottom(0) {
                counts[v as usize].fetch_add(1, Ordering::Relaxed);
            }
            done.store(true, Ordering::Release);
        });
        for (i, c) in counts.iter().enumerate() {
            let n = c.load(Ordering::Relaxed);
            assert_eq!(n, 1, "rep {rep}: frame {i} consumed {n} times");
        }
    }
    verdict(
        "7 (deque exactly-once, 8 thieves x 1e5 frames x 50 reps)",
        true,
        "zero duplicates, zero losses",
    );
}

/// 8. Event-driven idleness: one pending 500 ms I/O on an otherwise idle
/// runtime wakes its I/O thread at most 3 times and burns < 1 ms CPU.
#[test]
fn criterion_08_event_driven_idleness() {
    let _serial = serial();
    let rt = Runtime::new(RuntimeConfig::with_workers(1)).unwrap();
    // Warm up the pair so startup noise is outside the window.
    let (v, _) = rt
        .run(lathide_cli::mapreduce::fib_program(10, 3))
        .unwrap();
    assert_eq!(v, 55);
    let stats: Arc<IoStats> = rt.io_stats(0);
    let wakeups_before = stats.wakeups.load(Ordering::Relaxed);
    let cpu_before = stats.cpu_ns.load(Ordering::Relaxed);

    let cfg = BenchConfig {
        connections: 1,
        latency: Duration::from_millis(500),
        fib_n: 5,
        serial_base: 3,
        workers: 1,
        mode: Mode::Iofutures,
        reps: 1,
        seed: 0,
        backend: Default::default(),
    };
    let start = std::time::Instant::now();
    let (v, _) = rt
        .run(lathide_cli::mapreduce::mapreduce_program(&cfg))
        .unwrap();
    assert!(start.elapsed() >= Duration::from_millis(500));
    assert_eq!(v, lathide_cli::mapreduce_oracle(&cfg));

    let wakeups = stats.wakeups.load(Ordering::Relaxed) - wakeups_before;
    let cpu_ms = (stats.cpu_ns.load(Ordering::Relaxed) - cpu_before) as f64 / 1e6;
    let ok = wakeups <= 3 && cpu_ms < 1.0;
    verdict(
        "8 (event-driven idleness)",
        ok,
        &format!("{wakeups} wakeups over the 500 ms window (budget 3), {cpu_ms:.3} ms CPU"),
    );
}

/// 9. Fork-join depth ordering: every sampled deque snapshot is strictly
/// depth-ordered, so the top node carries >= 8/9 of the deque's ready
/// potential. 500 runs, zero violations.
#[test]
fn criterion_09_fork_join_depth_ordering() {
    let mut snapshots = 0u64;
    for seed in 0..500u64 {
        let dag = families::FORK_JOIN.instance(seed);
        let table = depths(&dag);
        let span = dag.span();
        let cfg = SimConfig::new(1 + (seed % 8) as usize, Policy::Proactive, seed)
            .with_snapshots(1);
        let (_, trace) = simulate(&dag, &cfg);
        for snap in &trace.snapshots {
            for deque in &snap.deques {
                if deque.entries.len() < 2 {
                    continue;
                }
                snapshots += 1;
                for pair in deque.entries.windows(2) {
                    assert!(
                        table.depth(pair[0]) < table.depth(pair[1]),
                        "seed {seed} step {}: depth order violated",
                        snap.step
                    );
                }
                let value = |n: &lathide_dag::NodeId| -> Potential {
                    potential(span as i64 - table.depth(*n) as i64, NodeStatus::Ready).unwrap()
                };
                let top = value(&deque.entries[0]);
                let total: Potential = deque.entries.iter().map(|n| value(n)).sum();
                assert!(
                    top * 9u32 >= total * 8u32,
                    "seed {seed}: top node below 8/9 of the deque potential"
                );
            }
        }
    }
    verdict(
        "9 (fork-join depth ordering, 500 runs)",
        snapshots > 1000,
        &format!("{snapshots} multi-entry snapshots, zero violations"),
    );
}

/// 10. fib oracle: the runtime computes fib(30) with serial base 15 on
/// one and four workers, matching the naive recursion computed first.
#[test]
fn criterion_10_fib_oracle() {
    let expected = fib_serial(30);
    assert_eq!(expected, 832_040);
    let mut detail = String::new();
    for p in [1usize, 4] {
        let rt = Runtime::new(RuntimeConfig::with_workers(p)).unwrap();
        let (v, counters) = rt.run(fib_program(30, 15)).unwrap();
        assert_eq!(v, expected, "P={p}");
        detail.push_str(&format!("P={p}: {v} ({} frames)  ", counters.frames_executed));
    }
    verdict("10 (fib(30) base 15 = 832040 on P in {1,4})", true, detail.trim());
}
