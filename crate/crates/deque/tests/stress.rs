//! Concurrency stress harnesses for the work-stealing deque.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Barrier};
use std::thread;

use lathide_deque::{StealResult, WsDeque};

/// One owner pushing and popping, k thieves stealing: every frame must be
/// consumed exactly once, with no losses and no duplicates.
fn exactly_once(thieves: usize, frames: u64) {
    let deque = WsDeque::<u64>::new(0);
    let done = Arc::new(AtomicBool::new(false));
    let counts: Arc<Vec<AtomicUsize>> =
        Arc::new((0..frames).map(|_| AtomicUsize::new(0)).collect());

    thread::scope(|s| {
        for t in 0..thieves {
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

        // Owner: push small bursts and pop between them, so both ends are
        // active while the thieves hammer the top.
        let mut next = 0u64;
        while next < frames {
            let burst = 3.min(frames - next);
            for _ in 0..burst {
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
        assert_eq!(
            c.load(Ordering::Relaxed),
            1,
            "frame {i} consumed {} times with {thieves} thieves",
            c.load(Ordering::Relaxed)
        );
    }
}

#[test]
fn exactly_once_under_steal_pressure() {
    for &thieves in &[1usize, 2, 4, 8] {
        exactly_once(thieves, 100_000);
    }
}

/// Single-entry deque: an owner pop racing one thief must hand the frame
/// to exactly one of them.
#[test]
fn single_entry_race_has_one_winner() {
    const TRIALS: usize = 100_000;
    let deque = WsDeque::<u64>::new(0);
    let barrier = Arc::new(Barrier::new(2));
    let thief_got = Arc::new(AtomicUsize::new(0));
    let stop = Arc::new(AtomicBool::new(false));

    thread::scope(|s| {
        {
            let deque = deque.clone();
            let barrier = barrier.clone();
            let thief_got = thief_got.clone();
            let stop = stop.clone();
            s.spawn(move || loop {
                barrier.wait();
                if stop.load(Ordering::Acquire) {
                    break;
                }
                loop {
                    match deque.steal_top(1) {
                        StealResult::Stolen(_) => {
                            thief_got.fetch_add(1, Ordering::Relaxed);
                            break;
                        }
                        StealResult::Empty => break,
                        StealResult::LostRace => {}
                    }
                }
                barrier.wait();
            });
        }

        let mut owner_got = 0usize;
        for i in 0..TRIALS {
            deque.push_bottom(0, i as u64);
            barrier.wait();
            if deque.pop_bottom(0).is_some() {
                owner_got += 1;
            }
            barrier.wait();
            assert!(deque.is_empty(), "trial {i} left the deque nonempty");
        }
        stop.store(true, Ordering::Release);
        barrier.wait();

        assert_eq!(
            owner_got + thief_got.load(Ordering::Relaxed),
            TRIALS,
            "every frame must be taken exactly once"
        );
    });
}

/// Steals racing a suspension and the resume push still conserve frames:
/// all eight originals plus the single resume frame are consumed exactly
/// once between the thieves and the adopter.
#[test]
fn suspend_resume_under_concurrent_steals() {
    const RESUME: u64 = 8;
    for round in 0..200 {
        let deque = WsDeque::<u64>::new(0);
        for i in 0..RESUME {
            deque.push_bottom(0, i);
        }
        let counts: Arc<Vec<AtomicUsize>> =
            Arc::new((0..=RESUME).map(|_| AtomicUsize::new(0)).collect());
        let done = Arc::new(AtomicBool::new(false));
        thread::scope(|s| {
            for t in 0..2 {
                let deque = deque.clone();
                let counts = counts.clone();
                let done = done.clone();
                s.spawn(move || loop {
                    match deque.steal_top(1 + t) {
                        StealResult::Stolen(v) => {
                            counts[v as usize].fetch_add(1, Ordering::Relaxed);
                        }
                        StealResult::LostRace => {}
                        StealResult::Empty => {
                            if done.load(Ordering::Acquire) {
                                break;
                            }
                        }
                    }
                });
            }
            deque.suspend(0).unwrap();
            deque.push_resume(RESUME).unwrap();
            done.store(true, Ordering::Release);
        });
        if deque.try_adopt(5) {
            while let Some(v) = deque.pop_bottom(5) {
                counts[v as usize].fetch_add(1, Ordering::Relaxed);
            }
        }
        for (i, c) in counts.iter().enumerate() {
            assert_eq!(
                c.load(Ordering::Relaxed),
                1,
                "frame {i} miscounted in round {round}"
            );
        }
    }
}
