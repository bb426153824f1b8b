//! I/O futures: completion semantics, the communication queue contract,
//! event-driven idleness, and the blocking reference oracle.

mod common;

use std::io::Write;
use std::os::fd::{AsRawFd, FromRawFd, OwnedFd};
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use common::SplitMix;
use lathide_runtime::{
    frame, Program, Runtime, RuntimeConfig, Slot, Step, TimedFd, SHUTDOWN_ERRNO,
};

fn timing_lock() -> MutexGuard<'static, ()> {
    static LOCK: OnceLock<Mutex<()>> = OnceLock::new();
    match LOCK.get_or_init(|| Mutex::new(())).lock() {
        Ok(g) => g,
        Err(poisoned) => poisoned.into_inner(),
    }
}

/// A nonblocking pipe with `data` already buffered; returns both ends.
fn charged_pipe(data: &[u8]) -> (OwnedFd, OwnedFd) {
    let mut fds = [0 as libc::c_int; 2];
    assert_eq!(
        unsafe { libc::pipe2(fds.as_mut_ptr(), libc::O_CLOEXEC | libc::O_NONBLOCK) },
        0
    );
    let read = unsafe { OwnedFd::from_raw_fd(fds[0]) };
    let write = unsafe { OwnedFd::from_raw_fd(fds[1]) };
    if !data.is_empty() {
        let mut f = std::mem::ManuallyDrop::new(unsafe {
            std::fs::File::from_raw_fd(write.as_raw_fd())
        });
        f.write_all(data).unwrap();
    }
    (read, write)
}

/// Run one read_async against `fd` and return (result, byte buffer).
fn read_once(rt: &Runtime, fd: i32, n: usize) -> (Result<usize, i32>, Vec<u8>) {
    let out: Slot<(Result<usize, i32>, Vec<u8>)> = Slot::new();
    let program = {
        let out = out.clone();
        Program::new(move |done: Slot<u64>| {
            frame(move |ctx| {
                let fut = ctx.read_async(fd, vec![0u8; n.max(1)], n);
                let handle = fut.handle();
                let after = frame(move |_| {
                    let c = fut.completion();
                    out.set((c.result, c.buffer.clone()));
                    done.set(0);
                    Step::Done
                });
                Step::Await {
                    handle,
                    cont: after,
                }
            })
        })
    };
    rt.run(program).unwrap();
    out.get().clone()
}

#[test]
fn buffered_descriptor_completes_with_available_bytes() {
    let rt = Runtime::new(RuntimeConfig::with_workers(2)).unwrap();
    let (read, _write) = charged_pipe(b"hello world");
    let (result, buf) = read_once(&rt, read.as_raw_fd(), 5);
    assert_eq!(result, Ok(5));
    assert_eq!(&buf[..5], b"hello");

    // Short read: asking for more than is buffered returns what exists.
    let (result, buf) = read_once(&rt, read.as_raw_fd(), 64);
    assert_eq!(result, Ok(6));
    assert_eq!(&buf[..6], b" world");
}

#[test]
fn eof_reports_zero_bytes() {
    let rt = Runtime::new(RuntimeConfig::with_workers(1)).unwrap();
    let (read, write) = charged_pipe(b"");
    drop(write);
    let (result, _) = read_once(&rt, read.as_raw_fd(), 16);
    assert_eq!(result, Ok(0), "closed writer means end-of-stream");
}

#[test]
fn write_async_transfers_bytes() {
    let rt = Runtime::new(RuntimeConfig::with_workers(2)).unwrap();
    let (read, write) = charged_pipe(b"");
    let out: Slot<Result<usize, i32>> = Slot::new();
    let program = {
        let out = out.clone();
        let wfd = write.as_raw_fd();
        Program::new(move |done: Slot<u64>| {
            frame(move |ctx| {
                let fut = ctx.write_async(wfd, b"ping".to_vec(), 4);
                let handle = fut.handle();
                let after = frame(move |_| {
                    out.set(fut.completion().result);
                    done.set(0);
                    Step::Done
                });
                Step::Await {
                    handle,
                    cont: after,
                }
            })
        })
    };
    rt.run(program).unwrap();
    assert_eq!(*out.get(), Ok(4));
    let mut buf = [0u8; 4];
    let n = unsafe { libc::read(read.as_raw_fd(), buf.as_mut_ptr().cast(), 4) };
    assert_eq!(n, 4);
    assert_eq!(&buf, b"ping");
}

#[test]
fn closed_descriptor_completes_with_error_code() {
    let rt = Runtime::new(RuntimeConfig::with_workers(1)).unwrap();
    let (result, _) = read_once(&rt, 987_654, 8);
    assert_eq!(result, Err(libc::EBADF));
}

#[test]
fn timed_read_overlaps_with_other_frames() {
    let _serial = timing_lock();
    let rt = Runtime::new(RuntimeConfig::with_workers(2)).unwrap();
    let latency = Duration::from_millis(50);
    let start = Instant::now();
    let program = Program::new(move |out: Slot<u64>| {
        frame(move |ctx| {
            let t = TimedFd::new(latency, Default::default(), true).unwrap();
            let fd = t.as_raw_fd();
            let fut = ctx.read_async(fd, vec![0u8; 8], 8);
            let handle = fut.handle();
            let filler = Slot::new();
            let join = lathide_runtime::JoinCounter::new();
            let after_sync = {
                let filler = filler.clone();
                frame(move |_| {
                    out.set(*filler.get() + fut.completion().byte_count() as u64);
                    drop(t);
                    Step::Done
                })
            };
            let join2 = join.clone();
            let cont = frame(move |_| Step::Await {
                handle,
                cont: frame(move |_| Step::Sync {
                    join: join2,
                    cont: after_sync,
                }),
            });
            Step::Spawn {
                join,
                child: common::fib_frame(24, 12, filler.clone(), frame(|_| Step::Done)),
                cont,
            }
        })
    });
    let (v, counters) = rt.run(program).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(v, common::fib_serial(24) + 8);
    assert!(elapsed >= latency);
    // The worker must have spent the wait executing frames, not parked
    // on the future.
    assert!(counters.frames_executed > 50, "{}", counters.frames_executed);
    assert_eq!(counters.worker_blocking_ops, 0);
}

#[test]
fn full_queue_falls_back_to_inline_completion() {
    // Capacity 2, and far more submissions between gets than the I/O
    // thread can drain: the overflow must complete inline.
    let rt = Runtime::new(RuntimeConfig {
        workers: 1,
        comm_queue_capacity: 2,
        ..Default::default()
    })
    .unwrap();
    let pipes: Vec<(OwnedFd, OwnedFd)> = (0..32).map(|_| charged_pipe(b"xxxxxxxx")).collect();
    let fds: Vec<i32> = pipes.iter().map(|(r, _)| r.as_raw_fd()).collect();
    let program = Program::new(move |out: Slot<u64>| {
        frame(move |ctx| {
            let futs: Vec<_> = fds
                .iter()
                .map(|&fd| ctx.read_async(fd, vec![0u8; 8], 8))
                .collect();
            fn chain(
                mut futs: Vec<lathide_runtime::IoFuture>,
                acc: u64,
                out: Slot<u64>,
            ) -> Step {
                match futs.pop() {
                    None => {
                        out.set(acc);
                        Step::Done
                    }
                    Some(f) => {
                        let handle = f.handle();
                        Step::Await {
                            handle,
                            cont: frame(move |_| {
                                let n = f.completion().byte_count() as u64;
                                chain(futs, acc + n, out)
                            }),
                        }
                    }
                }
            }
            chain(futs, 0, out)
        })
    });
    let (v, counters) = rt.run(program).unwrap();
    assert_eq!(v, 32 * 8, "all reads must complete correctly");
    assert!(
        counters.inline_completions >= 1,
        "expected backpressure fallback, counters: {counters:?}"
    );
    assert_eq!(counters.inline_completions, counters.worker_blocking_ops);
    drop(pipes);
}

#[test]
fn ready_requests_wake_io_thread_boundedly() {
    let rt = Runtime::new(RuntimeConfig::with_workers(1)).unwrap();
    let pipes: Vec<(OwnedFd, OwnedFd)> = (0..10).map(|_| charged_pipe(b"12345678")).collect();
    let before = rt.io_stats(0).wakeups.load(std::sync::atomic::Ordering::Relaxed);
    for (r, _) in &pipes {
        let (result, _) = read_once(&rt, r.as_raw_fd(), 8);
        assert_eq!(result, Ok(8));
    }
    let after = rt.io_stats(0).wakeups.load(std::sync::atomic::Ordering::Relaxed);
    let puts = rt.io_stats(0).puts.load(std::sync::atomic::Ordering::Relaxed);
    assert_eq!(puts, 10);
    assert!(
        after - before <= 13,
        "10 ready requests took {} wakeups",
        after - before
    );
}

/// One pending 500 ms I/O and an otherwise idle runtime: the paired I/O
/// thread must sleep through the window, not poll.
#[test]
fn pending_io_keeps_io_thread_asleep() {
    let _serial = timing_lock();
    let rt = Runtime::new(RuntimeConfig::with_workers(1)).unwrap();
    // Warm up so thread startup costs are excluded from the window.
    let (warm_r, _w) = charged_pipe(b"12345678");
    read_once(&rt, warm_r.as_raw_fd(), 8);

    let stats = rt.io_stats(0);
    let wakeups_before = stats.wakeups.load(std::sync::atomic::Ordering::Relaxed);
    let cpu_before = stats.cpu_ns.load(std::sync::atomic::Ordering::Relaxed);

    let program = Program::new(move |out: Slot<u64>| {
        frame(move |ctx| {
            let t = TimedFd::new(Duration::from_millis(500), Default::default(), true).unwrap();
            let fd = t.as_raw_fd();
            let fut = ctx.read_async(fd, vec![0u8; 8], 8);
            let handle = fut.handle();
            let after = frame(move |_| {
                out.set(fut.completion().byte_count() as u64);
                drop(t);
                Step::Done
            });
            Step::Await {
                handle,
                cont: after,
            }
        })
    });
    let (v, _) = rt.run(program).unwrap();
    assert_eq!(v, 8);

    let wakeups = stats.wakeups.load(std::sync::atomic::Ordering::Relaxed) - wakeups_before;
    let cpu_ns = stats.cpu_ns.load(std::sync::atomic::Ordering::Relaxed) - cpu_before;
    assert!(wakeups <= 3, "io thread woke {wakeups} times for one pending io");
    assert!(
        cpu_ns < 1_000_000,
        "io thread burned {cpu_ns} ns during a 500 ms sleep window"
    );
}

#[test]
fn queue_conservation_enqueued_equals_dequeued() {
    let rt = Runtime::new(RuntimeConfig::with_workers(1)).unwrap();
    for round in 0..50 {
        let (r, _w) = charged_pipe(b"abcdefgh");
        let (result, _) = read_once(&rt, r.as_raw_fd(), 8);
        assert_eq!(result, Ok(8), "round {round}");
    }
    let stats = rt.io_stats(0);
    let enq = stats.enqueued.load(std::sync::atomic::Ordering::Relaxed);
    let deq = stats.dequeued.load(std::sync::atomic::Ordering::Relaxed);
    assert_eq!(enq, deq);
    assert_eq!(enq, 50);
}

#[test]
fn shutdown_completes_pending_requests_with_error() {
    let rt = Runtime::new(RuntimeConfig::with_workers(1)).unwrap();
    let cell: Slot<lathide_runtime::IoFuture> = Slot::new();
    let t = TimedFd::new(Duration::from_secs(30), Default::default(), true).unwrap();
    let fd = t.as_raw_fd();
    let program = {
        let cell = cell.clone();
        Program::new(move |out: Slot<u64>| {
            frame(move |ctx| {
                // Issue the read but never get it; the root finishes with
                // the io still pending.
                cell.set(ctx.read_async(fd, vec![0u8; 8], 8));
                out.set(1);
                Step::Done
            })
        })
    };
    rt.run(program).unwrap();
    let fut = cell.get().clone();
    assert!(fut.try_completion().is_none(), "io must still be pending");
    rt.shutdown();
    let completion = fut.try_completion().expect("shutdown must complete the handle");
    assert_eq!(completion.result, Err(SHUTDOWN_ERRNO));
}

/// Randomized scripts executed both through the runtime and through a
/// plain blocking-read reference: completions must agree.
#[test]
fn completion_values_match_blocking_reference() {
    let rt = Runtime::new(RuntimeConfig::with_workers(2)).unwrap();
    let mut rng = SplitMix(0xfeed_beef);
    let mut keep_alive: Vec<OwnedFd> = Vec::new();
    for script in 0..100 {
        let data_len = (rng.next() % 64) as usize;
        let ask = 1 + (rng.next() % 96) as usize;
        let close_writer = rng.next() % 3 == 0;
        let data: Vec<u8> = (0..data_len).map(|i| (i as u8).wrapping_mul(31)).collect();
        if data.is_empty() && !close_writer {
            // Both sides would wait forever; the pending cases are
            // covered by the timed-descriptor tests.
            continue;
        }

        // Reference: a blocking read on an identical pipe.
        let (ref_r, ref_w) = charged_pipe(&data);
        if close_writer {
            drop(ref_w);
        } else {
            keep_alive.push(ref_w);
        }
        let expected = blocking_read_reference(ref_r.as_raw_fd(), ask, true);

        let (r, w) = charged_pipe(&data);
        if close_writer {
            drop(w);
        } else {
            keep_alive.push(w);
        }
        let (result, buf) = read_once(&rt, r.as_raw_fd(), ask);
        assert_eq!(result, expected.0, "script {script}");
        if let Ok(n) = result {
            assert_eq!(&buf[..n], &expected.1[..n], "script {script}");
        }
    }
}

fn blocking_read_reference(fd: i32, ask: usize, will_complete: bool) -> (Result<usize, i32>, Vec<u8>) {
    assert!(will_complete);
    let mut buf = vec![0u8; ask];
    loop {
        let rc = unsafe { libc::read(fd, buf.as_mut_ptr().cast(), ask) };
        if rc >= 0 {
            return (Ok(rc as usize), buf);
        }
        let err = std::io::Error::last_os_error();
        if err.kind() == std::io::ErrorKind::WouldBlock {
            std::thread::sleep(Duration::from_micros(100));
            continue;
        }
        if err.kind() == std::io::ErrorKind::Interrupted {
            continue;
        }
        return (Err(err.raw_os_error().unwrap_or(0)), buf);
    }
}
