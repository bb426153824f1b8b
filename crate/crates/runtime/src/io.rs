//! Asynchronous I/O: request bundles, the per-worker communication
//! queue, and the I/O thread loop.
//!
//! A worker never performs blocking I/O. `read_async`/`write_async`
//! bundle the descriptor, buffer and future handle into an [`IoRequest`],
//! enqueue it on the worker's communication queue and signal the wake
//! channel; the paired I/O thread attempts the operation without
//! blocking, parks it in its reactor when the descriptor is not ready,
//! and performs the put once it completes. The thread sleeps whenever
//! its queue is empty and no parked descriptor is ready.

use std::collections::HashMap;
use std::io;
use std::os::fd::RawFd;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use lathide_reactor::{Interest, Reactor, Token};

use crate::counters::IoStats;
use crate::spsc::Consumer;
use crate::task::{FutureHandle, TaskUnit};

/// Error code used when the runtime shuts down with requests in flight.
pub const SHUTDOWN_ERRNO: i32 = libc::ECANCELED;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IoKind {
    Read,
    Write,
}

/// Completion of one asynchronous operation: the byte count (0 means
/// end-of-stream for reads) or an OS error code, plus the buffer handed
/// back to the caller.
#[derive(Debug)]
pub struct IoCompletion {
    pub result: Result<usize, i32>,
    pub buffer: Vec<u8>,
}

impl IoCompletion {
    pub fn byte_count(&self) -> usize {
        self.result.unwrap_or(0)
    }
}

/// One queued asynchronous operation.
pub(crate) struct IoRequest {
    pub kind: IoKind,
    pub fd: RawFd,
    pub buffer: Vec<u8>,
    /// Bytes to read (at most the buffer length) or write.
    pub len: usize,
    pub handle: FutureHandle,
    pub cell: Arc<OnceLock<IoCompletion>>,
}

/// Caller's view of a pending asynchronous operation: the future handle
/// to get on, plus the typed completion cell.
#[derive(Clone)]
pub struct IoFuture {
    pub(crate) handle: FutureHandle,
    pub(crate) cell: Arc<OnceLock<IoCompletion>>,
}

impl IoFuture {
    pub fn handle(&self) -> FutureHandle {
        self.handle.clone()
    }

    /// The completion; only present once the future is ready.
    pub fn try_completion(&self) -> Option<&IoCompletion> {
        self.cell.get()
    }

    /// The completion after a successful get.
    pub fn completion(&self) -> &IoCompletion {
        self.cell.get().expect("io future read before completion")
    }
}

/// One nonblocking attempt at the operation. Short reads and writes are
/// returned as-is; `WouldBlock` means the descriptor is not ready.
pub(crate) fn attempt(kind: IoKind, fd: RawFd, buf: &mut [u8], len: usize) -> io::Result<usize> {
    let n = len.min(buf.len());
    loop {
        let rc = match kind {
            IoKind::Read => unsafe { libc::read(fd, buf.as_mut_ptr().cast(), n) },
            IoKind::Write => unsafe { libc::write(fd, buf.as_ptr().cast(), n) },
        };
        if rc >= 0 {
            return Ok(rc as usize);
        }
        let err = io::Error::last_os_error();
        if err.kind() == io::ErrorKind::Interrupted {
            continue;
        }
        return Err(err);
    }
}

/// Wait for readiness with `poll`, then attempt. This is the degraded
/// inline path a worker takes when its communication queue is full, and
/// the blocking baseline used by the benchmark's non-future modes.
pub(crate) fn blocking_perform(kind: IoKind, fd: RawFd, buf: &mut [u8], len: usize) -> io::Result<usize> {
    loop {
        match attempt(kind, fd, buf, len) {
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                let mut pfd = libc::pollfd {
                    fd,
                    events: match kind {
                        IoKind::Read => libc::POLLIN,
                        IoKind::Write => libc::POLLOUT,
                    },
                    revents: 0,
                };
                let rc = unsafe { libc::poll(&mut pfd, 1, -1) };
                if rc < 0 {
                    let err = io::Error::last_os_error();
                    if err.kind() == io::ErrorKind::Interrupted {
                        continue;
                    }
                    return Err(err);
                }
            }
            other => return other,
        }
    }
}

fn complete(req: IoRequest, result: Result<usize, i32>, stats: &IoStats) {
    let IoRequest {
        buffer,
        handle,
        cell,
        ..
    } = req;
    let _ = cell.set(IoCompletion { result, buffer });
    match handle.core.complete() {
        Ok(Some(waiter)) => {
            waiter
                .deque
                .push_resume(waiter.unit)
                .expect("suspended waiter deque accepts the resume frame");
        }
        Ok(None) => {}
        Err(_) => unreachable!("io futures are put exactly once"),
    }
    stats.puts.fetch_add(1, Ordering::Relaxed);
}

fn errno(e: &io::Error) -> i32 {
    e.raw_os_error().unwrap_or(libc::EIO)
}

pub(crate) struct IoThread {
    pub queue: Consumer<IoRequest>,
    pub reactor: Reactor,
    pub stats: Arc<IoStats>,
    pub shutdown: Arc<AtomicBool>,
    pub pending_futures: Arc<crate::counters::PendingFutures>,
}

impl IoThread {
    pub fn run(mut self) {
        let mut parked: HashMap<RawFd, Vec<IoRequest>> = HashMap::new();
        loop {
            let outcome = match self.reactor.wait(None) {
                Ok(o) => o,
                Err(e) => {
                    log::error!("io thread wait failed: {e}");
                    break;
                }
            };
            self.stats.wakeups.fetch_add(1, Ordering::Relaxed);
            let _ = self.reactor.settle_acknowledgements();

            for ev in outcome.events {
                let fd = ev.token.0 as RawFd;
                if let Some(reqs) = parked.remove(&fd) {
                    self.service_ready(fd, reqs, &mut parked);
                }
            }

            while let Some(req) = self.queue.pop() {
                let _ = self.reactor.acknowledge();
                self.stats.dequeued.fetch_add(1, Ordering::Relaxed);
                self.process(req, &mut parked);
            }

            self.record_cpu();
            if self.shutdown.load(Ordering::Acquire) {
                self.drain(parked);
                return;
            }
        }
    }

    /// First attempt for a fresh request: run it now if the descriptor
    /// cooperates, otherwise register and park.
    fn process(&mut self, mut req: IoRequest, parked: &mut HashMap<RawFd, Vec<IoRequest>>) {
        // Order behind already-parked requests on the same descriptor.
        if let Some(queue) = parked.get_mut(&req.fd) {
            queue.push(req);
            return;
        }
        match attempt(req.kind, req.fd, &mut req.buffer, req.len) {
            Ok(n) => {
                self.pending_futures.dec();
                complete(req, Ok(n), &self.stats);
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                let interest = match req.kind {
                    IoKind::Read => Interest::READABLE,
                    IoKind::Write => Interest::WRITABLE,
                };
                match self.reactor.register(req.fd, Token(req.fd as u64), interest) {
                    Ok(()) => {
                        self.stats.registrations.fetch_add(1, Ordering::Relaxed);
                        parked.entry(req.fd).or_default().push(req);
                    }
                    Err(e) => {
                        self.pending_futures.dec();
                        complete(req, Err(errno(&e)), &self.stats);
                    }
                }
            }
            Err(e) => {
                self.pending_futures.dec();
                complete(req, Err(errno(&e)), &self.stats);
            }
        }
    }

    /// A parked descriptor became ready: run its queue until it would
    /// block again or empties.
    fn service_ready(&mut self, fd: RawFd, reqs: Vec<IoRequest>, parked: &mut HashMap<RawFd, Vec<IoRequest>>) {
        let mut rest = reqs.into_iter();
        for mut req in rest.by_ref() {
            match attempt(req.kind, req.fd, &mut req.buffer, req.len) {
                Ok(n) => {
                    self.pending_futures.dec();
                    complete(req, Ok(n), &self.stats);
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    let mut back: Vec<IoRequest> = vec![req];
                    back.extend(rest);
                    parked.insert(fd, back);
                    return;
                }
                Err(e) => {
                    self.pending_futures.dec();
                    complete(req, Err(errno(&e)), &self.stats);
                }
            }
        }
        let _ = self.reactor.deregister(fd);
    }

    /// Shutdown: everything still queued or parked completes with an
    /// error put so no handle is left pending.
    fn drain(mut self, parked: HashMap<RawFd, Vec<IoRequest>>) {
        while let Some(req) = self.queue.pop() {
            let _ = self.reactor.acknowledge();
            self.stats.dequeued.fetch_add(1, Ordering::Relaxed);
            self.pending_futures.dec();
            complete(req, Err(SHUTDOWN_ERRNO), &self.stats);
        }
        for (fd, reqs) in parked {
            let _ = self.reactor.deregister(fd);
            for req in reqs {
                self.pending_futures.dec();
                complete(req, Err(SHUTDOWN_ERRNO), &self.stats);
            }
        }
        self.record_cpu();
    }

    fn record_cpu(&self) {
        let ns = lathide_reactor::thread_cpu_time().as_nanos() as u64;
        self.stats.cpu_ns.store(ns, Ordering::Relaxed);
    }
}

/// Poll-based helper the `WorkerReactor` I/O mode uses: the requesting
/// worker drives a private reactor between steal attempts instead of
/// handing requests to an I/O thread.
pub(crate) struct InlineReactor {
    pub reactor: Reactor,
    parked: HashMap<RawFd, Vec<IoRequest>>,
    pub stats: Arc<IoStats>,
    pending_futures: Arc<crate::counters::PendingFutures>,
}

impl InlineReactor {
    pub fn new(backend: lathide_reactor::Backend, stats: Arc<IoStats>, pending: Arc<crate::counters::PendingFutures>) -> io::Result<InlineReactor> {
        Ok(InlineReactor {
            reactor: Reactor::new(backend)?,
            parked: HashMap::new(),
            stats,
            pending_futures: pending,
        })
    }

    pub fn submit(&mut self, mut req: IoRequest) {
        match attempt(req.kind, req.fd, &mut req.buffer, req.len) {
            Ok(n) => {
                self.pending_futures.dec();
                complete(req, Ok(n), &self.stats);
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                let interest = match req.kind {
                    IoKind::Read => Interest::READABLE,
                    IoKind::Write => Interest::WRITABLE,
                };
                match self.reactor.register(req.fd, Token(req.fd as u64), interest) {
                    Ok(()) => {
                        self.stats.registrations.fetch_add(1, Ordering::Relaxed);
                        self.parked.entry(req.fd).or_default().push(req);
                    }
                    Err(e) => {
                        self.pending_futures.dec();
                        complete(req, Err(errno(&e)), &self.stats);
                    }
                }
            }
            Err(e) => {
                self.pending_futures.dec();
                complete(req, Err(errno(&e)), &self.stats);
            }
        }
    }

    /// Nonblocking poll of the private reactor; completes whatever became
    /// ready. Returns how many puts were performed.
    pub fn poll(&mut self) -> usize {
        if self.parked.is_empty() {
            return 0;
        }
        let outcome = match self.reactor.wait(Some(Duration::ZERO)) {
            Ok(o) => o,
            Err(_) => return 0,
        };
        let mut puts = 0;
        for ev in outcome.events {
            let fd = ev.token.0 as RawFd;
            if let Some(reqs) = self.parked.remove(&fd) {
                puts += self.service_ready(fd, reqs);
            }
        }
        puts
    }

    fn service_ready(&mut self, fd: RawFd, reqs: Vec<IoRequest>) -> usize {
        let mut puts = 0;
        let mut rest = reqs.into_iter();
        for mut req in rest.by_ref() {
            match attempt(req.kind, req.fd, &mut req.buffer, req.len) {
                Ok(n) => {
                    self.pending_futures.dec();
                    complete(req, Ok(n), &self.stats);
                    puts += 1;
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    let mut back: Vec<IoRequest> = vec![req];
                    back.extend(rest);
                    self.parked.insert(fd, back);
                    return puts;
                }
                Err(e) => {
                    self.pending_futures.dec();
                    complete(req, Err(errno(&e)), &self.stats);
                    puts += 1;
                }
            }
        }
        let _ = self.reactor.deregister(fd);
        puts
    }

    pub fn drain_with_error(&mut self) {
        let parked = std::mem::take(&mut self.parked);
        for (fd, reqs) in parked {
            let _ = self.reactor.deregister(fd);
            for req in reqs {
                self.pending_futures.dec();
                complete(req, Err(SHUTDOWN_ERRNO), &self.stats);
            }
        }
    }

}

// The resume path pushes TaskUnits from the I/O thread; keep the
// assumption explicit.
const _: fn() = || {
    fn assert_send<T: Send>() {}
    assert_send::<TaskUnit>();
};
