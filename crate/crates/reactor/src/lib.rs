//! Readiness monitoring for the I/O threads.
//!
//! Three pieces, combined by [`Reactor`]:
//!
//! * [`InterestSet`] — a set of descriptors monitored for readability or
//!   writability, with a blocking wait;
//! * [`WakeChannel`] — a counter with semaphore semantics that another
//!   thread can signal to interrupt the wait (one signal per enqueued
//!   item, one acknowledge per dequeued item);
//! * [`TimedFd`] — a descriptor that becomes readable once a timer
//!   expires, interchangeable with a real descriptor; reading it yields
//!   an 8-byte expiration count.
//!
//! Two backends sit behind the same interface: the native one uses the
//! platform's scalable readiness facility with counter and timer
//! descriptors, and a portable fallback multiplexes with `poll` and uses
//! pipes for the wake channel and timers. Readiness is level-triggered
//! in both.

mod backend;
mod timed;
mod wake;

pub use backend::{Event, Interest, InterestSet, Token};
pub use timed::TimedFd;
pub use wake::WakeChannel;

use std::io;
use std::time::Duration;

/// Which backend an [`InterestSet`], [`WakeChannel`] or [`TimedFd`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// epoll + eventfd + timerfd.
    #[cfg(target_os = "linux")]
    #[default]
    Native,
    /// poll + pipes. Works on any unix; the fallback when the native
    /// facility is unavailable.
    #[cfg_attr(not(target_os = "linux"), default)]
    Portable,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            #[cfg(target_os = "linux")]
            Backend::Native => "native",
            Backend::Portable => "portable",
        }
    }
}

/// Token reserved for the wake channel inside a [`Reactor`].
pub const WAKE_TOKEN: Token = Token(u64::MAX);

/// Result of one [`Reactor::wait`] round.
#[derive(Debug, Default)]
pub struct WaitOutcome {
    /// Ready descriptors, excluding the wake channel.
    pub events: Vec<Event>,
    /// The wake channel counter is above zero.
    pub woken: bool,
}

/// An interest set paired with a wake channel, the shape an I/O thread
/// drives: sleep until a descriptor is ready or the paired worker signals.
pub struct Reactor {
    set: InterestSet,
    wake: WakeChannel,
}

impl Reactor {
    pub fn new(backend: Backend) -> io::Result<Reactor> {
        let mut set = InterestSet::new(backend)?;
        let wake = WakeChannel::new(backend)?;
        set.register(wake.fd(), WAKE_TOKEN, Interest::READABLE)?;
        Ok(Reactor { set, wake })
    }

    pub fn backend(&self) -> Backend {
        self.set.backend()
    }

    /// Handle other threads use to signal the wake channel.
    pub fn wake_handle(&self) -> WakeChannel {
        self.wake.clone()
    }

    pub fn register(&mut self, fd: libc::c_int, token: Token, interest: Interest) -> io::Result<()> {
        self.set.register(fd, token, interest)
    }

    pub fn deregister(&mut self, fd: libc::c_int) -> io::Result<()> {
        self.set.deregister(fd)
    }

    /// Number of descriptors currently registered (excluding the wake
    /// channel).
    pub fn registered(&self) -> usize {
        self.set.len().saturating_sub(1)
    }

    /// Block until a registered descriptor is ready or the wake channel
    /// is signaled. `None` means wait forever.
    pub fn wait(&mut self, timeout: Option<Duration>) -> io::Result<WaitOutcome> {
        let mut out = WaitOutcome::default();
        let mut events = Vec::new();
        self.set.wait(&mut events, timeout)?;
        for ev in events {
            if ev.token == WAKE_TOKEN {
                out.woken = true;
            } else {
                out.events.push(ev);
            }
        }
        Ok(out)
    }

    /// Acknowledge one previously signaled wake (one per dequeued item).
    /// Returns false when the counter publication is still in flight; the
    /// caller retries via [`Reactor::settle_acknowledgements`].
    pub fn acknowledge(&self) -> io::Result<bool> {
        self.wake.acknowledge()
    }

    /// Settle deferred acknowledgements before sleeping again.
    pub fn settle_acknowledgements(&self) -> io::Result<u64> {
        self.wake.settle()
    }
}

/// Thread CPU clock reading, for the no-polling checks.
pub fn thread_cpu_time() -> Duration {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return Duration::ZERO;
    }
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

pub(crate) fn cvt(rc: libc::c_int) -> io::Result<libc::c_int> {
    if rc < 0 {
        Err(io::Error::last_os_error())
    } else {
        Ok(rc)
    }
}
