//! Interest sets over the two readiness backends.

use std::collections::HashMap;
use std::io;
use std::os::fd::{AsRawFd, FromRawFd, OwnedFd, RawFd};
use std::time::Duration;

use crate::{cvt, Backend};

/// Caller-chosen identifier reported back with each event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Token(pub u64);

/// Readiness interest for a registered descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interest {
    pub readable: bool,
    pub writable: bool,
}

impl Interest {
    pub const READABLE: Interest = Interest {
        readable: true,
        writable: false,
    };
    pub const WRITABLE: Interest = Interest {
        readable: false,
        writable: true,
    };
    pub const BOTH: Interest = Interest {
        readable: true,
        writable: true,
    };
}

/// One readiness report.
#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub token: Token,
    pub readable: bool,
    pub writable: bool,
}

enum Imp {
    #[cfg(target_os = "linux")]
    Epoll { epfd: OwnedFd },
    Poll,
}

/// A set of descriptors monitored for readiness. Owned by exactly one
/// thread; registration is idempotent (re-registering updates the
/// interest and token) and deregistration of an unknown descriptor is a
/// no-op.
pub struct InterestSet {
    imp: Imp,
    backend: Backend,
    registered: HashMap<RawFd, (Token, Interest)>,
}

impl InterestSet {
    pub fn new(backend: Backend) -> io::Result<InterestSet> {
        let imp = match backend {
            #[cfg(target_os = "linux")]
            Backend::Native => {
                let fd = cvt(unsafe { libc::epoll_create1(libc::EPOLL_CLOEXEC) })?;
                Imp::Epoll {
                    epfd: unsafe { OwnedFd::from_raw_fd(fd) },
                }
            }
            Backend::Portable => Imp::Poll,
        };
        Ok(InterestSet {
            imp,
            backend,
            registered: HashMap::new(),
        })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn len(&self) -> usize {
        self.registered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registered.is_empty()
    }

    pub fn register(&mut self, fd: RawFd, token: Token, interest: Interest) -> io::Result<()> {
        match &self.imp {
            #[cfg(target_os = "linux")]
            Imp::Epoll { epfd } => {
                let mut ev = libc::epoll_event {
                    events: epoll_mask(interest),
                    u64: token.0,
                };
                let op = if self.registered.contains_key(&fd) {
                    libc::EPOLL_CTL_MOD
                } else {
                    libc::EPOLL_CTL_ADD
                };
                let rc = unsafe { libc::epoll_ctl(epfd.as_raw_fd(), op, fd, &mut ev) };
                if rc < 0 {
                    let err = io::Error::last_os_error();
                    // A raced add (already present) degrades to an update.
                    if err.raw_os_error() == Some(libc::EEXIST) {
                        cvt(unsafe {
                            libc::epoll_ctl(epfd.as_raw_fd(), libc::EPOLL_CTL_MOD, fd, &mut ev)
                        })?;
                    } else {
                        return Err(err);
                    }
                }
            }
            Imp::Poll => {
                // Validate the descriptor so a closed fd errors here, as
                // the native backend would.
                let rc = unsafe { libc::fcntl(fd, libc::F_GETFD) };
                if rc < 0 {
                    return Err(io::Error::last_os_error());
                }
            }
        }
        self.registered.insert(fd, (token, interest));
        Ok(())
    }

    pub fn deregister(&mut self, fd: RawFd) -> io::Result<()> {
        if self.registered.remove(&fd).is_none() {
            return Ok(());
        }
        match &self.imp {
            #[cfg(target_os = "linux")]
            Imp::Epoll { epfd } => {
                let rc = unsafe {
                    libc::epoll_ctl(epfd.as_raw_fd(), libc::EPOLL_CTL_DEL, fd, std::ptr::null_mut())
                };
                if rc < 0 {
                    let err = io::Error::last_os_error();
                    // The descriptor may already be closed; removal is
                    // idempotent either way.
                    if !matches!(err.raw_os_error(), Some(libc::ENOENT) | Some(libc::EBADF)) {
                        return Err(err);
                    }
                }
            }
            Imp::Poll => {}
        }
        Ok(())
    }

    /// Block until at least one registered descriptor is ready, or the
    /// timeout elapses (`None`: wait forever). Appends readiness reports
    /// to `events` and returns how many were added.
    pub fn wait(&mut self, events: &mut Vec<Event>, timeout: Option<Duration>) -> io::Result<usize> {
        let timeout_ms: libc::c_int = match timeout {
            None => -1,
            Some(d) => {
                // Round up so tiny nonzero timeouts still sleep.
                let ms = d.as_millis();
                let ms = if ms == 0 && !d.is_zero() { 1 } else { ms };
                ms.min(i32::MAX as u128) as libc::c_int
            }
        };
        match &self.imp {
            #[cfg(target_os = "linux")]
            Imp::Epoll { epfd } => {
                let mut buf = [libc::epoll_event { events: 0, u64: 0 }; 64];
                let n = loop {
                    let rc = unsafe {
                        libc::epoll_wait(
                            epfd.as_raw_fd(),
                            buf.as_mut_ptr(),
                            buf.len() as libc::c_int,
                            timeout_ms,
                        )
                    };
                    if rc >= 0 {
                        break rc as usize;
                    }
                    let err = io::Error::last_os_error();
                    if err.kind() != io::ErrorKind::Interrupted {
                        return Err(err);
                    }
                };
                for ev in &buf[..n] {
                    let err = ev.events & (libc::EPOLLERR | libc::EPOLLHUP) as u32 != 0;
                    events.push(Event {
                        token: Token(ev.u64),
                        readable: err || ev.events & libc::EPOLLIN as u32 != 0,
                        writable: err || ev.events & libc::EPOLLOUT as u32 != 0,
                    });
                }
                Ok(n)
            }
            Imp::Poll => {
                let mut fds: Vec<libc::pollfd> = self
                    .registered
                    .iter()
                    .map(|(&fd, &(_, interest))| libc::pollfd {
                        fd,
                        events: poll_mask(interest),
                        revents: 0,
                    })
                    .collect();
                loop {
                    let rc = unsafe {
                        libc::poll(fds.as_mut_ptr(), fds.len() as libc::nfds_t, timeout_ms)
                    };
                    if rc >= 0 {
                        break;
                    }
                    let err = io::Error::last_os_error();
                    if err.kind() != io::ErrorKind::Interrupted {
                        return Err(err);
                    }
                }
                let mut n = 0;
                for pfd in &fds {
                    if pfd.revents == 0 {
                        continue;
                    }
                    let (token, _) = self.registered[&pfd.fd];
                    let err = pfd.revents & (libc::POLLERR | libc::POLLHUP | libc::POLLNVAL) != 0;
                    events.push(Event {
                        token,
                        readable: err || pfd.revents & libc::POLLIN != 0,
                        writable: err || pfd.revents & libc::POLLOUT != 0,
                    });
                    n += 1;
                }
                Ok(n)
            }
        }
    }
}

#[cfg(target_os = "linux")]
fn epoll_mask(interest: Interest) -> u32 {
    let mut m = 0u32;
    if interest.readable {
        m |= libc::EPOLLIN as u32;
    }
    if interest.writable {
        m |= libc::EPOLLOUT as u32;
    }
    m
}

fn poll_mask(interest: Interest) -> libc::c_short {
    let mut m = 0;
    if interest.readable {
        m |= libc::POLLIN;
    }
    if interest.writable {
        m |= libc::POLLOUT;
    }
    m
}
