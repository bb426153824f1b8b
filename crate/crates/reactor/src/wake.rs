//! The counter-semaphore wake channel.
//!
//! Signals increment a kernel-backed counter and wake the waiting I/O
//! thread on the 0 -> 1 transition; acknowledges decrement it, one per
//! dequeued item. An acknowledge can observe the counter still at zero
//! when the matching signal's increment has not landed yet (the producer
//! publishes the queue item before the counter write); the miss is
//! recorded as debt and settled before the next sleep.

use std::io::{self, Read, Write};
use std::os::fd::{AsRawFd, FromRawFd, OwnedFd, RawFd};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::{cvt, Backend};

struct Inner {
    backend: Backend,
    /// eventfd, or the read end of the wake pipe.
    read_fd: OwnedFd,
    /// Write end of the wake pipe (portable backend only).
    write_fd: Option<OwnedFd>,
    signals: AtomicU64,
    acks: AtomicU64,
    debt: AtomicU64,
}

/// Cloneable handle to one wake channel; any thread may signal, the
/// owning I/O thread acknowledges.
#[derive(Clone)]
pub struct WakeChannel(Arc<Inner>);

impl WakeChannel {
    pub fn new(backend: Backend) -> io::Result<WakeChannel> {
        let inner = match backend {
            #[cfg(target_os = "linux")]
            Backend::Native => {
                let fd = cvt(unsafe {
                    libc::eventfd(0, libc::EFD_CLOEXEC | libc::EFD_NONBLOCK | libc::EFD_SEMAPHORE)
                })?;
                Inner {
                    backend,
                    read_fd: unsafe { OwnedFd::from_raw_fd(fd) },
                    write_fd: None,
                    signals: AtomicU64::new(0),
                    acks: AtomicU64::new(0),
                    debt: AtomicU64::new(0),
                }
            }
            Backend::Portable => {
                let mut fds = [0 as libc::c_int; 2];
                #[cfg(target_os = "linux")]
                cvt(unsafe { libc::pipe2(fds.as_mut_ptr(), libc::O_CLOEXEC | libc::O_NONBLOCK) })?;
                #[cfg(not(target_os = "linux"))]
                {
                    cvt(unsafe { libc::pipe(fds.as_mut_ptr()) })?;
                    for fd in fds {
                        cvt(unsafe { libc::fcntl(fd, libc::F_SETFL, libc::O_NONBLOCK) })?;
                    }
                }
                Inner {
                    backend,
                    read_fd: unsafe { OwnedFd::from_raw_fd(fds[0]) },
                    write_fd: Some(unsafe { OwnedFd::from_raw_fd(fds[1]) }),
                    signals: AtomicU64::new(0),
                    acks: AtomicU64::new(0),
                    debt: AtomicU64::new(0),
                }
            }
        };
        Ok(WakeChannel(Arc::new(inner)))
    }

    pub fn backend(&self) -> Backend {
        self.0.backend
    }

    /// Descriptor to register (readable) in an interest set.
    pub fn fd(&self) -> RawFd {
        self.0.read_fd.as_raw_fd()
    }

    /// Increment the counter, waking the waiter if it was at zero.
    pub fn signal(&self) -> io::Result<()> {
        match self.0.backend {
            #[cfg(target_os = "linux")]
            Backend::Native => {
                let buf = 1u64.to_ne_bytes();
                let mut f = borrow_file(&self.0.read_fd);
                f.write_all(&buf)?;
            }
            Backend::Portable => {
                let write_fd = self.0.write_fd.as_ref().expect("portable wake has a pipe");
                let mut f = borrow_file(write_fd);
                match f.write(&[1u8]) {
                    Ok(_) => {}
                    // A full pipe means tens of thousands of unconsumed
                    // signals; the waiter is awake regardless.
                    Err(e) if e.kind() == io::ErrorKind::WouldBlock => return Ok(()),
                    Err(e) => return Err(e),
                }
            }
        }
        self.0.signals.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    /// Decrement the counter by one. `Ok(false)` means the matching
    /// signal has not landed yet; the miss is tracked as debt.
    pub fn acknowledge(&self) -> io::Result<bool> {
        match self.try_take_one() {
            Ok(true) => {
                self.0.acks.fetch_add(1, Ordering::Relaxed);
                Ok(true)
            }
            Ok(false) => {
                self.0.debt.fetch_add(1, Ordering::Relaxed);
                Ok(false)
            }
            Err(e) => Err(e),
        }
    }

    /// Settle deferred acknowledgements. Returns the debt still owed.
    pub fn settle(&self) -> io::Result<u64> {
        while self.0.debt.load(Ordering::Relaxed) > 0 {
            if self.try_take_one()? {
                self.0.debt.fetch_sub(1, Ordering::Relaxed);
                self.0.acks.fetch_add(1, Ordering::Relaxed);
            } else {
                break;
            }
        }
        Ok(self.0.debt.load(Ordering::Relaxed))
    }

    fn try_take_one(&self) -> io::Result<bool> {
        let mut f = borrow_file(&self.0.read_fd);
        let res = match self.0.backend {
            #[cfg(target_os = "linux")]
            Backend::Native => {
                // Semaphore mode: each read decrements the counter by one.
                let mut buf = [0u8; 8];
                f.read_exact(&mut buf).map(|_| ())
            }
            Backend::Portable => {
                let mut buf = [0u8; 1];
                f.read_exact(&mut buf).map(|_| ())
            }
        };
        match res {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => Ok(false),
            Err(e) => Err(e),
        }
    }

    pub fn signals_sent(&self) -> u64 {
        self.0.signals.load(Ordering::Relaxed)
    }

    pub fn acknowledges_done(&self) -> u64 {
        self.0.acks.load(Ordering::Relaxed)
    }

    pub fn debt(&self) -> u64 {
        self.0.debt.load(Ordering::Relaxed)
    }
}

/// Borrow an owned fd as a `File` without taking ownership.
fn borrow_file(fd: &OwnedFd) -> std::mem::ManuallyDrop<std::fs::File> {
    std::mem::ManuallyDrop::new(unsafe { std::fs::File::from_raw_fd(fd.as_raw_fd()) })
}
