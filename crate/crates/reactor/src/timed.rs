//! Timed descriptors: readable once a delay elapses.

use std::io::{self, Read};
use std::os::fd::{AsRawFd, FromRawFd, OwnedFd, RawFd};
use std::sync::Once;
use std::time::Duration;

use crate::{cvt, Backend};

const MIN_DELAY: Duration = Duration::from_nanos(1);

/// A descriptor that becomes readable when its timer expires; reading it
/// returns an 8-byte expiration count. Interchangeable with a real
/// descriptor wherever one is expected.
///
/// The native backend arms a one-shot kernel timer; the portable backend
/// uses a pipe written by a helper thread after the delay.
pub struct TimedFd {
    fd: OwnedFd,
    backend: Backend,
}

impl TimedFd {
    /// Arm a one-shot timer of `delay`. Delays below the platform
    /// granularity are clamped up to it. `nonblocking` controls whether
    /// reads before expiry fail with `WouldBlock` (the asynchronous
    /// paths) or block until expiry (the blocking baseline).
    pub fn new(delay: Duration, backend: Backend, nonblocking: bool) -> io::Result<TimedFd> {
        let delay = if delay < MIN_DELAY {
            static CLAMP_WARNING: Once = Once::new();
            CLAMP_WARNING.call_once(|| {
                log::warn!("timed descriptor delay clamped up to {MIN_DELAY:?}");
            });
            MIN_DELAY
        } else {
            delay
        };
        match backend {
            #[cfg(target_os = "linux")]
            Backend::Native => {
                let mut flags = libc::TFD_CLOEXEC;
                if nonblocking {
                    flags |= libc::TFD_NONBLOCK;
                }
                let fd = cvt(unsafe { libc::timerfd_create(libc::CLOCK_MONOTONIC, flags) })?;
                let fd = unsafe { OwnedFd::from_raw_fd(fd) };
                let spec = libc::itimerspec {
                    it_interval: libc::timespec {
                        tv_sec: 0,
                        tv_nsec: 0,
                    },
                    it_value: libc::timespec {
                        tv_sec: delay.as_secs() as libc::time_t,
                        tv_nsec: delay.subsec_nanos() as libc::c_long,
                    },
                };
                cvt(unsafe {
                    libc::timerfd_settime(fd.as_raw_fd(), 0, &spec, std::ptr::null_mut())
                })?;
                Ok(TimedFd { fd, backend })
            }
            Backend::Portable => {
                let mut fds = [0 as libc::c_int; 2];
                #[cfg(target_os = "linux")]
                cvt(unsafe { libc::pipe2(fds.as_mut_ptr(), libc::O_CLOEXEC) })?;
                #[cfg(not(target_os = "linux"))]
                cvt(unsafe { libc::pipe(fds.as_mut_ptr()) })?;
                let read_fd = unsafe { OwnedFd::from_raw_fd(fds[0]) };
                let write_fd = unsafe { OwnedFd::from_raw_fd(fds[1]) };
                if nonblocking {
                    cvt(unsafe {
                        libc::fcntl(read_fd.as_raw_fd(), libc::F_SETFL, libc::O_NONBLOCK)
                    })?;
                }
                std::thread::Builder::new()
                    .name("lathide-timer".into())
                    .spawn(move || {
                        std::thread::sleep(delay);
                        let mut f = std::mem::ManuallyDrop::new(unsafe {
                            std::fs::File::from_raw_fd(write_fd.as_raw_fd())
                        });
                        // Expiration count, as the native timer reports it.
                        let _ = std::io::Write::write_all(&mut *f, &1u64.to_ne_bytes());
                        drop(write_fd);
                    })?;
                Ok(TimedFd {
                    fd: read_fd,
                    backend,
                })
            }
        }
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Read the 8-byte expiration count. Before expiry this returns
    /// `WouldBlock` on a nonblocking descriptor and blocks otherwise.
    pub fn read_count(&self) -> io::Result<u64> {
        let mut f = std::mem::ManuallyDrop::new(unsafe {
            std::fs::File::from_raw_fd(self.fd.as_raw_fd())
        });
        let mut buf = [0u8; 8];
        f.read_exact(&mut buf)?;
        Ok(u64::from_ne_bytes(buf))
    }
}

impl AsRawFd for TimedFd {
    fn as_raw_fd(&self) -> RawFd {
        self.fd.as_raw_fd()
    }
}
