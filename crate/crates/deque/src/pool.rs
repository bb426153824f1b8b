//! Per-worker deque bookkeeping: the active deque, inactive deques
//! visible to thieves, and the donation mailbox.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use crate::{DequeState, WorkerId, WsDeque};

const MAILBOX_CAPACITY: usize = 4096;

/// Donation failed because the target mailbox is full; the deque is
/// handed back to the caller.
pub struct DonateError<T>(pub Arc<WsDeque<T>>);

impl<T> std::fmt::Debug for DonateError<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DonateError(mailbox full)")
    }
}

struct PoolInner<T> {
    active: Option<Arc<WsDeque<T>>>,
    inactive: Vec<Arc<WsDeque<T>>>,
}

/// One worker's set of deques.
///
/// The inner list is read by thieves picking a victim deque, so it sits
/// behind a mutex; all operations hold it only briefly. The mailbox is a
/// separate lock so donors never contend with thieves.
pub struct DequePool<T> {
    worker: WorkerId,
    inner: Mutex<PoolInner<T>>,
    mailbox: Mutex<VecDeque<Arc<WsDeque<T>>>>,
}

impl<T: Send> DequePool<T> {
    pub fn new(worker: WorkerId) -> Self {
        DequePool {
            worker,
            inner: Mutex::new(PoolInner {
                active: None,
                inactive: Vec::new(),
            }),
            mailbox: Mutex::new(VecDeque::new()),
        }
    }

    pub fn worker(&self) -> WorkerId {
        self.worker
    }

    pub fn active(&self) -> Option<Arc<WsDeque<T>>> {
        self.inner.lock().unwrap().active.clone()
    }

    /// Install `d` as the active deque, returning the previous one.
    pub fn replace_active(&self, d: Option<Arc<WsDeque<T>>>) -> Option<Arc<WsDeque<T>>> {
        let mut inner = self.inner.lock().unwrap();
        match d {
            Some(d) => inner.active.replace(d),
            None => inner.active.take(),
        }
    }

    /// Move the (just-suspended) active deque into the inactive set and
    /// return it, so the caller can donate it.
    pub fn retire_active(&self) -> Option<Arc<WsDeque<T>>> {
        self.inner.lock().unwrap().active.take()
    }

    /// Record an inactive deque owned by this worker.
    pub fn add_inactive(&self, d: Arc<WsDeque<T>>) {
        self.inner.lock().unwrap().inactive.push(d);
    }

    /// Drop `d` from this pool's inactive set (after a thief adopted it).
    /// Returns whether it was present.
    pub fn remove_inactive(&self, d: &Arc<WsDeque<T>>) -> bool {
        let mut inner = self.inner.lock().unwrap();
        match inner.inactive.iter().position(|x| Arc::ptr_eq(x, d)) {
            Some(i) => {
                inner.inactive.swap_remove(i);
                true
            }
            None => false,
        }
    }

    /// Deposit a suspended deque donated by another worker (or by this
    /// worker itself when it is the only one).
    pub fn donate(&self, d: Arc<WsDeque<T>>) -> Result<(), DonateError<T>> {
        let mut mb = self.mailbox.lock().unwrap();
        if mb.len() >= MAILBOX_CAPACITY {
            return Err(DonateError(d));
        }
        mb.push_back(d);
        Ok(())
    }

    /// Move mailbox contents into the inactive set. Called by the owner
    /// opportunistically (each steal attempt and each suspension).
    pub fn drain_mailbox(&self) -> usize {
        let drained: Vec<_> = {
            let mut mb = self.mailbox.lock().unwrap();
            mb.drain(..).collect()
        };
        let n = drained.len();
        if n > 0 {
            let mut inner = self.inner.lock().unwrap();
            inner.inactive.extend(drained);
        }
        n
    }

    pub fn mailbox_len(&self) -> usize {
        self.mailbox.lock().unwrap().len()
    }

    /// Snapshot of the inactive set (suspended and resumable deques).
    pub fn inactive_deques(&self) -> Vec<Arc<WsDeque<T>>> {
        self.inner.lock().unwrap().inactive.clone()
    }

    /// Snapshot of donated deques not yet drained into the inactive set.
    pub fn mailbox_deques(&self) -> Vec<Arc<WsDeque<T>>> {
        self.mailbox.lock().unwrap().iter().cloned().collect()
    }

    /// Snapshot of every stealable deque (active and inactive) for victim
    /// selection.
    pub fn stealable_deques(&self) -> Vec<Arc<WsDeque<T>>> {
        let inner = self.inner.lock().unwrap();
        let mut out = Vec::with_capacity(1 + inner.inactive.len());
        if let Some(a) = &inner.active {
            if a.is_stealable() {
                out.push(a.clone());
            }
        }
        out.extend(inner.inactive.iter().filter(|d| d.is_stealable()).cloned());
        out
    }

    pub fn stealable_count(&self) -> usize {
        let inner = self.inner.lock().unwrap();
        let active = inner
            .active
            .as_ref()
            .map_or(0, |a| usize::from(a.is_stealable()));
        active + inner.inactive.iter().filter(|d| d.is_stealable()).count()
    }

    /// Adopt a resumable deque from this worker's own inactive set, if one
    /// exists. Also reaps any empty resumable deque it walks past (those
    /// are just deallocated).
    pub fn take_own_resumable(&self, caller: WorkerId) -> Option<Arc<WsDeque<T>>> {
        let mut inner = self.inner.lock().unwrap();
        let mut i = 0;
        while i < inner.inactive.len() {
            let d = &inner.inactive[i];
            if d.state() == DequeState::Resumable {
                if d.is_empty() {
                    // Resumable with no ready nodes: deallocate.
                    inner.inactive.swap_remove(i);
                    continue;
                }
                if d.try_adopt(caller) {
                    let d = inner.inactive.swap_remove(i);
                    return Some(d);
                }
            }
            i += 1;
        }
        None
    }

    /// Total deques currently tracked by this pool (active + inactive +
    /// mailbox); used by shutdown accounting.
    pub fn tracked(&self) -> usize {
        let inner = self.inner.lock().unwrap();
        let base = usize::from(inner.active.is_some()) + inner.inactive.len();
        base + self.mailbox.lock().unwrap().len()
    }

    /// Drop every deque reference held by the pool.
    pub fn clear(&self) {
        let mut inner = self.inner.lock().unwrap();
        inner.active = None;
        inner.inactive.clear();
        drop(inner);
        self.mailbox.lock().unwrap().clear();
    }
}
