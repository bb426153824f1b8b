//! Work-stealing deques with a multi-state lifecycle.
//!
//! A deque starts **active** (its owner works on the bottom, thieves steal
//! from the top). When the owner blocks on a future it **suspends** the
//! deque, reserving a slot for the eventual future-join frame, and walks
//! away; thieves may keep draining it from the top. A suspended deque
//! whose ready entries run out becomes **unstealable** — it cannot be
//! deallocated because the pending put still needs somewhere to push the
//! join frame. When the put arrives, the join frame is pushed at the
//! bottom and the deque becomes **resumable**; whichever worker picks it
//! up adopts the whole deque as its new active deque.
//!
//! [`DequePool`] is one worker's view of its deques: one active deque,
//! a set of inactive (suspended/resumable) deques visible to thieves, and
//! a mailbox receiving deques donated by other workers.

mod pool;
mod ring;

pub use pool::{DequePool, DonateError};

use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicU8, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use ring::{RawSteal, Ring};

/// Identifies the worker owning a pool or deque. Purely logical, not tied
/// to OS threads: the simulator runs many workers on one thread.
pub type WorkerId = usize;

static NEXT_DEQUE_ID: AtomicU64 = AtomicU64::new(0);

/// Lifecycle state of a [`WsDeque`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DequeState {
    /// Owned by a worker that is executing from it.
    Active,
    /// Abandoned at a blocked future get; waiting for the put.
    Suspended,
    /// The put pushed the join frame; waiting to be adopted.
    Resumable,
}

impl DequeState {
    fn from_u8(v: u8) -> DequeState {
        match v {
            0 => DequeState::Active,
            1 => DequeState::Suspended,
            2 => DequeState::Resumable,
            _ => unreachable!("invalid deque state"),
        }
    }
}

/// Outcome of a [`WsDeque::steal_top`] attempt.
#[derive(Debug, PartialEq, Eq)]
pub enum StealResult<T> {
    Stolen(T),
    Empty,
    /// Lost a race against the owner or another thief; retrying is fine.
    LostRace,
}

/// Error returned for an illegal state transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateError {
    pub from: DequeState,
    pub to: DequeState,
}

impl fmt::Display for StateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "illegal deque transition {:?} -> {:?}", self.from, self.to)
    }
}

impl std::error::Error for StateError {}

struct Ctl {
    owner: Option<WorkerId>,
    /// Set while suspended: exactly one future-join frame may be pushed.
    resume_reserved: bool,
}

/// A work-stealing deque whose bottom end belongs to (at most) one owner
/// at a time and whose top end is raced by thieves.
///
/// Bottom-end ownership moves with the lifecycle: worker while active,
/// the putter while pushing the resume frame, then the adopter. All
/// transitions go through an internal control lock, which also hands the
/// bottom end over between those parties.
pub struct WsDeque<T> {
    id: u64,
    ring: Ring<T>,
    state: AtomicU8,
    stealable: AtomicBool,
    ctl: Mutex<Ctl>,
    census: Option<Arc<AtomicUsize>>,
}

impl<T: Send> WsDeque<T> {
    pub fn new(owner: WorkerId) -> Arc<Self> {
        Self::build(Some(owner), None)
    }

    /// Like [`WsDeque::new`] but counted against `census` for leak checks.
    pub fn new_counted(owner: WorkerId, census: Arc<AtomicUsize>) -> Arc<Self> {
        Self::build(Some(owner), Some(census))
    }

    fn build(owner: Option<WorkerId>, census: Option<Arc<AtomicUsize>>) -> Arc<Self> {
        if let Some(c) = &census {
            c.fetch_add(1, Ordering::Relaxed);
        }
        Arc::new(WsDeque {
            id: NEXT_DEQUE_ID.fetch_add(1, Ordering::Relaxed),
            ring: Ring::new(),
            state: AtomicU8::new(0),
            stealable: AtomicBool::new(true),
            ctl: Mutex::new(Ctl {
                owner,
                resume_reserved: false,
            }),
            census,
        })
    }

    /// Stable id for traces and diagnostics.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn state(&self) -> DequeState {
        DequeState::from_u8(self.state.load(Ordering::Acquire))
    }

    pub fn is_stealable(&self) -> bool {
        self.stealable.load(Ordering::Acquire)
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    /// Push a frame at the bottom. Owner only, while active.
    pub fn push_bottom(&self, caller: WorkerId, item: T) {
        debug_assert_eq!(
            self.ctl.lock().unwrap().owner,
            Some(caller),
            "push_bottom by non-owner"
        );
        debug_assert_eq!(self.state(), DequeState::Active);
        // Safety: `caller` holds the bottom end per the ownership protocol.
        unsafe { self.ring.push(item) };
    }

    /// Pop the most recently pushed unstolen frame. Owner only.
    pub fn pop_bottom(&self, caller: WorkerId) -> Option<T> {
        debug_assert_eq!(
            self.ctl.lock().unwrap().owner,
            Some(caller),
            "pop_bottom by non-owner"
        );
        // Safety: as in push_bottom.
        unsafe { self.ring.pop() }
    }

    /// Take the oldest frame from the top. Any thread but the owner.
    ///
    /// Unstealable deques always report `Empty`. Draining the last ready
    /// entry of a suspended deque flips it to unstealable.
    pub fn steal_top(&self, caller: WorkerId) -> StealResult<T> {
        debug_assert_ne!(
            self.ctl.lock().unwrap().owner,
            Some(caller),
            "steal_top by owner"
        );
        if !self.is_stealable() {
            return StealResult::Empty;
        }
        match self.ring.steal() {
            RawSteal::Success(v) => {
                if self.state() == DequeState::Suspended {
                    // Serialize against push_resume so a concurrent put
                    // cannot be clobbered into an unstealable deque.
                    let _ctl = self.ctl.lock().unwrap();
                    if self.state() == DequeState::Suspended && self.ring.is_empty() {
                        self.stealable.store(false, Ordering::Release);
                    }
                }
                StealResult::Stolen(v)
            }
            RawSteal::Empty => StealResult::Empty,
            RawSteal::Retry => StealResult::LostRace,
        }
    }

    /// Active -> Suspended at a blocked get. Releases bottom-end ownership
    /// and reserves the resume slot. Stealability is recomputed: a
    /// suspended deque with no ready entries is unstealable.
    pub fn suspend(&self, caller: WorkerId) -> Result<(), StateError> {
        let mut ctl = self.ctl.lock().unwrap();
        debug_assert_eq!(ctl.owner, Some(caller), "suspend by non-owner");
        self.transition_locked(DequeState::Suspended)?;
        ctl.owner = None;
        ctl.resume_reserved = true;
        if self.ring.is_empty() {
            self.stealable.store(false, Ordering::Release);
        }
        Ok(())
    }

    /// Push the future-join frame into a suspended deque and mark it
    /// resumable. Called by whoever executes the put; consumes the
    /// reservation made by [`WsDeque::suspend`].
    pub fn push_resume(&self, item: T) -> Result<(), StateError> {
        let mut ctl = self.ctl.lock().unwrap();
        if self.state() != DequeState::Suspended || !ctl.resume_reserved {
            return Err(StateError {
                from: self.state(),
                to: DequeState::Resumable,
            });
        }
        ctl.resume_reserved = false;
        // Safety: while suspended with the reservation held under the
        // control lock, the putter is the unique bottom-end user.
        unsafe { self.ring.push(item) };
        self.transition_locked(DequeState::Resumable)?;
        Ok(())
    }

    /// Claim a resumable deque as `new_owner`'s active deque. Returns
    /// false if another worker won the race (or the state moved on).
    pub fn try_adopt(&self, new_owner: WorkerId) -> bool {
        let mut ctl = self.ctl.lock().unwrap();
        if self.state() != DequeState::Resumable {
            return false;
        }
        self.transition_locked(DequeState::Active)
            .expect("resumable -> active");
        ctl.owner = Some(new_owner);
        true
    }

    /// Validated state transition. The legal moves are
    /// Active -> Suspended -> Resumable -> Active; everything else is
    /// rejected. Prefer the intent-carrying wrappers (`suspend`,
    /// `push_resume`, `try_adopt`) which also manage ownership.
    pub fn set_state(&self, new: DequeState) -> Result<(), StateError> {
        let _ctl = self.ctl.lock().unwrap();
        self.transition_locked(new)
    }

    fn transition_locked(&self, new: DequeState) -> Result<(), StateError> {
        let from = self.state();
        let ok = matches!(
            (from, new),
            (DequeState::Active, DequeState::Suspended)
                | (DequeState::Suspended, DequeState::Resumable)
                | (DequeState::Resumable, DequeState::Active)
        );
        if !ok {
            return Err(StateError { from, to: new });
        }
        self.state.store(new as u8, Ordering::Release);
        let stealable = match new {
            // Active and resumable deques are always stealable; resumable
            // ones hold at least the join frame.
            DequeState::Active | DequeState::Resumable => true,
            DequeState::Suspended => !self.ring.is_empty(),
        };
        self.stealable.store(stealable, Ordering::Release);
        Ok(())
    }

    /// Clone the current contents, oldest (top) first. Only exact when no
    /// concurrent mutation is happening; meant for the single-threaded
    /// simulator and tests.
    pub fn snapshot(&self) -> Vec<T>
    where
        T: Clone,
    {
        self.ring.snapshot()
    }
}

impl<T> Drop for WsDeque<T> {
    fn drop(&mut self) {
        if let Some(c) = &self.census {
            c.fetch_sub(1, Ordering::Relaxed);
        }
    }
}

impl<T> fmt::Debug for WsDeque<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WsDeque")
            .field("id", &self.id)
            .field("state", &DequeState::from_u8(self.state.load(Ordering::Relaxed)))
            .field("stealable", &self.stealable.load(Ordering::Relaxed))
            .field("len", &self.ring.len())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_pop_is_lifo() {
        let d = WsDeque::new(0);
        d.push_bottom(0, 'a');
        d.push_bottom(0, 'b');
        d.push_bottom(0, 'c');
        assert_eq!(d.pop_bottom(0), Some('c'));
        assert_eq!(d.pop_bottom(0), Some('b'));
        assert_eq!(d.pop_bottom(0), Some('a'));
        assert_eq!(d.pop_bottom(0), None);
    }

    #[test]
    fn pop_empty_after_single_push() {
        let d = WsDeque::new(0);
        d.push_bottom(0, 1);
        assert_eq!(d.pop_bottom(0), Some(1));
        assert_eq!(d.pop_bottom(0), None);
        assert_eq!(d.pop_bottom(0), None);
    }

    #[test]
    fn steal_takes_top() {
        let d = WsDeque::new(0);
        d.push_bottom(0, "a");
        d.push_bottom(0, "b");
        assert_eq!(d.steal_top(1), StealResult::Stolen("a"));
        assert_eq!(d.steal_top(1), StealResult::Stolen("b"));
        assert_eq!(d.steal_top(1), StealResult::Empty);
    }

    #[test]
    fn suspended_with_entries_stays_stealable() {
        let d = WsDeque::new(0);
        d.push_bottom(0, 1);
        d.push_bottom(0, 2);
        d.suspend(0).unwrap();
        assert_eq!(d.state(), DequeState::Suspended);
        assert!(d.is_stealable());
    }

    #[test]
    fn suspended_empty_is_unstealable() {
        let d = WsDeque::<u32>::new(0);
        d.suspend(0).unwrap();
        assert!(!d.is_stealable());
        assert_eq!(d.steal_top(1), StealResult::Empty);
    }

    #[test]
    fn suspended_drained_by_steals_becomes_unstealable() {
        let d = WsDeque::new(0);
        d.push_bottom(0, 1);
        d.suspend(0).unwrap();
        assert!(d.is_stealable());
        assert_eq!(d.steal_top(1), StealResult::Stolen(1));
        assert!(!d.is_stealable());
    }

    #[test]
    fn resume_push_makes_deque_stealable_and_resumable() {
        let d = WsDeque::new(0);
        d.suspend(0).unwrap();
        assert!(!d.is_stealable());
        d.push_resume(42).unwrap();
        assert_eq!(d.state(), DequeState::Resumable);
        assert!(d.is_stealable());
        assert!(d.try_adopt(3));
        assert_eq!(d.pop_bottom(3), Some(42));
    }

    #[test]
    fn double_resume_rejected() {
        let d = WsDeque::new(0);
        d.suspend(0).unwrap();
        d.push_resume(1).unwrap();
        assert!(d.push_resume(2).is_err());
    }

    #[test]
    fn illegal_transitions_rejected() {
        let d = WsDeque::<u32>::new(0);
        assert!(d.set_state(DequeState::Resumable).is_err());
        assert!(d.set_state(DequeState::Active).is_err());
        d.set_state(DequeState::Suspended).unwrap();
        assert!(d.set_state(DequeState::Suspended).is_err());
        assert!(d.set_state(DequeState::Active).is_err());
        d.set_state(DequeState::Resumable).unwrap();
        assert!(d.set_state(DequeState::Suspended).is_err());
        d.set_state(DequeState::Active).unwrap();
    }

    #[test]
    fn adoption_race_has_one_winner() {
        let d = WsDeque::new(0);
        d.suspend(0).unwrap();
        d.push_resume(7).unwrap();
        assert!(d.try_adopt(1));
        assert!(!d.try_adopt(2));
    }

    #[test]
    fn census_counts_live_deques() {
        let census = Arc::new(AtomicUsize::new(0));
        let d = WsDeque::<u32>::new_counted(0, census.clone());
        assert_eq!(census.load(Ordering::Relaxed), 1);
        drop(d);
        assert_eq!(census.load(Ordering::Relaxed), 0);
    }
}
