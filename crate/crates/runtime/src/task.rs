//! The task model: frames, steps, join counters and future handles.
//!
//! Programs are trees of continuation frames. Executing a frame returns a
//! [`Step`] telling the scheduler what comes next:
//!
//! * `Spawn` forks a child task; the continuation goes on the deque
//!   (stealable) and the worker dives into the child first;
//! * `Sync` blocks until every child spawned against the join counter has
//!   returned — the last returning child resumes the continuation;
//! * `SpawnFuture` forks a future task whose completion performs the put
//!   on the handle; syncs do not wait for it;
//! * `Await` is a future get: if the handle is ready the continuation
//!   runs immediately, otherwise the worker suspends its whole deque,
//!   donates it, and goes stealing.
//!
//! Values move through [`Slot`]s captured by the closures, not through
//! the scheduler.

use std::sync::{Arc, Condvar, Mutex, OnceLock};

use lathide_deque::WsDeque;

use crate::worker::Ctx;

/// A unit of executable continuation.
pub type Frame = Box<dyn FnOnce(&mut Ctx<'_>) -> Step + Send + 'static>;

/// Wrap a closure as a [`Frame`].
pub fn frame<F>(f: F) -> Frame
where
    F: FnOnce(&mut Ctx<'_>) -> Step + Send + 'static,
{
    Box::new(f)
}

/// What the scheduler should do after a frame returns.
pub enum Step {
    /// The current task is finished.
    Done,
    /// Fork `child` (runs now); `cont` goes on the deque.
    Spawn {
        join: Arc<JoinCounter>,
        child: Frame,
        cont: Frame,
    },
    /// Fork a future task; its completion puts into `handle`.
    SpawnFuture {
        handle: FutureHandle,
        child: Frame,
        cont: Frame,
    },
    /// Proceed to `cont` once all children of `join` have returned.
    Sync { join: Arc<JoinCounter>, cont: Frame },
    /// Proceed to `cont` once `handle` is ready (a future get).
    Await { handle: FutureHandle, cont: Frame },
}

/// Set-once result cell shared between frames.
pub struct Slot<T>(Arc<OnceLock<T>>);

impl<T> Clone for Slot<T> {
    fn clone(&self) -> Self {
        Slot(self.0.clone())
    }
}

impl<T> Default for Slot<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> Slot<T> {
    pub fn new() -> Slot<T> {
        Slot(Arc::new(OnceLock::new()))
    }

    pub fn set(&self, v: T) {
        if self.0.set(v).is_err() {
            panic!("slot set twice");
        }
    }

    pub fn get(&self) -> &T {
        self.0.get().expect("slot read before it was set")
    }

    pub fn try_get(&self) -> Option<&T> {
        self.0.get()
    }
}

/// Counts outstanding spawned children of one function context. The sync
/// continuation parks here when children are still running; the last
/// child to return picks it up and continues it.
pub struct JoinCounter {
    inner: Mutex<JoinState>,
}

struct JoinState {
    outstanding: u64,
    parked: Option<TaskUnit>,
}

impl JoinCounter {
    #[allow(clippy::new_ret_no_self)]
    pub fn new() -> Arc<JoinCounter> {
        Arc::new(JoinCounter {
            inner: Mutex::new(JoinState {
                outstanding: 0,
                parked: None,
            }),
        })
    }

    pub(crate) fn add_child(&self) {
        self.inner.lock().unwrap().outstanding += 1;
    }

    /// The function reached its sync. Returns the unit back when no
    /// children are outstanding; otherwise parks it.
    pub(crate) fn arrive_sync(&self, unit: TaskUnit) -> Option<TaskUnit> {
        let mut st = self.inner.lock().unwrap();
        if st.outstanding == 0 {
            Some(unit)
        } else {
            assert!(st.parked.is_none(), "two frames syncing on one counter");
            st.parked = Some(unit);
            None
        }
    }

    /// A spawned child returned. The last child takes the parked sync
    /// continuation, if any.
    pub(crate) fn child_done(&self) -> Option<TaskUnit> {
        let mut st = self.inner.lock().unwrap();
        st.outstanding -= 1;
        if st.outstanding == 0 {
            st.parked.take()
        } else {
            None
        }
    }
}

/// Identifies the run a handle belongs to, so a stale handle from an
/// earlier run is rejected instead of misbehaving.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct RunStamp {
    pub runtime: usize,
    pub run_seq: u64,
}

/// Once-writable future handle. The payload lives in a typed cell owned
/// by the parties that need it; the handle itself only carries readiness
/// and the suspended-deque waiter.
#[derive(Clone)]
pub struct FutureHandle {
    pub(crate) core: Arc<HandleCore>,
}

pub(crate) struct HandleCore {
    pub stamp: RunStamp,
    state: Mutex<CoreState>,
}

enum CoreState {
    Pending { waiter: Option<Waiter> },
    Ready,
}

pub(crate) struct Waiter {
    pub deque: Arc<WsDeque<TaskUnit>>,
    pub unit: TaskUnit,
}

pub(crate) enum AwaitDecision {
    /// Handle ready: continue with the unit now.
    Ready(TaskUnit),
    /// Parked as the waiter; the caller must suspend and donate `deque`.
    Parked,
}

impl HandleCore {
    pub fn new(stamp: RunStamp) -> Arc<HandleCore> {
        Arc::new(HandleCore {
            stamp,
            state: Mutex::new(CoreState::Pending { waiter: None }),
        })
    }

    /// Atomically either observe readiness or park `unit` as the waiter
    /// bound to `deque`. The handle lock is what gives the put/suspend
    /// race a defined winner: whoever takes it second sees the other's
    /// effect. The deque is suspended inside the same critical section so
    /// a put can never find a waiter on a still-active deque.
    pub fn await_or_park(
        &self,
        unit: TaskUnit,
        deque: &Arc<WsDeque<TaskUnit>>,
        worker: usize,
    ) -> AwaitDecision {
        let mut st = self.state.lock().unwrap();
        match &mut *st {
            CoreState::Ready => AwaitDecision::Ready(unit),
            CoreState::Pending { waiter } => {
                assert!(waiter.is_none(), "future handle already has a waiter");
                deque
                    .suspend(worker)
                    .expect("active deque suspends at a blocked get");
                *waiter = Some(Waiter {
                    deque: deque.clone(),
                    unit,
                });
                AwaitDecision::Parked
            }
        }
    }

    /// Perform the put: mark ready and extract the waiter, which the
    /// caller pushes into its suspended deque. Errors on a second put.
    pub fn complete(&self) -> Result<Option<Waiter>, DoublePut> {
        let mut st = self.state.lock().unwrap();
        match std::mem::replace(&mut *st, CoreState::Ready) {
            CoreState::Pending { waiter } => Ok(waiter),
            CoreState::Ready => Err(DoublePut),
        }
    }
}

#[derive(Debug)]
pub struct DoublePut;

/// What finishing a task means.
pub(crate) enum Completion {
    /// A spawned child: decrement the parent's join counter.
    DecJoin(Arc<JoinCounter>),
    /// A future task: put into the handle.
    Put(Arc<HandleCore>),
    /// The root task: finish the run.
    Root(Arc<RunToken>),
}

/// A schedulable frame together with its task's completion action.
pub(crate) struct TaskUnit {
    pub frame: Frame,
    pub completion: Completion,
}

/// Synchronization point between `run()` and the workers for one run.
pub(crate) struct RunToken {
    state: Mutex<Option<Result<(), String>>>,
    cv: Condvar,
}

impl RunToken {
    pub fn new() -> Arc<RunToken> {
        Arc::new(RunToken {
            state: Mutex::new(None),
            cv: Condvar::new(),
        })
    }

    /// First finish wins; later calls (stale frames) are ignored.
    pub fn finish(&self, result: Result<(), String>) {
        let mut st = self.state.lock().unwrap();
        if st.is_none() {
            *st = Some(result);
            self.cv.notify_all();
        }
    }

    pub fn wait(&self) -> Result<(), String> {
        let mut st = self.state.lock().unwrap();
        loop {
            if let Some(res) = st.as_ref() {
                return res.clone();
            }
            st = self.cv.wait(st).unwrap();
        }
    }

}
