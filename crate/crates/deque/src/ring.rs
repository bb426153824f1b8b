//! Lock-free circular work-stealing buffer (single owner at the bottom,
//! concurrent thieves at the top).
//!
//! The algorithm is the classic Chase-Lev deque with the sequentially
//! consistent fences from Le et al.'s weak-memory formulation. The owner
//! pushes and pops at `bottom`; thieves race on `top` with a CAS and may
//! observe `Retry` when they lose. Grown buffers are retired, not freed,
//! until the deque is dropped, so a thief holding a stale buffer pointer
//! always reads live memory (its CAS then decides whether the read value
//! is kept or forgotten).

use std::cell::UnsafeCell;
use std::mem::MaybeUninit;
use std::sync::atomic::{fence, AtomicIsize, AtomicPtr, Ordering};
use std::sync::Mutex;

const MIN_CAPACITY: usize = 8;

struct Buffer<T> {
    cap: usize,
    mask: usize,
    slots: Box<[UnsafeCell<MaybeUninit<T>>]>,
}

impl<T> Buffer<T> {
    fn alloc(cap: usize) -> *mut Buffer<T> {
        debug_assert!(cap.is_power_of_two());
        let slots = (0..cap)
            .map(|_| UnsafeCell::new(MaybeUninit::uninit()))
            .collect::<Vec<_>>()
            .into_boxed_slice();
        Box::into_raw(Box::new(Buffer {
            cap,
            mask: cap - 1,
            slots,
        }))
    }

    /// Write `v` into the slot for logical index `idx` without reading the
    /// previous contents.
    unsafe fn write(&self, idx: isize, v: T) {
        let slot = self.slots.get_unchecked(idx as usize & self.mask);
        (*slot.get()).write(v);
    }

    /// Bitwise-read the slot for logical index `idx`. The caller decides,
    /// via the subsequent CAS on `top`, whether it owns the value or must
    /// forget it.
    unsafe fn read(&self, idx: isize) -> T {
        let slot = self.slots.get_unchecked(idx as usize & self.mask);
        (*slot.get()).assume_init_read()
    }
}

/// Outcome of a raw steal.
pub(crate) enum RawSteal<T> {
    Success(T),
    Empty,
    /// Lost a race against the owner or another thief.
    Retry,
}

pub(crate) struct Ring<T> {
    /// Next index a thief will try to take.
    top: AtomicIsize,
    /// Next index the owner will push to.
    bottom: AtomicIsize,
    buf: AtomicPtr<Buffer<T>>,
    /// Buffers replaced by `grow`, kept alive until drop.
    retired: Mutex<Vec<*mut Buffer<T>>>,
}

unsafe impl<T: Send> Send for Ring<T> {}
unsafe impl<T: Send> Sync for Ring<T> {}

impl<T> Ring<T> {
    pub(crate) fn new() -> Self {
        Ring {
            top: AtomicIsize::new(0),
            bottom: AtomicIsize::new(0),
            buf: AtomicPtr::new(Buffer::alloc(MIN_CAPACITY)),
            retired: Mutex::new(Vec::new()),
        }
    }

    /// Racy size estimate; exact when quiescent.
    pub(crate) fn len(&self) -> usize {
        let b = self.bottom.load(Ordering::Relaxed);
        let t = self.top.load(Ordering::Relaxed);
        b.saturating_sub(t).max(0) as usize
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Owner-side push at the bottom.
    ///
    /// # Safety
    /// The caller must be the unique bottom-end user of this ring for the
    /// duration of the call.
    pub(crate) unsafe fn push(&self, v: T) {
        let b = self.bottom.load(Ordering::Relaxed);
        let t = self.top.load(Ordering::Acquire);
        let mut buf = self.buf.load(Ordering::Relaxed);
        if b - t >= (*buf).cap as isize {
            buf = self.grow(t, b);
        }
        (*buf).write(b, v);
        self.bottom.store(b + 1, Ordering::Release);
    }

    /// Owner-side pop at the bottom.
    ///
    /// # Safety
    /// Same contract as [`Ring::push`].
    pub(crate) unsafe fn pop(&self) -> Option<T> {
        let b = self.bottom.load(Ordering::Relaxed) - 1;
        let buf = self.buf.load(Ordering::Relaxed);
        self.bottom.store(b, Ordering::Relaxed);
        fence(Ordering::SeqCst);
        let t = self.top.load(Ordering::Relaxed);
        if t <= b {
            if t == b {
                // Last element: race thieves for it.
                let won = self
                    .top
                    .compare_exchange(t, t + 1, Ordering::SeqCst, Ordering::Relaxed)
                    .is_ok();
                self.bottom.store(b + 1, Ordering::Relaxed);
                if won {
                    Some((*buf).read(b))
                } else {
                    None
                }
            } else {
                Some((*buf).read(b))
            }
        } else {
            self.bottom.store(b + 1, Ordering::Relaxed);
            None
        }
    }

    /// Thief-side take from the top. Safe to call from any thread.
    pub(crate) fn steal(&self) -> RawSteal<T> {
        let t = self.top.load(Ordering::Acquire);
        fence(Ordering::SeqCst);
        let b = self.bottom.load(Ordering::Acquire);
        if t >= b {
            return RawSteal::Empty;
        }
        let buf = self.buf.load(Ordering::Acquire);
        // The read may target a slot the owner is about to overwrite in a
        // retired buffer; the CAS on `top` is what decides ownership.
        let v = unsafe { (*buf).read(t) };
        if self
            .top
            .compare_exchange(t, t + 1, Ordering::SeqCst, Ordering::Relaxed)
            .is_ok()
        {
            RawSteal::Success(v)
        } else {
            std::mem::forget(v);
            RawSteal::Retry
        }
    }

    /// Clone the live range. Only meaningful when no owner or thief is
    /// mutating concurrently (single-threaded simulation, tests).
    pub(crate) fn snapshot(&self) -> Vec<T>
    where
        T: Clone,
    {
        let t = self.top.load(Ordering::Acquire);
        let b = self.bottom.load(Ordering::Acquire);
        let buf = unsafe { &*self.buf.load(Ordering::Acquire) };
        let mut out = Vec::with_capacity(b.saturating_sub(t).max(0) as usize);
        let mut i = t;
        while i < b {
            unsafe {
                let slot = buf.slots.get_unchecked(i as usize & buf.mask);
                out.push((*slot.get()).assume_init_ref().clone());
            }
            i += 1;
        }
        out
    }

    /// Double the capacity, copying the live range. Owner-side only.
    unsafe fn grow(&self, t: isize, b: isize) -> *mut Buffer<T> {
        let old_ptr = self.buf.load(Ordering::Relaxed);
        let old = &*old_ptr;
        let new_ptr = Buffer::alloc(old.cap * 2);
        let new = &*new_ptr;
        let mut i = t;
        while i < b {
            let slot = old.slots.get_unchecked(i as usize & old.mask);
            let v = std::ptr::read((*slot.get()).as_ptr());
            new.write(i, v);
            i += 1;
        }
        self.buf.store(new_ptr, Ordering::Release);
        self.retired.lock().unwrap().push(old_ptr);
        new_ptr
    }
}

impl<T> Drop for Ring<T> {
    fn drop(&mut self) {
        // Exclusive access: drop remaining elements, then all buffers.
        let t = self.top.load(Ordering::Relaxed);
        let b = self.bottom.load(Ordering::Relaxed);
        let buf_ptr = self.buf.load(Ordering::Relaxed);
        let buf = unsafe { &*buf_ptr };
        let mut i = t;
        while i < b {
            unsafe {
                let slot = buf.slots.get_unchecked(i as usize & buf.mask);
                std::ptr::drop_in_place((*slot.get()).as_mut_ptr());
            }
            i += 1;
        }
        unsafe { drop(Box::from_raw(buf_ptr)) };
        for old in self.retired.lock().unwrap().drain(..) {
            unsafe { drop(Box::from_raw(old)) };
        }
    }
}
