//! Bounded lock-free single-producer/single-consumer ring, the
//! communication queue between a worker and its I/O thread.

use std::cell::UnsafeCell;
use std::mem::MaybeUninit;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};
use std::thread::ThreadId;

#[repr(align(64))]
struct Padded(AtomicUsize);

struct Ring<T> {
    cap: usize,
    mask: usize,
    slots: Box<[UnsafeCell<MaybeUninit<T>>]>,
    /// Consumer cursor.
    head: Padded,
    /// Producer cursor.
    tail: Padded,
}

unsafe impl<T: Send> Send for Ring<T> {}
unsafe impl<T: Send> Sync for Ring<T> {}

/// Producer half; owned by exactly one worker thread.
pub(crate) struct Producer<T> {
    ring: Arc<Ring<T>>,
    thread: OnceLock<ThreadId>,
}

/// Consumer half; owned by exactly one I/O thread.
pub(crate) struct Consumer<T> {
    ring: Arc<Ring<T>>,
    thread: OnceLock<ThreadId>,
}

pub(crate) fn channel<T: Send>(capacity: usize) -> (Producer<T>, Consumer<T>) {
    let cap = capacity.max(2).next_power_of_two();
    let slots = (0..cap)
        .map(|_| UnsafeCell::new(MaybeUninit::uninit()))
        .collect::<Vec<_>>()
        .into_boxed_slice();
    let ring = Arc::new(Ring {
        cap,
        mask: cap - 1,
        slots,
        head: Padded(AtomicUsize::new(0)),
        tail: Padded(AtomicUsize::new(0)),
    });
    (
        Producer {
            ring: ring.clone(),
            thread: OnceLock::new(),
        },
        Consumer {
            ring,
            thread: OnceLock::new(),
        },
    )
}

impl<T: Send> Producer<T> {
    /// FIFO enqueue. Returns the value back when the ring is full.
    pub fn push(&self, v: T) -> Result<(), T> {
        debug_assert_eq!(
            *self.thread.get_or_init(|| std::thread::current().id()),
            std::thread::current().id(),
            "spsc producer used from a second thread"
        );
        let ring = &*self.ring;
        let t = ring.tail.0.load(Ordering::Relaxed);
        let h = ring.head.0.load(Ordering::Acquire);
        if t.wrapping_sub(h) == ring.cap {
            return Err(v);
        }
        unsafe {
            (*ring.slots[t & ring.mask].get()).write(v);
        }
        ring.tail.0.store(t.wrapping_add(1), Ordering::Release);
        Ok(())
    }

}

impl<T: Send> Consumer<T> {
    pub fn pop(&self) -> Option<T> {
        debug_assert_eq!(
            *self.thread.get_or_init(|| std::thread::current().id()),
            std::thread::current().id(),
            "spsc consumer used from a second thread"
        );
        let ring = &*self.ring;
        let h = ring.head.0.load(Ordering::Relaxed);
        let t = ring.tail.0.load(Ordering::Acquire);
        if h == t {
            return None;
        }
        let v = unsafe { (*ring.slots[h & ring.mask].get()).assume_init_read() };
        ring.head.0.store(h.wrapping_add(1), Ordering::Release);
        Some(v)
    }
}

impl<T> Drop for Ring<T> {
    fn drop(&mut self) {
        let mut h = self.head.0.load(Ordering::Relaxed);
        let t = self.tail.0.load(Ordering::Relaxed);
        while h != t {
            unsafe {
                std::ptr::drop_in_place((*self.slots[h & self.mask].get()).as_mut_ptr());
            }
            h = h.wrapping_add(1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_order() {
        let (p, c) = channel::<&str>(8);
        p.push("a").unwrap();
        p.push("b").unwrap();
        assert_eq!(c.pop(), Some("a"));
        assert_eq!(c.pop(), Some("b"));
        assert_eq!(c.pop(), None);
    }

    #[test]
    fn full_ring_rejects() {
        let (p, c) = channel::<u32>(2);
        p.push(1).unwrap();
        p.push(2).unwrap();
        assert_eq!(p.push(3), Err(3));
        assert_eq!(c.pop(), Some(1));
        p.push(3).unwrap();
    }

    #[test]
    fn pop_on_empty_is_none() {
        let (_p, c) = channel::<u32>(4);
        assert_eq!(c.pop(), None);
        assert_eq!(c.pop(), None);
    }

    #[test]
    fn million_transfers_conserved() {
        const N: u64 = 1_000_000;
        let (p, c) = channel::<u64>(1024);
        let consumer = std::thread::spawn(move || {
            let mut sum = 0u64;
            let mut count = 0u64;
            while count < N {
                if let Some(v) = c.pop() {
                    sum = sum.wrapping_add(v);
                    count += 1;
                } else {
                    std::hint::spin_loop();
                }
            }
            (sum, count)
        });
        let mut expect = 0u64;
        for i in 0..N {
            expect = expect.wrapping_add(i);
            let mut v = i;
            loop {
                match p.push(v) {
                    Ok(()) => break,
                    Err(back) => {
                        v = back;
                        std::thread::yield_now();
                    }
                }
            }
        }
        let (sum, count) = consumer.join().unwrap();
        assert_eq!(count, N);
        assert_eq!(sum, expect);
    }

    #[test]
    fn drop_releases_queued_items() {
        use std::sync::atomic::AtomicUsize;
        static DROPS: AtomicUsize = AtomicUsize::new(0);
        struct D;
        impl Drop for D {
            fn drop(&mut self) {
                DROPS.fetch_add(1, Ordering::Relaxed);
            }
        }
        let (p, c) = channel::<D>(8);
        for _ in 0..5 {
            p.push(D).unwrap();
        }
        drop(c.pop());
        drop((p, c));
        assert_eq!(DROPS.load(Ordering::Relaxed), 5);
    }
}
