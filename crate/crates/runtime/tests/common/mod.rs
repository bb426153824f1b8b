//! Program builders shared by the runtime tests.

use lathide_runtime::{frame, Frame, JoinCounter, Program, Slot, Step};

pub fn fib_serial(n: u64) -> u64 {
    if n < 2 {
        n
    } else {
        fib_serial(n - 1) + fib_serial(n - 2)
    }
}

/// Parallel fib: spawn fib(n-1), run fib(n-2) inline, sync, add. At or
/// below `base` the serial recursion takes over.
pub fn fib_frame(n: u64, base: u64, out: Slot<u64>, k: Frame) -> Frame {
    frame(move |ctx| {
        if n <= base || n < 2 {
            out.set(fib_serial(n));
            return k(&mut *ctx);
        }
        let join = JoinCounter::new();
        let a = Slot::new();
        let b = Slot::new();
        let sync_cont = {
            let (a, b, out) = (a.clone(), b.clone(), out.clone());
            frame(move |ctx| {
                out.set(a.get() + b.get());
                k(&mut *ctx)
            })
        };
        let cont = {
            let join = join.clone();
            fib_frame(
                n - 2,
                base,
                b,
                frame(move |_| Step::Sync {
                    join,
                    cont: sync_cont,
                }),
            )
        };
        Step::Spawn {
            join,
            child: fib_frame(n - 1, base, a, frame(|_| Step::Done)),
            cont,
        }
    })
}

pub fn fib_program(n: u64, base: u64) -> Program<u64> {
    Program::new(|out| fib_frame(n, base, out, frame(|_| Step::Done)))
}

/// Deterministic random expression programs for the determinacy suite.
/// The same seed yields the same expression; `eval` is the sequential
/// oracle.
#[derive(Debug, Clone)]
pub enum Expr {
    Lit(u64),
    /// Spawn left, run right inline, sync, combine.
    Fork(Box<Expr>, Box<Expr>, Op),
    /// Future task computing left; continuation computes right, then
    /// gets and combines.
    Future(Box<Expr>, Box<Expr>, Op),
}

#[derive(Debug, Clone, Copy)]
pub enum Op {
    Add,
    Mix,
}

impl Op {
    fn apply(self, a: u64, b: u64) -> u64 {
        match self {
            Op::Add => a.wrapping_add(b),
            Op::Mix => a.wrapping_mul(3).wrapping_add(b.rotate_left(7)),
        }
    }
}

/// Tiny deterministic PRNG so the tests do not depend on rand here.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

pub fn random_expr(rng: &mut SplitMix, depth: u32) -> Expr {
    let roll = rng.next() % 100;
    if depth == 0 || roll < 25 {
        Expr::Lit(rng.next() % 1000)
    } else {
        let op = if rng.next() % 2 == 0 { Op::Add } else { Op::Mix };
        let l = Box::new(random_expr(rng, depth - 1));
        let r = Box::new(random_expr(rng, depth - 1));
        if roll < 70 {
            Expr::Fork(l, r, op)
        } else {
            Expr::Future(l, r, op)
        }
    }
}

pub fn eval(e: &Expr) -> u64 {
    match e {
        Expr::Lit(v) => *v,
        Expr::Fork(l, r, op) => op.apply(eval(l), eval(r)),
        Expr::Future(l, r, op) => op.apply(eval(l), eval(r)),
    }
}

pub fn expr_frame(e: Expr, out: Slot<u64>, k: Frame) -> Frame {
    match e {
        Expr::Lit(v) => frame(move |ctx| {
            out.set(v);
            k(&mut *ctx)
        }),
        Expr::Fork(l, r, op) => frame(move |_| {
            let join = JoinCounter::new();
            let a = Slot::new();
            let b = Slot::new();
            let sync_cont = {
                let (a, b, out) = (a.clone(), b.clone(), out.clone());
                frame(move |ctx| {
                    out.set(op.apply(*a.get(), *b.get()));
                    k(&mut *ctx)
                })
            };
            let cont = {
                let join = join.clone();
                expr_frame(
                    *r,
                    b,
                    frame(move |_| Step::Sync {
                        join,
                        cont: sync_cont,
                    }),
                )
            };
            Step::Spawn {
                join,
                child: expr_frame(*l, a, frame(|_| Step::Done)),
                cont,
            }
        }),
        Expr::Future(l, r, op) => frame(move |ctx| {
            let handle = ctx.future_handle();
            let a = Slot::new();
            let b = Slot::new();
            let after_get = {
                let (a, b, out) = (a.clone(), b.clone(), out.clone());
                frame(move |ctx| {
                    out.set(op.apply(*a.get(), *b.get()));
                    k(&mut *ctx)
                })
            };
            let cont = {
                let handle = handle.clone();
                expr_frame(
                    *r,
                    b,
                    frame(move |_| Step::Await {
                        handle,
                        cont: after_get,
                    }),
                )
            };
            Step::SpawnFuture {
                handle,
                child: expr_frame(*l, a, frame(|_| Step::Done)),
                cont,
            }
        }),
    }
}

pub fn expr_program(e: Expr) -> Program<u64> {
    Program::new(|out| expr_frame(e, out, frame(|_| Step::Done)))
}
