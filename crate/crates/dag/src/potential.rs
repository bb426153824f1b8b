//! The exponential potential assigned to live nodes.
//!
//! A live node of weight `w` (span minus depth) carries `3^(2w)` while it
//! sits ready on a deque and `3^(2w - 1)` while a worker is executing it.
//! Pending I/O put nodes are treated as ready nodes whose depth slides
//! from initial to final depth, so their potential shrinks by a factor of
//! nine per time step. Values are exact big integers; exponents reach
//! `2 * span`, far past any fixed-width type on real DAGs.

use num_bigint::BigUint;
use thiserror::Error;

/// Exact potential value: a power of three or a finite sum of powers of
/// three.
pub type Potential = BigUint;

/// Whether a node is sitting ready on a deque or assigned to a worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Ready,
    Assigned,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PotentialError {
    #[error("live node must have weight >= 1, got {0}")]
    NonPositiveWeight(i64),
}

/// Potential of a single live node of weight `weight`.
pub fn potential(weight: i64, status: NodeStatus) -> Result<Potential, PotentialError> {
    if weight < 1 {
        return Err(PotentialError::NonPositiveWeight(weight));
    }
    let exp = match status {
        NodeStatus::Ready => 2 * weight as u64,
        NodeStatus::Assigned => 2 * weight as u64 - 1,
    };
    Ok(BigUint::from(3u32).pow(exp as u32))
}

/// Sum of potentials over `(weight, status)` pairs.
pub fn total_potential<I>(nodes: I) -> Result<Potential, PotentialError>
where
    I: IntoIterator<Item = (i64, NodeStatus)>,
{
    let mut acc = BigUint::default();
    for (w, s) in nodes {
        acc += potential(w, s)?;
    }
    Ok(acc)
}

/// Approximate base-3 logarithm of a potential, for reporting only; all
/// comparisons must use the exact values.
pub fn log3_approx(p: &Potential) -> f64 {
    let bits = p.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    let log2 = if bits <= 53 {
        (p.to_u64_digits().first().copied().unwrap_or(0) as f64).log2()
    } else {
        let top = (p >> (bits - 53)).to_u64_digits()[0] as f64;
        (bits - 53) as f64 + top.log2()
    };
    log2 * std::f64::consts::LN_2 / 3f64.ln()
}
