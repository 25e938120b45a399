//! Scheduling of independent work units.
//!
//! Heavy loops (Monte Carlo replications, quadrature rows) are expressed as
//! maps over an index range. Results always come back in index order and are
//! reduced by the caller in that order, so totals are bit-identical whatever
//! the executor does internally.

use alloc::vec::Vec;

pub trait Executor: Sync {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every unit on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}
