//! Execution of independent per-sample work items.
//!
//! Every Monte-Carlo estimator in the crate is written as a map over sample
//! indices followed by a reduction in index order. Implementations of
//! [`SampleMap`] decide how the map is scheduled; they must return results
//! in index order so that reductions are bit-identical for any scheduler.

use alloc::vec::Vec;

pub trait SampleMap {
    fn map_indexed<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

/// Runs every work item on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl SampleMap for Sequential {
    fn map_indexed<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        (0..count as u64).map(f).collect()
    }
}
