use qvar_core::sampling::SampleMap;
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::CliError;

/// Runs work items on a dedicated rayon pool. Results are collected in
/// index order, so output does not depend on the number of workers.
pub struct Parallel {
    pool: ThreadPool,
}

impl Parallel {
    pub fn new(workers: usize) -> Result<Self, CliError> {
        if workers == 0 {
            return Err(CliError::Input("--workers must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Input(format!("cannot start worker pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl SampleMap for Parallel {
    fn map_indexed<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| (0..count as u64).into_par_iter().map(f).collect())
    }
}
