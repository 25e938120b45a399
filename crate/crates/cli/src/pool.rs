use margquant_core::exec::Executor;
use rayon::prelude::*;

/// Rayon-backed executor. `map` collects in index order, so reductions
/// downstream see the same sequence for any thread count.
pub struct Pool {
    inner: rayon::ThreadPool,
}

impl Pool {
    /// `threads = None` uses rayon's default (one per core).
    pub fn new(threads: Option<usize>) -> Result<Self, rayon::ThreadPoolBuildError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            b = b.num_threads(t.max(1));
        }
        Ok(Self { inner: b.build()? })
    }

    pub fn threads(&self) -> usize {
        self.inner.current_num_threads()
    }
}

impl Executor for Pool {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.inner
            .install(|| (0..count).into_par_iter().map(f).collect())
    }
}
