//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over a rayon pool;
//! without it, or with a thread bound of 1, everything runs in order on the
//! calling thread. Results are always returned in index order.

#[cfg(feature = "parallel")]
use std::sync::Arc;

/// Whether this build can run work concurrently.
pub fn is_parallel_available() -> bool {
    cfg!(feature = "parallel")
}

/// Runs indexed work either sequentially or on a bounded rayon pool.
#[derive(Clone)]
pub struct Executor {
    threads: usize,
    #[cfg(feature = "parallel")]
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("threads", &self.threads)
            .finish()
    }
}

impl Executor {
    /// `threads == 0` means "use the global pool"; `1` forces sequential.
    pub fn new(threads: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            let pool = if threads > 1 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .ok()
                    .map(Arc::new)
            } else {
                None
            };
            Self { threads, pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            Self { threads }
        }
    }

    pub fn sequential() -> Self {
        Self::new(1)
    }

    pub fn is_sequential(&self) -> bool {
        self.threads == 1 || !is_parallel_available()
    }

    pub fn map_indexed<U, F>(&self, count: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        if self.is_sequential() || count < 2 {
            return (0..count).map(f).collect();
        }
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let run = || (0..count).into_par_iter().map(&f).collect();
            match &self.pool {
                Some(pool) => pool.install(run),
                None => run(),
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..count).map(f).collect()
        }
    }

    pub fn map_slice<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        self.map_indexed(items.len(), |i| f(&items[i]))
    }

    /// Maps fallible work; the first error in index order wins.
    pub fn try_map_slice<T, U, E, F>(&self, items: &[T], f: F) -> Result<Vec<U>, E>
    where
        T: Sync,
        U: Send,
        E: Send,
        F: Fn(&T) -> Result<U, E> + Sync + Send,
    {
        self.map_slice(items, f).into_iter().collect()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::new(0)
    }
}
