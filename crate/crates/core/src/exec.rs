use serde::{Deserialize, Serialize};

/// How independent work items (optimizer starts, Doppler rows, ensemble
/// members) are scheduled.
///
/// Results never depend on the mode: every work item owns its inputs and
/// RNG stream, and outputs are collected in index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Sequential for one thread, otherwise the default mode.
    pub fn for_threads(threads: usize) -> Self {
        if threads == 1 {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }

    /// Sizes the global worker pool; 0 keeps the library default. Has no
    /// effect without the `parallel` feature. Fails if the pool was already
    /// initialized.
    pub fn configure_threads(threads: usize) -> crate::Result<()> {
        #[cfg(feature = "parallel")]
        if threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| crate::Error::InvalidArgument(format!("thread pool: {e}")))?;
        }
        let _ = threads;
        Ok(())
    }

    /// Maps `f` over `0..n`, returning results in index order.
    pub(crate) fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            // without rayon, Parallel degrades to the sequential path
            _ => (0..n).map(f).collect(),
        }
    }
}
