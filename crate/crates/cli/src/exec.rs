//! Thread-backed executor for the density pipeline.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use chebdos_core::pipeline::Executor;

use crate::error::CliError;

/// Environment variable consulted for the thread count when `--threads` is absent.
pub const THREADS_ENV: &str = "CHEBDOS_THREADS";

/// Runs units on `n` scoped threads pulling indices from a shared counter;
/// results are reassembled in index order.
#[derive(Debug, Clone, Copy)]
pub struct Threads(pub usize);

impl Executor for Threads {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        let workers = self.0.min(n);
        if workers <= 1 {
            return (0..n).map(f).collect();
        }
        let next = AtomicUsize::new(0);
        let mut parts: Vec<Vec<(usize, T)>> = thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    s.spawn(|| {
                        let mut done = Vec::new();
                        loop {
                            let i = next.fetch_add(1, Ordering::Relaxed);
                            if i >= n {
                                break done;
                            }
                            done.push((i, f(i)));
                        }
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
        for part in parts.drain(..) {
            for (i, v) in part {
                slots[i] = Some(v);
            }
        }
        slots.into_iter().map(|v| v.expect("every unit ran")).collect()
    }
}

/// `--threads` if given, else the environment variable, else the number of
/// available cores.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{THREADS_ENV}=`{v}` is not a thread count")))?,
            Err(_) => thread::available_parallelism().map_or(1, NonZeroUsize::get),
        },
    };
    if n == 0 {
        return Err(CliError::Config("thread count must be at least 1".into()));
    }
    Ok(n)
}
