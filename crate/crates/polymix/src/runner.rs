//! Multi-threaded chunk scheduling.
//!
//! Chunks are claimed dynamically from a shared counter, but every chunk
//! draws from its own stream and results are reassembled in chunk order,
//! so the output does not depend on the worker count.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use polymix_core::tails::ChunkRunner;

/// Environment variable that sets the worker count.
pub const WORKERS_ENV: &str = "POLYMIX_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Threaded {
    workers: usize,
}

impl Threaded {
    pub fn new(workers: usize) -> Self {
        Self { workers: workers.max(1) }
    }

    /// Flag, then `POLYMIX_WORKERS`, then the available parallelism.
    pub fn resolve(flag: Option<usize>) -> Result<Self, String> {
        if let Some(w) = flag {
            return if w == 0 { Err("--workers must be at least 1".into()) } else { Ok(Self::new(w)) };
        }
        match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(w) if w > 0 => Ok(Self::new(w)),
                _ => Err(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")),
            },
            Err(_) => Ok(Self::new(std::thread::available_parallelism().map_or(1, NonZeroUsize::get))),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }
}

impl ChunkRunner for Threaded {
    fn map_chunks<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        let threads = self.workers.min(count);
        if threads <= 1 {
            return (0..count).map(f).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..count).map(|_| None).collect());
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(|| loop {
                    let c = next.fetch_add(1, Ordering::Relaxed);
                    if c >= count {
                        break;
                    }
                    let out = f(c);
                    slots.lock().expect("a worker panicked")[c] = Some(out);
                });
            }
        });
        slots
            .into_inner()
            .expect("a worker panicked")
            .into_iter()
            .map(|v| v.expect("every chunk is computed"))
            .collect()
    }
}
