//! Execution policy for data-parallel loops.
//!
//! With the `parallel` feature the helpers here dispatch to rayon unless the
//! process-wide policy has been switched to [`Policy::Sequential`]. Without the
//! feature everything runs on the calling thread. Outputs are always collected
//! in input order so callers can reduce deterministically.

use std::sync::atomic::{AtomicBool, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Sequential,
    Parallel,
}

static SEQUENTIAL: AtomicBool = AtomicBool::new(false);

pub fn set_policy(policy: Policy) {
    SEQUENTIAL.store(policy == Policy::Sequential, Ordering::SeqCst);
}

pub fn policy() -> Policy {
    if cfg!(feature = "parallel") && !SEQUENTIAL.load(Ordering::SeqCst) {
        Policy::Parallel
    } else {
        Policy::Sequential
    }
}

/// Runs `f` with `policy` in force and restores the previous policy afterwards.
pub fn with_policy<R>(policy: Policy, f: impl FnOnce() -> R) -> R {
    let prev = self::policy();
    set_policy(policy);
    let out = f();
    set_policy(prev);
    out
}

/// Maps `f` over `0..n`, returning results in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if policy() == Policy::Parallel && n > 1 {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Applies `f` to consecutive chunks of `data` of length `chunk` (the last may be shorter).
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    if policy() == Policy::Parallel && data.len() > chunk {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}
