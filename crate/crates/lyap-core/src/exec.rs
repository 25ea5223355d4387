//! Task fan-out abstraction.
//!
//! Estimators decompose into independent per-index tasks (one per path or
//! disorder sample) whose seeds are derived from the index, so the result of
//! mapping over `0..n` is the same no matter who runs the tasks or in what
//! order. The core ships the sequential executor; the CLI provides a thread
//! pool implementing the same trait, and the two are bit-identical.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Maps `task` over `0..n`, collecting results in index order.
    ///
    /// `scratch` builds one reusable workspace per worker; tasks must not
    /// let results depend on scratch contents left by earlier tasks.
    fn map_scratch<S, T: Send>(
        &self,
        n: usize,
        scratch: &(dyn Fn() -> S + Sync),
        task: &(dyn Fn(&mut S, usize) -> T + Sync),
    ) -> Vec<T>;

    fn map<T: Send>(&self, n: usize, task: &(dyn Fn(usize) -> T + Sync)) -> Vec<T> {
        self.map_scratch(n, &|| (), &|_, i| task(i))
    }
}

/// Runs every task on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_scratch<S, T: Send>(
        &self,
        n: usize,
        scratch: &(dyn Fn() -> S + Sync),
        task: &(dyn Fn(&mut S, usize) -> T + Sync),
    ) -> Vec<T> {
        let mut s = scratch();
        (0..n).map(|i| task(&mut s, i)).collect()
    }
}
