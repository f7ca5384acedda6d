//! Execution mode for the data-parallel inner loops.
//!
//! All parallel paths collect into index-ordered buffers and reduce
//! sequentially afterwards, so `Sequential` and `Parallel` produce
//! bit-identical results.

/// Selects how batch evaluations are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    /// Single-threaded on the calling thread.
    Sequential,
    /// Rayon work-stealing pool. Falls back to sequential when the crate
    /// is built without the `parallel` feature.
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Maps `f` over `0..n`, returning results in index order.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Maps `f` over a slice, returning results in input order.
    pub fn map_slice<I, T, F>(self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Applies `f(row_index, row)` to each `width`-sized chunk of `data`.
    pub fn for_each_row<T, F>(self, data: &mut [T], width: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        if width == 0 {
            return;
        }
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            data.par_chunks_mut(width)
                .enumerate()
                .for_each(|(j, row)| f(j, row));
            return;
        }
        data.chunks_mut(width)
            .enumerate()
            .for_each(|(j, row)| f(j, row));
    }
}
