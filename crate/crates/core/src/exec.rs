//! Sequential / parallel execution switch.
//!
//! Every data-parallel loop in the crate goes through [`Execution`]. With the
//! `parallel` feature disabled, [`Execution::Parallel`] silently runs the
//! sequential path. All helpers return results in index order, so output is
//! identical for both modes as long as each item is computed independently.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this mode actually runs on the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `(0..n).map(f).collect()`, possibly in parallel.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Fill `out[i] = f(i)`.
    pub fn fill<T, F>(self, out: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
            return;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = f(i);
        }
    }

    /// Apply `f(chunk_index, chunk)` to consecutive chunks of `out`.
    pub fn for_each_chunk<T, F>(self, out: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            out.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
            return;
        }
        for (i, c) in out.chunks_mut(chunk).enumerate() {
            f(i, c);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let a = Execution::Sequential.map(1000, f);
        let b = Execution::Parallel.map(1000, f);
        assert_eq!(a, b);

        let mut x = vec![0.0; 257];
        let mut y = vec![0.0; 257];
        Execution::Sequential.for_each_chunk(&mut x, 16, |k, c| {
            for (j, v) in c.iter_mut().enumerate() {
                *v = (k * 16 + j) as f64;
            }
        });
        Execution::Parallel.for_each_chunk(&mut y, 16, |k, c| {
            for (j, v) in c.iter_mut().enumerate() {
                *v = (k * 16 + j) as f64;
            }
        });
        assert_eq!(x, y);
    }
}
