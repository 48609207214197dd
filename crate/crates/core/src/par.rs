//! Data-parallel helpers.
//!
//! With the `parallel` feature these fan out over rayon, otherwise they run the
//! same loops in order. Floating-point reductions always combine fixed-size
//! chunks in index order, so results do not depend on the number of threads.

use std::ops::Range;

/// Number of paths per reduction chunk.
pub const CHUNK: usize = 2048;

fn chunk_ranges(len: usize) -> Vec<Range<usize>> {
    (0..len.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(len))
        .collect()
}

#[cfg(feature = "parallel")]
mod imp {
    use rayon::prelude::*;

    pub fn map<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
        (0..n).into_par_iter().map(f).collect()
    }

    pub fn map_items<I: Sync, T: Send, F: Fn(&I) -> T + Sync + Send>(items: &[I], f: F) -> Vec<T> {
        items.par_iter().map(f).collect()
    }

    pub fn for_each_chunk_mut<F>(out: &mut [f64], chunk: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(c, slab)| f(c, slab));
    }

    pub fn for_each_mut<T: Send, F: Fn(usize, &mut T) + Sync + Send>(items: &mut [T], f: F) {
        items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn map<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
        (0..n).map(f).collect()
    }

    pub fn map_items<I: Sync, T: Send, F: Fn(&I) -> T + Sync + Send>(items: &[I], f: F) -> Vec<T> {
        items.iter().map(f).collect()
    }

    pub fn for_each_chunk_mut<F>(out: &mut [f64], chunk: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        out.chunks_mut(chunk)
            .enumerate()
            .for_each(|(c, slab)| f(c, slab));
    }

    pub fn for_each_mut<T: Send, F: Fn(usize, &mut T) + Sync + Send>(items: &mut [T], f: F) {
        items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
}

pub use imp::{for_each_chunk_mut, for_each_mut, map, map_items};

/// Sums `width` accumulators over `0..len`, one chunk of paths at a time.
///
/// `f` adds the contribution of a path range into the accumulator slice.
pub fn chunked_sum<F>(len: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(Range<usize>, &mut [f64]) + Sync + Send,
{
    let ranges = chunk_ranges(len);
    let partials = map_items(&ranges, |r| {
        let mut acc = vec![0.0; width];
        f(r.clone(), &mut acc);
        acc
    });
    let mut total = vec![0.0; width];
    for part in partials {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    total
}

/// Fills `out` (laid out as `len` rows of `stride` values) chunk by chunk.
///
/// `f` receives the first row index of the chunk and the mutable slab.
pub fn fill_rows<F>(out: &mut [f64], stride: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if stride == 0 {
        return;
    }
    for_each_chunk_mut(out, CHUNK * stride, |c, slab| f(c * CHUNK, slab));
}

/// Number of worker threads available to the data-parallel helpers.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (sequential build: runs inline).
pub fn with_threads<T: Send, F: FnOnce() -> T + Send>(threads: Option<usize>, f: F) -> T {
    #[cfg(feature = "parallel")]
    {
        match threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map(|pool| pool.install(f))
                .expect("thread pool construction"),
            None => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_serial_sum() {
        let n = 10_007;
        let data: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let s = chunked_sum(n, 1, |r, acc| {
            for i in r {
                acc[0] += data[i];
            }
        });
        let direct: f64 = data.iter().sum();
        assert!((s[0] - direct).abs() < 1e-9);
    }

    #[test]
    fn chunked_sum_is_thread_count_invariant() {
        let n = 50_000;
        let data: Vec<f64> = (0..n).map(|i| ((i * 7919) as f64).cos() * 1e3).collect();
        let run = |t| {
            with_threads(Some(t), || {
                chunked_sum(n, 2, |r, acc| {
                    for i in r {
                        acc[0] += data[i];
                        acc[1] += data[i] * data[i];
                    }
                })
            })
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }

    #[test]
    fn fill_rows_covers_every_row() {
        let rows = 5000;
        let mut out = vec![0.0; rows * 3];
        fill_rows(&mut out, 3, |first, slab| {
            for (r, row) in slab.chunks_mut(3).enumerate() {
                row.fill((first + r) as f64);
            }
        });
        for r in 0..rows {
            assert_eq!(out[3 * r + 2], r as f64);
        }
    }
}
