//! Scoped worker pool used by the similarity, PSO and Shapley engines.
//!
//! Work items are split into contiguous index ranges, one per worker, and
//! every result is written to its own slot. The output therefore does not
//! depend on scheduling or on the number of workers.

use std::num::NonZeroUsize;

/// Worker count from the `ACBR_JOBS` environment variable, falling back to
/// the available hardware parallelism.
pub fn default_workers() -> usize {
    std::env::var("ACBR_JOBS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(NonZeroUsize::get)
                .unwrap_or(1)
        })
}

/// Evaluates `f(0..n)` on up to `workers` threads, returning results in
/// index order.
pub fn map_indexed<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.max(1).min(n.max(1));
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(workers);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let start = (w * chunk).min(n);
                let end = ((w + 1) * chunk).min(n);
                scope.spawn(move || (start..end).map(f).collect::<Vec<T>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Fills `out` row by row, `row_len` cells per row, on up to `workers`
/// threads. Each row is handed to exactly one worker.
pub fn fill_rows<F>(out: &mut [f64], row_len: usize, workers: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    if row_len == 0 {
        return;
    }
    let rows = out.len() / row_len;
    let workers = workers.max(1).min(rows.max(1));
    if workers == 1 {
        for (i, row) in out.chunks_mut(row_len).enumerate() {
            f(i, row);
        }
        return;
    }
    let rows_per = rows.div_ceil(workers);
    let f = &f;
    std::thread::scope(|scope| {
        for (w, block) in out.chunks_mut(rows_per * row_len).enumerate() {
            scope.spawn(move || {
                for (i, row) in block.chunks_mut(row_len).enumerate() {
                    f(w * rows_per + i, row);
                }
            });
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order_for_any_worker_count() {
        let serial: Vec<usize> = (0..103).map(|i| i * i).collect();
        for workers in [1, 2, 3, 8, 200] {
            assert_eq!(map_indexed(103, workers, |i| i * i), serial);
        }
        assert!(map_indexed(0, 4, |i| i).is_empty());
    }

    #[test]
    fn fill_rows_covers_every_cell() {
        let mut out = vec![0.0; 7 * 3];
        fill_rows(&mut out, 3, 4, |r, row| {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (r * 10 + c) as f64;
            }
        });
        assert_eq!(out[20], 62.0);
        assert_eq!(out[3], 10.0);
    }
}
