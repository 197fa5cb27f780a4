// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exhaustive search over all segmentations, used as ground truth for
//! small problems.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::data::{Dataset, Segmentation};
use crate::error::{Error, Result};
use crate::maxem::{fit_segmentation, SegmentedFit};
use crate::models::{EmissionModel, FitOptions};
use crate::real::Real;

#[derive(Clone, Debug)]
pub struct BruteForceOptions<T> {
    /// Shortest segment considered.
    pub min_segment_len: usize,
    /// Refuse to enumerate more segmentations than this.
    pub guard: u128,
    /// Skip segmentations with a degenerate segment fit.
    pub skip_degenerate: bool,
    pub fit: FitOptions<T>,
}

impl<T: Real> Default for BruteForceOptions<T> {
    fn default() -> Self {
        BruteForceOptions {
            min_segment_len: 1,
            guard: 10_000_000,
            skip_degenerate: true,
            fit: FitOptions::default(),
        }
    }
}

/// Number of ways to cut `n` rows into `k` segments of at least `min_len`
/// rows.
pub fn count_segmentations(n: usize, k: usize, min_len: usize) -> u128 {
    let min_len = min_len.max(1);
    if k == 0 || n < k * min_len {
        return 0;
    }
    binomial((n - k * (min_len - 1) - 1) as u128, (k - 1) as u128)
}

fn binomial(n: u128, r: u128) -> u128 {
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for j in 0..r {
        acc = acc.saturating_mul(n - j) / (j + 1);
    }
    acc
}

/// Memoized maximized log-likelihood of every contiguous segment.
pub struct SegmentFitCache<'a, T, M: ?Sized> {
    model: &'a M,
    data: &'a Dataset<T>,
    opts: FitOptions<T>,
    cells: Vec<OnceLock<(T, bool)>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<'a, T: Real, M: EmissionModel<T> + ?Sized> SegmentFitCache<'a, T, M> {
    pub fn new(model: &'a M, data: &'a Dataset<T>, opts: FitOptions<T>) -> Self {
        let n = data.n();
        SegmentFitCache {
            model,
            data,
            opts,
            cells: (0..n * (n + 1) / 2).map(|_| OnceLock::new()).collect(),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    #[inline]
    fn slot(&self, start: usize, end: usize) -> usize {
        end * (end - 1) / 2 + start
    }

    /// `(loglik, degenerate)` of the fit on rows `start..end`.
    pub fn get(&self, start: usize, end: usize) -> (T, bool) {
        assert!(start < end && end <= self.data.n(), "segment {start}..{end} out of range");
        let cell = &self.cells[self.slot(start, end)];
        if let Some(v) = cell.get() {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return *v;
        }
        *cell.get_or_init(|| {
            self.misses.fetch_add(1, Ordering::Relaxed);
            let fit = self.model.fit_mle(self.data, (start..end).into(), &self.opts);
            (fit.loglik, fit.degenerate)
        })
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}

#[derive(Clone, Debug)]
struct Best<T> {
    loglik: T,
    breakpoints: Vec<usize>,
}

fn better<T: Real>(a: Option<Best<T>>, b: Option<Best<T>>) -> Option<Best<T>> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            if b.loglik > a.loglik || (b.loglik == a.loglik && b.breakpoints < a.breakpoints) {
                Some(b)
            } else {
                Some(a)
            }
        }
    }
}

struct Search<'c, 'a, T, M: ?Sized> {
    cache: &'c SegmentFitCache<'a, T, M>,
    n: usize,
    k: usize,
    min_len: usize,
    skip_degenerate: bool,
}

impl<T: Real, M: EmissionModel<T> + ?Sized> Search<'_, '_, T, M> {
    /// Enumerates segments after `start`, with `bps` already fixed. `acc` is
    /// `None` once a degenerate segment has been placed; such branches are
    /// still walked so every interval is visited, but never recorded.
    fn descend(&self, start: usize, bps: &mut Vec<usize>, acc: Option<T>, best: &mut Option<Best<T>>) {
        let placed = bps.len();
        if placed + 1 == self.k {
            let Some(total) = self.extend(acc, start, self.n) else {
                return;
            };
            let beats = match best {
                None => true,
                Some(b) => total > b.loglik,
            };
            if beats && total.is_finite() {
                *best = Some(Best {
                    loglik: total,
                    breakpoints: bps.clone(),
                });
            }
            return;
        }
        let remaining = self.k - placed - 1;
        let last = self.n - remaining * self.min_len;
        for b in start + self.min_len..=last {
            let next = self.extend(acc, start, b);
            bps.push(b);
            self.descend(b, bps, next, best);
            bps.pop();
        }
    }

    #[inline]
    fn extend(&self, acc: Option<T>, start: usize, end: usize) -> Option<T> {
        let (ll, degenerate) = self.cache.get(start, end);
        if degenerate && self.skip_degenerate {
            return None;
        }
        acc.map(|a| a + ll)
    }
}

/// Best `k`-segment segmentation by exhaustive enumeration. Ties go to the
/// lexicographically earliest breakpoints.
pub fn brute_force<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    k: usize,
    opts: &BruteForceOptions<T>,
) -> Result<SegmentedFit<T>> {
    let cache = SegmentFitCache::new(model, data, opts.fit.clone());
    brute_force_cached(&cache, k, opts)
}

/// [`brute_force`] sharing segment fits across calls (e.g. over several
/// `k`).
pub fn brute_force_cached<T: Real, M: EmissionModel<T> + ?Sized>(
    cache: &SegmentFitCache<'_, T, M>,
    k: usize,
    opts: &BruteForceOptions<T>,
) -> Result<SegmentedFit<T>> {
    let (model, data) = (cache.model, cache.data);
    model.check_data(data)?;
    let n = data.n();
    let min_len = opts.min_segment_len.max(1);
    let count = count_segmentations(n, k, min_len);
    if count == 0 {
        return Err(Error::Infeasible(format!(
            "no segmentation of {n} rows into {k} segments of length >= {min_len}"
        )));
    }
    if count > opts.guard {
        return Err(Error::GuardExceeded {
            count,
            guard: opts.guard,
        });
    }
    let search = Search {
        cache,
        n,
        k,
        min_len,
        skip_degenerate: opts.skip_degenerate,
    };
    let best = if k == 1 {
        let mut best = None;
        search.descend(0, &mut Vec::new(), Some(T::zero()), &mut best);
        best
    } else {
        let last = n - (k - 1) * min_len;
        (min_len..=last)
            .into_par_iter()
            .map(|b| {
                let mut best = None;
                search.descend(b, &mut vec![b], search.extend(Some(T::zero()), 0, b), &mut best);
                best
            })
            .reduce(|| None, better)
    };
    let best = best.ok_or_else(|| {
        Error::Infeasible(format!("every segmentation of {n} rows into {k} segments has a degenerate segment fit"))
    })?;
    let seg = Segmentation::new(n, best.breakpoints)?;
    fit_segmentation(model, data, &seg, &opts.fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_compositions() {
        assert_eq!(count_segmentations(5, 2, 1), 4);
        assert_eq!(count_segmentations(6, 3, 1), 10);
        assert_eq!(count_segmentations(6, 3, 2), 1);
        assert_eq!(count_segmentations(5, 3, 2), 0);
        assert_eq!(count_segmentations(1000, 1, 1), 1);
    }
}
