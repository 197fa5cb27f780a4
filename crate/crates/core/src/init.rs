// SPDX-License-Identifier: MIT OR Apache-2.0

//! Candidate breakpoint pools and the combination search that turns a pool
//! into a `K`-segment fit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Segmentation};
use crate::error::{Error, Result};
use crate::maxem::{max_em, MaxEmOptions, SegmentedFit};
use crate::models::{EmissionModel, FitOptions};
use crate::real::Real;
use crate::tv::{total_variation, tv_prox_into};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolSource {
    BinarySegmentation,
    FusedLasso,
    Given,
}

/// Where a candidate came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Recursion depth (0 for the full-sample split).
    Depth(usize),
    /// Penalty level of the fused lasso path.
    Lambda(f64),
    User,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    /// Sorted, deduplicated, each in `1..n`.
    pub breakpoints: Vec<usize>,
    pub source: PoolSource,
    pub provenance: Vec<Provenance>,
    /// The pool fell short of its target size.
    pub short: bool,
}

impl CandidatePool {
    fn from_pairs(mut pairs: Vec<(usize, Provenance)>, source: PoolSource, short: bool) -> Self {
        pairs.sort_by_key(|p| p.0);
        pairs.dedup_by_key(|p| p.0);
        CandidatePool {
            breakpoints: pairs.iter().map(|p| p.0).collect(),
            provenance: pairs.iter().map(|p| p.1).collect(),
            source,
            short,
        }
    }

    pub fn given(n: usize, breakpoints: &[usize]) -> Result<Self> {
        if let Some(&b) = breakpoints.iter().find(|&&b| b == 0 || b >= n) {
            return Err(Error::invalid(format!("breakpoint {b} outside 1..{}", n.saturating_sub(1))));
        }
        Ok(Self::from_pairs(
            breakpoints.iter().map(|&b| (b, Provenance::User)).collect(),
            PoolSource::Given,
            false,
        ))
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }
}

/// Recursive one-breakpoint max-EM splits, `depth` levels deep (at most
/// `2^depth − 1` candidates). Sub-samples shorter than `2·d` are not split.
pub fn bs_candidates<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    depth: usize,
    opts: &MaxEmOptions<T>,
) -> Result<CandidatePool> {
    model.check_data(data)?;
    let min_len = (2 * model.dim(data.p())).max(2);
    let mut found = Vec::new();
    let mut stack = vec![(0usize, data.n(), 0usize)];
    while let Some((start, end, level)) = stack.pop() {
        let len = end - start;
        if level >= depth || len < min_len {
            continue;
        }
        let sub = data.slice(start..end)?;
        let init = Segmentation::new(len, vec![len / 2])?;
        let fit = max_em(model, &sub, &init, opts)?;
        let b = start + fit.segmentation.breakpoints()[0];
        found.push((b, Provenance::Depth(level)));
        stack.push((b, end, level + 1));
        stack.push((start, b, level + 1));
    }
    Ok(CandidatePool::from_pairs(found, PoolSource::BinarySegmentation, false))
}

#[derive(Clone, Debug)]
pub struct FusedLassoOptions<T> {
    /// Explicit decreasing λ grid; built from `λ_max` when `None`.
    pub grid: Option<Vec<T>>,
    pub grid_len: usize,
    /// Smallest grid value as a fraction of `λ_max`.
    pub min_ratio: T,
    /// Candidate quota is `quota_factor · (K − 1)`.
    pub quota_factor: usize,
    /// Target minimum distance between candidates (and to either end).
    pub min_gap: usize,
    /// Pruning never goes below `⌊keep_factor · (K − 1)⌋` candidates.
    pub keep_factor: f64,
    pub max_iter: usize,
    pub tol: T,
    /// Jump threshold relative to the parameter scale.
    pub jump_tol: T,
}

impl<T: Real> Default for FusedLassoOptions<T> {
    fn default() -> Self {
        FusedLassoOptions {
            grid: None,
            grid_len: 40,
            min_ratio: T::lit(1e-4),
            quota_factor: 5,
            min_gap: 50,
            keep_factor: 1.5,
            max_iter: 500,
            tol: T::lit(1e-7).max(T::epsilon() * T::lit(100.0)),
            jump_tol: T::lit(1e-6).max(T::epsilon() * T::lit(1e3)),
        }
    }
}

/// Per-observation parameters under a total-variation penalty on every
/// non-scale coordinate; the scale stays at its full-sample estimate.
pub struct FusedLassoPath<'a, T, M: ?Sized> {
    model: &'a M,
    data: &'a Dataset<T>,
    base: Vec<T>,
    free: Vec<usize>,
    /// `n × q` free coordinates, row-major.
    pub theta: Vec<T>,
    step: T,
    pub scale: T,
}

impl<'a, T: Real, M: EmissionModel<T> + ?Sized> FusedLassoPath<'a, T, M> {
    pub fn new(model: &'a M, data: &'a Dataset<T>) -> Self {
        let p = data.p();
        let base = model.fit_mle(data, (0..data.n()).into(), &FitOptions::default()).theta;
        let scale_ix = model.scale_index(p);
        let free: Vec<usize> = (0..base.len()).filter(|&j| Some(j) != scale_ix).collect();
        let q = free.len();
        let mut theta = Vec::with_capacity(data.n() * q);
        for _ in 0..data.n() {
            theta.extend(free.iter().map(|&j| base[j]));
        }
        let scale = T::one() + free.iter().fold(T::zero(), |m, &j| m.max(base[j].abs()));
        let mut path = FusedLassoPath {
            model,
            data,
            base,
            free,
            theta,
            step: T::one(),
            scale,
        };
        path.step = T::one() / path.lipschitz_estimate();
        path
    }

    fn q(&self) -> usize {
        self.free.len()
    }

    fn full(&self, row: &[T], buf: &mut [T]) {
        buf.copy_from_slice(&self.base);
        for (&j, &v) in self.free.iter().zip(row) {
            buf[j] = v;
        }
    }

    fn lipschitz_estimate(&self) -> T {
        let mut buf = self.base.clone();
        let mut worst = T::lit(1e-12);
        for i in 0..self.data.n() {
            let row = &self.theta[i * self.q()..(i + 1) * self.q()];
            self.full(row, &mut buf);
            let h = self.model.hessian(self.data, i, &buf);
            for &a in &self.free {
                let s: T = self.free.iter().map(|&b| h[(a, b)].abs()).sum();
                worst = worst.max(s);
            }
        }
        worst
    }

    /// Negative log-likelihood of per-observation parameters.
    pub fn smooth(&self, theta: &[T]) -> T {
        let q = self.q();
        let mut buf = self.base.clone();
        let mut total = T::zero();
        for i in 0..self.data.n() {
            self.full(&theta[i * q..(i + 1) * q], &mut buf);
            total -= self.model.log_density(self.data, i, &buf);
        }
        if total.is_nan() {
            T::infinity()
        } else {
            total
        }
    }

    fn gradient(&self, theta: &[T], grad: &mut [T]) {
        let q = self.q();
        let mut buf = self.base.clone();
        let mut score = vec![T::zero(); self.base.len()];
        for i in 0..self.data.n() {
            self.full(&theta[i * q..(i + 1) * q], &mut buf);
            score.iter_mut().for_each(|s| *s = T::zero());
            self.model.add_score(self.data, i, &buf, T::one(), &mut score);
            for (c, &j) in self.free.iter().enumerate() {
                grad[i * q + c] = -score[j];
            }
        }
    }

    pub fn penalty(&self, theta: &[T]) -> T {
        let (n, q) = (self.data.n(), self.q());
        let mut col = vec![T::zero(); n];
        (0..q)
            .map(|c| {
                for i in 0..n {
                    col[i] = theta[i * q + c];
                }
                total_variation(&col)
            })
            .sum()
    }

    pub fn objective(&self, lambda: T) -> T {
        self.smooth(&self.theta) + lambda * self.penalty(&self.theta)
    }

    /// Smallest λ at which the fully fused solution is optimal.
    pub fn lambda_max(&self) -> T {
        let (n, q) = (self.data.n(), self.q());
        let mut grad = vec![T::zero(); n * q];
        let mut flat = Vec::with_capacity(n * q);
        for _ in 0..n {
            flat.extend(self.free.iter().map(|&j| self.base[j]));
        }
        self.gradient(&flat, &mut grad);
        let mut best = T::zero();
        for c in 0..q {
            let mut cum = T::zero();
            for i in 0..n - 1 {
                cum += grad[i * q + c];
                best = best.max(cum.abs());
            }
        }
        best
    }

    fn prox(&self, v: &[T], level: T, out: &mut [T]) {
        let (n, q) = (self.data.n(), self.q());
        let mut col = vec![T::zero(); n];
        let mut res = vec![T::zero(); n];
        for c in 0..q {
            for i in 0..n {
                col[i] = v[i * q + c];
            }
            tv_prox_into(&col, level, &mut res);
            for i in 0..n {
                out[i * q + c] = res[i];
            }
        }
    }

    /// Proximal gradient with backtracking at penalty `lambda`, warm-started
    /// from the current state. Returns the objective after each iteration.
    pub fn solve(&mut self, lambda: T, max_iter: usize, tol: T) -> Vec<T> {
        let len = self.theta.len();
        let mut grad = vec![T::zero(); len];
        let mut trial = vec![T::zero(); len];
        let mut moved = vec![T::zero(); len];
        let mut f = self.smooth(&self.theta);
        let mut trace = Vec::new();
        for _ in 0..max_iter {
            self.gradient(&self.theta, &mut grad);
            let mut accepted = false;
            for _ in 0..60 {
                for ((m, &t), &g) in moved.iter_mut().zip(&self.theta).zip(&grad) {
                    *m = t - self.step * g;
                }
                self.prox(&moved, self.step * lambda, &mut trial);
                let f_trial = self.smooth(&trial);
                let mut lin = T::zero();
                let mut sq = T::zero();
                for ((&a, &b), &g) in trial.iter().zip(&self.theta).zip(&grad) {
                    lin += g * (a - b);
                    sq += (a - b) * (a - b);
                }
                let bound = f + lin + sq / (T::lit(2.0) * self.step);
                if f_trial <= bound + T::epsilon() * T::lit(16.0) * (T::one() + f.abs()) {
                    accepted = true;
                    break;
                }
                self.step *= T::lit(0.5);
            }
            if !accepted {
                break;
            }
            let change = trial
                .iter()
                .zip(&self.theta)
                .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
            std::mem::swap(&mut self.theta, &mut trial);
            f = self.smooth(&self.theta);
            trace.push(f + lambda * self.penalty(&self.theta));
            if change <= tol * self.scale {
                break;
            }
        }
        trace
    }

    /// Positions `b` (a breakpoint between rows `b−1` and `b`) where any
    /// coordinate jumps by more than `jump_tol · scale`.
    pub fn jumps(&self, jump_tol: T) -> Vec<usize> {
        let q = self.q();
        let thr = jump_tol * self.scale;
        (1..self.data.n())
            .filter(|&b| (0..q).any(|c| (self.theta[b * q + c] - self.theta[(b - 1) * q + c]).abs() > thr))
            .collect()
    }
}

/// Fused lasso pool for a `k`-segment search.
pub fn fl_candidates<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    k: usize,
    opts: &FusedLassoOptions<T>,
) -> Result<CandidatePool> {
    model.check_data(data)?;
    let mut path = FusedLassoPath::new(model, data);
    let grid = match &opts.grid {
        Some(g) => g.clone(),
        None => {
            let top = path.lambda_max();
            let len = opts.grid_len.max(2);
            let ratio = opts.min_ratio.powf(T::one() / T::from_usize_lossy(len - 1));
            (0..len).map(|j| top * ratio.powi(j as i32)).collect()
        }
    };
    let quota = opts.quota_factor * k.saturating_sub(1);
    let mut densest: (Vec<usize>, T) = (Vec::new(), T::zero());
    let mut chosen = None;
    for &lambda in &grid {
        path.solve(lambda, opts.max_iter, opts.tol);
        let cands = path.jumps(opts.jump_tol);
        log::trace!("fused lasso λ={lambda}: {} candidates", cands.len());
        if cands.len() >= quota {
            chosen = Some((cands, lambda));
            break;
        }
        if cands.len() > densest.0.len() {
            densest = (cands, lambda);
        }
    }
    let short = chosen.is_none();
    let (cands, lambda) = chosen.unwrap_or(densest);
    let keep = ((k.saturating_sub(1)) as f64 * opts.keep_factor).floor() as usize;
    let pruned = prune(model, data, cands, opts.min_gap, keep.max(k.saturating_sub(1)));
    let lam = Provenance::Lambda(lambda.as_f64());
    Ok(CandidatePool::from_pairs(
        pruned.into_iter().map(|b| (b, lam)).collect(),
        PoolSource::FusedLasso,
        short,
    ))
}

/// Removes one of the two closest candidates (ends count as fixed points)
/// until all gaps reach `min_gap` or only `keep` remain. The dropped one is
/// the one whose removal loses less likelihood; ties drop the later one.
fn prune<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    mut cands: Vec<usize>,
    min_gap: usize,
    keep: usize,
) -> Vec<usize> {
    let n = data.n();
    let opts = FitOptions::default();
    let fit = |a: usize, b: usize| model.fit_mle(data, (a..b).into(), &opts).loglik;
    while cands.len() > keep {
        let mut pts = Vec::with_capacity(cands.len() + 2);
        pts.push(0);
        pts.extend_from_slice(&cands);
        pts.push(n);
        let (gap, at) = pts.windows(2).enumerate().map(|(j, w)| (w[1] - w[0], j)).min().expect("non-empty");
        if gap >= min_gap {
            break;
        }
        // Candidates are pts[1..=len]; the closest pair is pts[at], pts[at+1].
        let loss = |c: usize| fit(pts[c - 1], pts[c]) + fit(pts[c], pts[c + 1]) - fit(pts[c - 1], pts[c + 1]);
        let drop = match (at, at + 1) {
            (0, right) => right,
            (left, right) if right == pts.len() - 1 => left,
            (left, right) => {
                if loss(left) < loss(right) {
                    left
                } else {
                    right
                }
            }
        };
        cands.remove(drop - 1);
    }
    cands
}

fn subsets(pool: &[usize], r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn rec(pool: &[usize], from: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for j in from..pool.len() {
            if pool.len() - j < r - cur.len() {
                break;
            }
            cur.push(pool[j]);
            rec(pool, j + 1, r, cur, out);
            cur.pop();
        }
    }
    rec(pool, 0, r, &mut cur, &mut out);
    out
}

/// Prefers non-degenerate fits, then larger log-likelihood, then earlier
/// breakpoints.
fn preferred<T: Real>(a: SegmentedFit<T>, b: SegmentedFit<T>) -> SegmentedFit<T> {
    let key = |f: &SegmentedFit<T>| !f.degenerate;
    if key(&a) != key(&b) {
        return if key(&a) { a } else { b };
    }
    if b.loglik > a.loglik || (b.loglik == a.loglik && b.segmentation < a.segmentation) {
        b
    } else {
        a
    }
}

/// Runs max-EM from every `(k−1)`-subset of the pool and keeps the best.
pub fn combination_search<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    k: usize,
    pool: &CandidatePool,
    opts: &MaxEmOptions<T>,
) -> Result<SegmentedFit<T>> {
    model.check_data(data)?;
    let n = data.n();
    if k == 0 || k > n {
        return Err(Error::Infeasible(format!("cannot place {k} segments on {n} observations")));
    }
    if k == 1 {
        return max_em(model, data, &Segmentation::single(n), opts);
    }
    if pool.len() < k - 1 {
        return Err(Error::PoolTooSmall {
            have: pool.len(),
            need: k - 1,
        });
    }
    let results: Vec<Result<SegmentedFit<T>>> = subsets(&pool.breakpoints, k - 1)
        .into_par_iter()
        .map(|bps| max_em(model, data, &Segmentation::new(n, bps)?, opts))
        .collect();
    let mut best: Option<SegmentedFit<T>> = None;
    for r in results {
        let fit = r?;
        best = Some(match best {
            None => fit,
            Some(b) => preferred(b, fit),
        });
    }
    Ok(best.expect("at least one subset"))
}

/// How the candidate pool is built.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    Bs,
    Fl,
    Given(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct PipelineOptions<T> {
    pub maxem: MaxEmOptions<T>,
    pub bs_depth: usize,
    pub fl: FusedLassoOptions<T>,
}

impl<T: Real> Default for PipelineOptions<T> {
    fn default() -> Self {
        PipelineOptions {
            maxem: MaxEmOptions::default(),
            bs_depth: 4,
            fl: FusedLassoOptions::default(),
        }
    }
}

/// Builds the pool for `method`.
pub fn candidate_pool<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    k: usize,
    method: &InitMethod,
    opts: &PipelineOptions<T>,
) -> Result<CandidatePool> {
    match method {
        InitMethod::Bs => bs_candidates(model, data, opts.bs_depth, &opts.maxem),
        InitMethod::Fl => fl_candidates(model, data, k, &opts.fl),
        InitMethod::Given(bps) => CandidatePool::given(data.n(), bps),
    }
}

/// Pool construction followed by combination search.
pub fn detect<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    k: usize,
    method: &InitMethod,
    opts: &PipelineOptions<T>,
) -> Result<(SegmentedFit<T>, CandidatePool)> {
    let pool = candidate_pool(model, data, k, method, opts)?;
    let fit = combination_search(model, data, k, &pool, &opts.maxem)?;
    Ok((fit, pool))
}
