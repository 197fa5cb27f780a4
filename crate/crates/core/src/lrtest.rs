// SPDX-License-Identifier: MIT OR Apache-2.0

//! Test of no change against one change: a scan of approximate likelihood
//! ratio statistics over the breakpoint position, calibrated by permuting
//! the observation order.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::models::{EmissionModel, FitOptions};
use crate::real::Real;

/// Which approximation produced a curve point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Score expansion around the no-change fit.
    Score,
    /// Short first segment refitted exactly.
    LeftTail,
    /// Short last segment refitted exactly.
    RightTail,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Score => "score",
            Regime::LeftTail => "left_tail",
            Regime::RightTail => "right_tail",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint<T> {
    pub n1: usize,
    pub statistic: T,
    pub regime: Regime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrCurve<T> {
    pub points: Vec<CurvePoint<T>>,
    /// Positions in range that produced no point (short or degenerate tail).
    pub excluded: Vec<usize>,
    pub t_n: T,
    pub n1_hat: usize,
}

impl<T: Real> LrCurve<T> {
    fn from_points(points: Vec<CurvePoint<T>>, excluded: Vec<usize>) -> Result<Self> {
        let best = points
            .iter()
            .fold(None::<&CurvePoint<T>>, |b, p| match b {
                Some(b) if b.statistic >= p.statistic => Some(b),
                _ => Some(p),
            })
            .ok_or_else(|| Error::Infeasible("no admissible breakpoint position for the scan".into()))?;
        Ok(LrCurve {
            t_n: best.statistic,
            n1_hat: best.n1,
            points,
            excluded,
        })
    }

    /// Writes `n1,statistic,regime` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n1", "statistic", "regime"])?;
        for p in &self.points {
            w.write_record([p.n1.to_string(), p.statistic.to_string(), p.regime.as_str().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LrOptions<T> {
    /// Tails shorter than this use exact tail refits (when the model allows)
    /// or are excluded.
    pub t_low: usize,
    pub fit: FitOptions<T>,
}

impl<T: Real> Default for LrOptions<T> {
    fn default() -> Self {
        LrOptions {
            t_low: 100,
            fit: FitOptions::default(),
        }
    }
}

/// Permutation-invariant ingredients of the scan: the no-change fit, the
/// whitened per-observation scores and log-densities at that fit.
pub struct NullFit<T> {
    pub theta0: Vec<T>,
    pub info: Matrix<T>,
    chol: Cholesky<T>,
    /// `L⁻¹ s_i`, `n × d` row-major, where `Î = L Lᵀ`.
    pub whitened: Vec<T>,
    pub log_dens: Vec<T>,
    pub d: usize,
}

impl<T: Real> NullFit<T> {
    pub fn new<M: EmissionModel<T> + ?Sized>(model: &M, data: &Dataset<T>, fit: &FitOptions<T>) -> Result<Self> {
        model.check_data(data)?;
        let n = data.n();
        let theta0 = model.fit_mle(data, (0..n).into(), fit).theta;
        let d = theta0.len();
        let mut info = model.hessian_sum(data, (0..n).into(), &theta0);
        info.scale(-T::one() / T::from_usize_lossy(n));
        let chol = info.cholesky().ok_or(Error::SingularInformation)?;
        let mut whitened = Vec::with_capacity(n * d);
        let mut log_dens = Vec::with_capacity(n);
        for i in 0..n {
            whitened.extend(chol.forward(&model.score(data, i, &theta0)));
            log_dens.push(model.log_density(data, i, &theta0));
        }
        Ok(NullFit {
            theta0,
            info,
            chol,
            whitened,
            log_dens,
            d,
        })
    }

    /// `sᵀ Î⁻¹ s`.
    pub fn inv_quad(&self, s: &[T]) -> T {
        self.chol.inv_quad(s)
    }
}

/// The score-expansion statistic from the prefix score sum `S₁` and the
/// suffix sum `S₂`, both whitened.
#[inline]
pub fn score_statistic<T: Real>(n: usize, n1: usize, u1: &[T], u2: &[T]) -> T {
    let nf = T::from_usize_lossy(n);
    let a = T::from_usize_lossy(n1);
    let b = T::from_usize_lossy(n - n1);
    let q11: T = u1.iter().map(|&v| v * v).sum();
    let q22: T = u2.iter().map(|&v| v * v).sum();
    let q12: T = u1.iter().zip(u2).map(|(&x, &y)| x * y).sum();
    b / (nf * a) * q11 + a / (nf * b) * q22 - T::lit(2.0) / nf * q12
}

/// Score-expansion statistic at each `n1` in `range`, for rows taken in
/// `order`.
pub fn score_scan<T: Real>(null: &NullFit<T>, order: &[usize], range: std::ops::Range<usize>) -> Vec<T> {
    let (n, d) = (order.len(), null.d);
    let mut total = vec![T::zero(); d];
    for &i in order {
        for (t, &w) in total.iter_mut().zip(&null.whitened[i * d..(i + 1) * d]) {
            *t += w;
        }
    }
    let mut u1 = vec![T::zero(); d];
    let mut u2 = vec![T::zero(); d];
    let mut out = Vec::with_capacity(range.len());
    for (m, &i) in order.iter().enumerate().take(range.end.min(n)) {
        let n1 = m + 1;
        for (u, &w) in u1.iter_mut().zip(&null.whitened[i * d..(i + 1) * d]) {
            *u += w;
        }
        if n1 >= range.start && n1 < range.end {
            for j in 0..d {
                u2[j] = total[j] - u1[j];
            }
            out.push(score_statistic(n, n1, &u1, &u2));
        }
    }
    out
}

/// Exact tail statistic `2 Σ_{i in tail} [log e_i(θ̂_tail) − log e_i(θ̂₀)]`
/// for the first `len` rows of `order`; `None` if the tail fit is
/// degenerate or shorter than `d + 1`.
pub fn exact_tail<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    null: &NullFit<T>,
    order: &[usize],
    len: usize,
    fit: &FitOptions<T>,
) -> Option<T> {
    if len < null.d + 1 {
        return None;
    }
    let rows = &order[..len];
    let tail = model.fit_mle_from(data, rows.into(), &null.theta0, fit);
    if tail.degenerate {
        return None;
    }
    let base: T = rows.iter().map(|&i| null.log_dens[i]).sum();
    Some(T::lit(2.0) * (tail.loglik - base))
}

/// Tail statistics for every length in `1..=max_len` (index `len − 1`).
fn tail_curve<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    null: &NullFit<T>,
    order: &[usize],
    max_len: usize,
    fit: &FitOptions<T>,
) -> Vec<Option<T>> {
    let max_len = max_len.min(order.len());
    let min_len = null.d + 1;
    let mut base = T::zero();
    let prefix_base: Vec<T> = order[..max_len]
        .iter()
        .map(|&i| {
            base += null.log_dens[i];
            base
        })
        .collect();
    let two = T::lit(2.0);
    match model.prefix_max_loglik(data, &order[..max_len], min_len) {
        Some(prefix) => prefix
            .into_iter()
            .zip(&prefix_base)
            .map(|(ll, &b)| ll.map(|ll| two * (ll - b)))
            .collect(),
        None => (1..=max_len).map(|len| exact_tail(model, data, null, order, len, fit)).collect(),
    }
}

/// The statistic curve for rows taken in `order`.
pub fn scan_ordered<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    null: &NullFit<T>,
    order: &[usize],
    opts: &LrOptions<T>,
) -> Result<LrCurve<T>> {
    let n = order.len();
    let t_low = opts.t_low.max(1);
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    if !model.exact_small_sample() {
        if n < 2 * t_low {
            return Err(Error::invalid(format!(
                "model `{}` needs at least {} observations for the scan (have {n})",
                model.name(),
                2 * t_low
            )));
        }
        let range = t_low..n - t_low;
        for (n1, stat) in range.clone().zip(score_scan(null, order, range)) {
            push(&mut points, &mut excluded, n1, Some(stat), Regime::Score);
        }
        return LrCurve::from_points(points, excluded);
    }

    let regime = |n1: usize| {
        if n1 < t_low && n1 <= n - n1 {
            Regime::LeftTail
        } else if n - n1 < t_low {
            Regime::RightTail
        } else {
            Regime::Score
        }
    };
    let left_max = (1..n).filter(|&n1| regime(n1) == Regime::LeftTail).max().unwrap_or(0);
    let right_max = (1..n).filter(|&n1| regime(n1) == Regime::RightTail).map(|n1| n - n1).max().unwrap_or(0);
    let left = tail_curve(model, data, null, order, left_max, &opts.fit);
    let reversed: Vec<usize> = order.iter().rev().copied().collect();
    let right = tail_curve(model, data, null, &reversed, right_max, &opts.fit);
    let score_range = t_low..(n + 1).saturating_sub(t_low).max(t_low);
    let score = score_scan(null, order, score_range.clone());
    for n1 in 1..n {
        match regime(n1) {
            Regime::LeftTail => push(&mut points, &mut excluded, n1, left[n1 - 1], Regime::LeftTail),
            Regime::RightTail => push(&mut points, &mut excluded, n1, right[n - n1 - 1], Regime::RightTail),
            Regime::Score => {
                let stat = score.get(n1 - score_range.start).copied();
                push(&mut points, &mut excluded, n1, stat, Regime::Score)
            }
        }
    }
    LrCurve::from_points(points, excluded)
}

fn push<T: Real>(points: &mut Vec<CurvePoint<T>>, excluded: &mut Vec<usize>, n1: usize, stat: Option<T>, regime: Regime) {
    match stat {
        Some(s) if s.is_finite() => points.push(CurvePoint {
            n1,
            statistic: s,
            regime,
        }),
        _ => excluded.push(n1),
    }
}

/// Statistic curve in the original row order.
pub fn lr_scan<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    opts: &LrOptions<T>,
) -> Result<LrCurve<T>> {
    let null = NullFit::new(model, data, &opts.fit)?;
    let order: Vec<usize> = (0..data.n()).collect();
    scan_ordered(model, data, &null, &order, opts)
}

/// `2(ℓ(θ̂₁) + ℓ(θ̂₂) − ℓ(θ̂₀))` with all three fits computed exactly.
pub fn exact_lr<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    n1: usize,
    fit: &FitOptions<T>,
) -> T {
    let n = data.n();
    let l0 = model.fit_mle(data, (0..n).into(), fit).loglik;
    let l1 = model.fit_mle(data, (0..n1).into(), fit).loglik;
    let l2 = model.fit_mle(data, (n1..n).into(), fit).loglik;
    T::lit(2.0) * (l1 + l2 - l0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PermutationResult<T> {
    #[serde(rename = "T_n")]
    pub t_n: T,
    pub n1_hat: usize,
    pub p_value: f64,
    pub q95_null: T,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    #[serde(skip)]
    pub null: Vec<T>,
    #[serde(skip)]
    pub curve: Option<LrCurve<T>>,
}

/// Deterministic per-replicate generator: stream `r` of `seed`.
pub fn replicate_rng(seed: u64, r: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

/// Linear-interpolation sample quantile.
pub fn quantile<T: Real>(values: &[T], prob: f64) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    if v.is_empty() {
        return T::nan();
    }
    let h = (v.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (v[hi] - v[lo]) * T::lit(h - lo as f64)
}

/// Permutation test for a single breakpoint with `b` shuffles.
pub fn permutation_test<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    b: usize,
    seed: u64,
    opts: &LrOptions<T>,
) -> Result<PermutationResult<T>> {
    if b == 0 {
        return Err(Error::invalid("at least one permutation is required"));
    }
    let null = NullFit::new(model, data, &opts.fit)?;
    let n = data.n();
    let identity: Vec<usize> = (0..n).collect();
    let observed = scan_ordered(model, data, &null, &identity, opts)?;
    let stats: Vec<Result<T>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut order = identity.clone();
            order.shuffle(&mut replicate_rng(seed, r as u64));
            scan_ordered(model, data, &null, &order, opts).map(|c| c.t_n)
        })
        .collect();
    let stats = stats.into_iter().collect::<Result<Vec<T>>>()?;
    let exceed = stats.iter().filter(|&&s| s >= observed.t_n).count();
    Ok(PermutationResult {
        t_n: observed.t_n,
        n1_hat: observed.n1_hat,
        p_value: (1 + exceed) as f64 / (b + 1) as f64,
        q95_null: quantile(&stats, 0.95),
        b,
        seed,
        null: stats,
        curve: Some(observed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let v = [3.0, 1.0, 2.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert!((quantile(&v, 0.95) - 4.8f64).abs() < 1e-12);
    }

    #[test]
    fn zero_prefix_score_leaves_middle_term() {
        let u1 = [0.0, 0.0];
        let u2 = [1.0, 2.0];
        let s = score_statistic::<f64>(10, 4, &u1, &u2);
        assert!((s - 4.0 / 60.0 * 5.0).abs() < 1e-15);
    }
}
