// SPDX-License-Identifier: MIT OR Apache-2.0

//! Normal-error models: the mean model (intercept only) and linear
//! regression. Parameters are `(β, log σ)`.

use crate::data::{Dataset, Rows};
use crate::linalg::Matrix;
use crate::models::{FitOptions, MleFit};
use crate::real::Real;

#[inline]
fn mean_of<T: Real>(data: &Dataset<T>, i: usize, beta: &[T], covariates: bool) -> T {
    let mut eta = beta[0];
    if covariates {
        for (b, &z) in beta[1..].iter().zip(data.row(i)) {
            eta += *b * z;
        }
    }
    eta
}

#[inline]
fn for_each_design<T: Real>(data: &Dataset<T>, i: usize, covariates: bool, mut f: impl FnMut(usize, T)) {
    f(0, T::one());
    if covariates {
        for (j, &z) in data.row(i).iter().enumerate() {
            f(j + 1, z);
        }
    }
}

/// `log N(y_i; x_iᵀβ, σ²)` with `σ = exp(θ_last)`.
pub fn log_density<T: Real>(data: &Dataset<T>, i: usize, theta: &[T], covariates: bool) -> T {
    let d = theta.len();
    let log_sigma = theta[d - 1];
    let r = data.y(i) - mean_of(data, i, &theta[..d - 1], covariates);
    let z = r * (-log_sigma).exp();
    -T::lit(0.5) * (T::TAU()).ln() - log_sigma - T::lit(0.5) * z * z
}

pub fn add_score<T: Real>(data: &Dataset<T>, i: usize, theta: &[T], covariates: bool, w: T, out: &mut [T]) {
    let d = theta.len();
    let inv_var = (-T::lit(2.0) * theta[d - 1]).exp();
    let r = data.y(i) - mean_of(data, i, &theta[..d - 1], covariates);
    for_each_design(data, i, covariates, |j, x| out[j] += w * x * r * inv_var);
    out[d - 1] += w * (r * r * inv_var - T::one());
}

pub fn add_hessian<T: Real>(
    data: &Dataset<T>,
    i: usize,
    theta: &[T],
    covariates: bool,
    w: T,
    acc: &mut Matrix<T>,
) {
    let d = theta.len();
    let inv_var = (-T::lit(2.0) * theta[d - 1]).exp();
    let r = data.y(i) - mean_of(data, i, &theta[..d - 1], covariates);
    let two = T::lit(2.0);
    for_each_design(data, i, covariates, |a, xa| {
        for_each_design(data, i, covariates, |b, xb| acc[(a, b)] -= w * xa * xb * inv_var);
        let cross = -w * two * xa * r * inv_var;
        acc[(a, d - 1)] += cross;
        acc[(d - 1, a)] += cross;
    });
    acc[(d - 1, d - 1)] -= w * two * r * r * inv_var;
}

/// Weighted least squares with the MLE residual variance. `weights` is
/// indexed by row; `None` means unit weight on `rows`.
pub fn fit<T: Real>(
    data: &Dataset<T>,
    rows: &Rows<'_>,
    weights: Option<&[T]>,
    covariates: bool,
    opts: &FitOptions<T>,
) -> MleFit<T> {
    let q = if covariates { data.p() + 1 } else { 1 };
    let d = q + 1;
    let mut xtx = Matrix::zeros(q);
    let mut xty = vec![T::zero(); q];
    let mut wsum = T::zero();
    let mut x = vec![T::zero(); q];
    let mut visit = |i: usize, w: T| {
        if w == T::zero() {
            return;
        }
        for_each_design(data, i, covariates, |j, v| x[j] = v);
        xtx.add_outer(&x, w);
        for j in 0..q {
            xty[j] += w * x[j] * data.y(i);
        }
        wsum += w;
    };
    match weights {
        Some(ws) => ws.iter().enumerate().for_each(|(i, &w)| visit(i, w)),
        None => rows.iter().for_each(|i| visit(i, T::one())),
    }

    let mut degenerate = wsum < T::from_usize_lossy(d);
    let mut ridge = opts.ridge;
    let beta = loop {
        let mut a = xtx.clone();
        a.add_diagonal(ridge);
        match a.cholesky() {
            Some(ch) => break ch.solve(&xty),
            None => {
                degenerate = true;
                ridge = if ridge == T::zero() { opts.fallback_ridge } else { ridge * T::lit(10.0) };
                if ridge > T::lit(1e6) {
                    break vec![T::zero(); q];
                }
            }
        }
    };

    let mut rss = T::zero();
    let mut theta = beta.clone();
    theta.push(T::zero());
    let mut visit_rss = |i: usize, w: T| {
        let r = data.y(i) - mean_of(data, i, &beta, covariates);
        rss += w * r * r;
    };
    match weights {
        Some(ws) => ws.iter().enumerate().for_each(|(i, &w)| visit_rss(i, w)),
        None => rows.iter().for_each(|i| visit_rss(i, T::one())),
    }
    let mut sigma = if wsum > T::zero() { (rss / wsum).sqrt() } else { T::zero() };
    if !(sigma >= opts.sigma_floor) {
        sigma = opts.sigma_floor;
        degenerate = true;
    }
    theta[d - 1] = sigma.ln();

    let loglik = match weights {
        Some(ws) => ws
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != T::zero())
            .map(|(i, &w)| w * log_density(data, i, &theta, covariates))
            .sum(),
        None => rows.iter().map(|i| log_density(data, i, &theta, covariates)).sum(),
    };
    MleFit {
        theta,
        loglik,
        iterations: 0,
        converged: true,
        degenerate,
    }
}

/// Maximized log-likelihood of each prefix `order[..m]`, `m = 1..=len`,
/// from running sufficient statistics. Entries below `min_len` rows or with
/// a floored σ are `None`.
pub fn prefix_max_loglik<T: Real>(
    data: &Dataset<T>,
    order: &[usize],
    covariates: bool,
    min_len: usize,
    sigma_floor: T,
) -> Vec<Option<T>> {
    let q = if covariates { data.p() + 1 } else { 1 };
    let mut out = Vec::with_capacity(order.len());
    let half_log_tau = T::lit(0.5) * (T::TAU()).ln();
    let half = T::lit(0.5);
    if !covariates {
        // Welford keeps the residual sum of squares accurate for large means.
        let (mut mean, mut m2) = (T::zero(), T::zero());
        for (m, &i) in order.iter().enumerate() {
            let cnt = T::from_usize_lossy(m + 1);
            let y = data.y(i);
            let delta = y - mean;
            mean += delta / cnt;
            m2 += delta * (y - mean);
            out.push(profile(m + 1, min_len, m2, cnt, sigma_floor, half_log_tau, half));
        }
        return out;
    }
    let mut xtx = Matrix::zeros(q);
    let mut xty = vec![T::zero(); q];
    let mut yty = T::zero();
    let mut x = vec![T::zero(); q];
    for (m, &i) in order.iter().enumerate() {
        for_each_design(data, i, true, |j, v| x[j] = v);
        let y = data.y(i);
        xtx.add_outer(&x, T::one());
        for j in 0..q {
            xty[j] += x[j] * y;
        }
        yty += y * y;
        if m + 1 < min_len.max(q + 1) {
            out.push(None);
            continue;
        }
        let entry = xtx.cholesky().and_then(|ch| {
            let beta = ch.solve(&xty);
            let fitted: T = beta.iter().zip(&xty).map(|(&b, &v)| b * v).sum();
            let rss = (yty - fitted).max(T::zero());
            profile(m + 1, min_len, rss, T::from_usize_lossy(m + 1), sigma_floor, half_log_tau, half)
        });
        out.push(entry);
    }
    out
}

fn profile<T: Real>(m: usize, min_len: usize, rss: T, cnt: T, floor: T, half_log_tau: T, half: T) -> Option<T> {
    if m < min_len {
        return None;
    }
    let var = rss / cnt;
    if !(var.sqrt() >= floor) {
        return None;
    }
    Some(-cnt * (half_log_tau + half * var.ln() + half))
}
