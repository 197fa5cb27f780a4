// SPDX-License-Identifier: MIT OR Apache-2.0

//! Weibull accelerated failure time model with right censoring:
//! `log T = xᵀβ + σ ε`, `ε` with density `exp(w − e^w)`. Parameters are
//! `(β, log σ)`.

use crate::data::Dataset;
use crate::linalg::Matrix;
use crate::models::logistic::{for_each_design, linear_predictor};
use crate::real::Real;

#[inline]
fn standardized<T: Real>(data: &Dataset<T>, i: usize, theta: &[T]) -> (T, T) {
    let d = theta.len();
    let inv_sigma = (-theta[d - 1]).exp();
    let w = (data.y(i).ln() - linear_predictor(data, i, &theta[..d - 1])) * inv_sigma;
    (w, inv_sigma)
}

/// Event: `−log σ − log t + w − e^w`; censored: `−e^w`.
pub fn log_density<T: Real>(data: &Dataset<T>, i: usize, theta: &[T]) -> T {
    let (w, _) = standardized(data, i, theta);
    if data.event(i) {
        -theta[theta.len() - 1] - data.y(i).ln() + w - w.exp()
    } else {
        -w.exp()
    }
}

pub fn add_score<T: Real>(data: &Dataset<T>, i: usize, theta: &[T], wt: T, out: &mut [T]) {
    let d = theta.len();
    let (w, inv_sigma) = standardized(data, i, theta);
    let delta = if data.event(i) { T::one() } else { T::zero() };
    let g = delta - w.exp();
    for_each_design(data, i, |j, x| out[j] -= wt * x * g * inv_sigma);
    out[d - 1] += wt * (-delta - w * g);
}

pub fn add_hessian<T: Real>(data: &Dataset<T>, i: usize, theta: &[T], wt: T, acc: &mut Matrix<T>) {
    let d = theta.len();
    let (w, inv_sigma) = standardized(data, i, theta);
    let delta = if data.event(i) { T::one() } else { T::zero() };
    let ew = w.exp();
    let g = delta - ew;
    let bb = wt * ew * inv_sigma * inv_sigma;
    let bs = -wt * inv_sigma * (w * ew - g);
    for_each_design(data, i, |a, xa| {
        for_each_design(data, i, |b, xb| acc[(a, b)] -= bb * xa * xb);
        acc[(a, d - 1)] += bs * xa;
        acc[(d - 1, a)] += bs * xa;
    });
    acc[(d - 1, d - 1)] += wt * (w * g - w * w * ew);
}
