// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::data::Dataset;
use crate::linalg::Matrix;
use crate::models::logistic::{for_each_design, linear_predictor};
use crate::real::Real;

/// `log Γ(y + 1)`.
pub fn ln_factorial<T: Real>(y: T) -> T {
    T::lit(statrs::function::gamma::ln_gamma(y.as_f64() + 1.0))
}

/// `y η − e^η − log y!`.
pub fn log_density<T: Real>(data: &Dataset<T>, i: usize, theta: &[T]) -> T {
    let eta = linear_predictor(data, i, theta);
    let y = data.y(i);
    y * eta - eta.exp() - ln_factorial(y)
}

pub fn add_score<T: Real>(data: &Dataset<T>, i: usize, theta: &[T], w: T, out: &mut [T]) {
    let resid = data.y(i) - linear_predictor(data, i, theta).exp();
    for_each_design(data, i, |j, x| out[j] += w * x * resid);
}

pub fn add_hessian<T: Real>(data: &Dataset<T>, i: usize, theta: &[T], w: T, acc: &mut Matrix<T>) {
    let v = w * linear_predictor(data, i, theta).exp();
    for_each_design(data, i, |a, xa| for_each_design(data, i, |b, xb| acc[(a, b)] -= v * xa * xb));
}
