// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::data::Dataset;
use crate::linalg::Matrix;
use crate::real::Real;

#[inline]
pub(crate) fn linear_predictor<T: Real>(data: &Dataset<T>, i: usize, beta: &[T]) -> T {
    let mut eta = beta[0];
    for (b, &z) in beta[1..].iter().zip(data.row(i)) {
        eta += *b * z;
    }
    eta
}

#[inline]
pub(crate) fn for_each_design<T: Real>(data: &Dataset<T>, i: usize, mut f: impl FnMut(usize, T)) {
    f(0, T::one());
    for (j, &z) in data.row(i).iter().enumerate() {
        f(j + 1, z);
    }
}

/// `y η − log(1 + e^η)`.
pub fn log_density<T: Real>(data: &Dataset<T>, i: usize, theta: &[T]) -> T {
    let eta = linear_predictor(data, i, theta);
    data.y(i) * eta - eta.softplus()
}

pub fn add_score<T: Real>(data: &Dataset<T>, i: usize, theta: &[T], w: T, out: &mut [T]) {
    let resid = data.y(i) - linear_predictor(data, i, theta).sigmoid();
    for_each_design(data, i, |j, x| out[j] += w * x * resid);
}

pub fn add_hessian<T: Real>(data: &Dataset<T>, i: usize, theta: &[T], w: T, acc: &mut Matrix<T>) {
    let p = linear_predictor(data, i, theta).sigmoid();
    let v = w * p * (T::one() - p);
    for_each_design(data, i, |a, xa| for_each_design(data, i, |b, xb| acc[(a, b)] -= v * xa * xb));
}
