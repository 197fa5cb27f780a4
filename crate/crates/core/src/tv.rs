// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exact proximal operator of the 1-D total variation:
//! `argmin_x ½‖x − y‖² + λ Σ |x_{i+1} − x_i|`.
//!
//! Direct taut-string style algorithm of L. Condat (2013), linear time in
//! practice.

use crate::real::Real;

pub fn tv_prox<T: Real>(y: &[T], lambda: T) -> Vec<T> {
    let mut out = vec![T::zero(); y.len()];
    tv_prox_into(y, lambda, &mut out);
    out
}

pub fn tv_prox_into<T: Real>(input: &[T], lambda: T, output: &mut [T]) {
    let width = input.len();
    assert_eq!(width, output.len(), "output length");
    if width == 0 {
        return;
    }
    if lambda <= T::zero() || width == 1 {
        output.copy_from_slice(input);
        return;
    }
    let two_lambda = lambda + lambda;
    let min_lambda = -lambda;
    let (mut k, mut k0, mut kplus, mut kminus) = (0usize, 0usize, 0usize, 0usize);
    let mut umin = lambda;
    let mut umax = min_lambda;
    let mut vmin = input[0] - lambda;
    let mut vmax = input[0] + lambda;
    loop {
        while k == width - 1 {
            if umin < T::zero() {
                loop {
                    output[k0] = vmin;
                    k0 += 1;
                    if k0 > kminus {
                        break;
                    }
                }
                k = k0;
                kminus = k0;
                vmin = input[k0];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > T::zero() {
                loop {
                    output[k0] = vmax;
                    k0 += 1;
                    if k0 > kplus {
                        break;
                    }
                }
                k = k0;
                kplus = k0;
                vmax = input[k0];
                umax = min_lambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / T::from_usize_lossy(k - k0 + 1);
                loop {
                    output[k0] = vmin;
                    k0 += 1;
                    if k0 > k {
                        break;
                    }
                }
                return;
            }
        }
        umin += input[k + 1] - vmin;
        if umin < min_lambda {
            loop {
                output[k0] = vmin;
                k0 += 1;
                if k0 > kminus {
                    break;
                }
            }
            k = k0;
            kplus = k0;
            kminus = k0;
            vmin = input[k0];
            vmax = vmin + two_lambda;
            umin = lambda;
            umax = min_lambda;
            continue;
        }
        umax += input[k + 1] - vmax;
        if umax > lambda {
            loop {
                output[k0] = vmax;
                k0 += 1;
                if k0 > kplus {
                    break;
                }
            }
            k = k0;
            kplus = k0;
            kminus = k0;
            vmax = input[k0];
            vmin = vmax - two_lambda;
            umin = lambda;
            umax = min_lambda;
            continue;
        }
        k += 1;
        if umin >= lambda {
            kminus = k;
            vmin += (umin - lambda) / T::from_usize_lossy(kminus - k0 + 1);
            umin = lambda;
        }
        if umax <= min_lambda {
            kplus = k;
            vmax += (umax + lambda) / T::from_usize_lossy(kplus - k0 + 1);
            umax = min_lambda;
        }
    }
}

/// `Σ |x_{i+1} − x_i|`.
pub fn total_variation<T: Real>(x: &[T]) -> T {
    x.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}
