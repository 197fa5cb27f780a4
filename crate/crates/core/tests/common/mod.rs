// SPDX-License-Identifier: MIT OR Apache-2.0

#![allow(dead_code)]

use maxem::lrtest::replicate_rng;
use maxem::sim::{CovariateLaw, Scenario, SegmentSpec};
use maxem::Model;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Breakpoints with every segment at least `min_len` long.
pub fn random_breakpoints(rng: &mut ChaCha8Rng, n: usize, k: usize, min_len: usize) -> Vec<usize> {
    let slack = n - k * min_len;
    let mut cuts: Vec<usize> = (0..k - 1).map(|_| rng.random_range(0..=slack)).collect();
    cuts.sort_unstable();
    cuts.iter().enumerate().map(|(j, &c)| c + (j + 1) * min_len).collect()
}

/// A random piecewise scenario for `model` with well separated segments.
pub fn random_scenario(rng: &mut ChaCha8Rng, model: Model, n: usize, k: usize, min_len: usize) -> Scenario {
    let breakpoints = random_breakpoints(rng, n, k, min_len);
    let mut sigma = None;
    let mut censoring_rate = None;
    let mut covariates = CovariateLaw::Uniform;
    let p = match model {
        Model::Mean => 0,
        Model::WeibullAft => 2,
        Model::Linear | Model::Logistic | Model::Poisson => 1,
    };
    let mut segments = Vec::with_capacity(k);
    let mut level = rng.random_range(-5.0..5.0);
    for _ in 0..k {
        let (coefficients, scale) = match model {
            Model::Mean => {
                level += rng.random_range(2.0..4.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                (vec![level], None)
            }
            Model::Linear => {
                level += rng.random_range(3.0..5.0);
                (vec![level, rng.random_range(-4.0..4.0)], None)
            }
            Model::Logistic => {
                covariates = CovariateLaw::Bernoulli;
                (vec![rng.random_range(-1.5..1.5), rng.random_range(-2.0..2.0)], None)
            }
            Model::Poisson => (vec![rng.random_range(0.0..2.0), rng.random_range(-1.0..1.0)], None),
            Model::WeibullAft => (
                vec![rng.random_range(0.5..2.5), rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0)],
                Some(rng.random_range(0.4..1.5)),
            ),
        };
        segments.push(SegmentSpec { coefficients, scale });
    }
    match model {
        Model::Mean | Model::Linear => sigma = Some(1.0),
        Model::WeibullAft => censoring_rate = Some(0.05),
        _ => {}
    }
    let sc = Scenario {
        name: format!("random-{model}"),
        model,
        n,
        breakpoints,
        sigma,
        num_covariates: p,
        covariates,
        censoring_rate,
        segments,
    };
    sc.validate().expect("random scenario is valid");
    sc
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    replicate_rng(seed, stream)
}

/// Central difference of `f` along coordinate `j`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], j: usize, h: f64) -> f64 {
    let mut up = x.to_vec();
    let mut dn = x.to_vec();
    up[j] += h;
    dn[j] -= h;
    (f(&up) - f(&dn)) / (2.0 * h)
}

/// Whether `MAXEM_FULL_SCALE` requests the full replicate counts.
pub fn full_scale() -> bool {
    std::env::var("MAXEM_FULL_SCALE").is_ok_and(|v| v != "0" && !v.is_empty())
}
