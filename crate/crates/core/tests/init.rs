// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use maxem::init::{bs_candidates, combination_search, detect, fl_candidates, FusedLassoOptions, FusedLassoPath};
use maxem::oracle::brute_force;
use maxem::tv::{total_variation, tv_prox};
use maxem::{
    BruteForceOptions, CandidatePool, Dataset, Error, InitMethod, MaxEmOptions, Model, PipelineOptions, ResponseKind,
    Scenario,
};
use proptest::prelude::*;

fn step_signal() -> Dataset {
    let mut g = common::rng(12, 0);
    let y: Vec<f64> = (0..120)
        .map(|i| {
            let level = if i < 60 { 1.0 } else { 4.0 };
            level + 0.2 * (rand::Rng::random::<f64>(&mut g) - 0.5)
        })
        .collect();
    Dataset::new(ResponseKind::Continuous, y, vec![]).unwrap()
}

#[test]
fn fused_lasso_finds_a_step() {
    let data = step_signal();
    let pool = fl_candidates(&Model::Mean, &data, 2, &FusedLassoOptions::default()).unwrap();
    assert!(pool.breakpoints.iter().any(|&b| b.abs_diff(60) <= 3), "{:?}", pool.breakpoints);
}

#[test]
fn binary_segmentation_finds_a_step() {
    let data = step_signal();
    let pool = bs_candidates(&Model::Mean, &data, 4, &MaxEmOptions::default()).unwrap();
    assert!(pool.breakpoints.contains(&60), "{:?}", pool.breakpoints);
}

#[test]
fn binary_segmentation_pool_shape() {
    let sc = Scenario::preset("linear-2bp").unwrap();
    let data = sc.generate(4).unwrap().data;
    for depth in 1..=4 {
        let pool = bs_candidates(&Model::Linear, &data, depth, &MaxEmOptions::default()).unwrap();
        assert!(!pool.is_empty() && pool.len() < 1 << depth);
        assert!(pool.breakpoints.windows(2).all(|w| w[0] < w[1]));
        assert!(pool.breakpoints.iter().all(|&b| b > 0 && b < data.n()));
    }
}

#[test]
fn fused_lasso_objective_never_increases() {
    let sc = Scenario::preset("logistic-1bp").unwrap();
    let data = sc.generate(9).unwrap().data;
    let mut path = FusedLassoPath::new(&Model::Logistic, &data);
    let lambda = path.lambda_max() * 0.05;
    let start = path.objective(lambda);
    let trace = path.solve(lambda, 200, 1e-10);
    assert!(trace[0] <= start + 1e-9);
    assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs())));
}

#[test]
fn above_lambda_max_everything_fuses() {
    let data = step_signal();
    let mut path = FusedLassoPath::new(&Model::Mean, &data);
    let lambda = path.lambda_max() * 1.01;
    path.solve(lambda, 500, 1e-12);
    assert!(path.jumps(1e-6).is_empty());
    path.solve(path.lambda_max() * 0.5, 500, 1e-12);
    assert!(!path.jumps(1e-6).is_empty());
}

#[test]
fn pool_of_given_breakpoints() {
    let data = step_signal();
    let pool = CandidatePool::given(120, &[90, 30, 60]).unwrap();
    assert_eq!(pool.breakpoints, vec![30, 60, 90]);
    let fit = combination_search(&Model::Mean, &data, 2, &pool, &MaxEmOptions::default()).unwrap();
    assert_eq!(fit.segmentation.breakpoints(), &[60]);
    assert!(CandidatePool::given(120, &[0]).is_err());
    let small = CandidatePool::given(120, &[60]).unwrap();
    assert!(matches!(
        combination_search(&Model::Mean, &data, 3, &small, &MaxEmOptions::default()),
        Err(Error::PoolTooSmall { have: 1, need: 2 })
    ));
}

#[test]
fn both_initializations_agree_with_brute_force_on_a_clear_change() {
    let sc = Scenario::preset("mean-1bp").unwrap();
    let data = sc.generate(21).unwrap().data;
    let brute = brute_force(&Model::Mean, &data, 2, &BruteForceOptions::default()).unwrap();
    for method in [InitMethod::Bs, InitMethod::Fl] {
        let (fit, _) = detect(&Model::Mean, &data, 2, &method, &PipelineOptions::default()).unwrap();
        assert!(fit.loglik <= brute.loglik + 1e-9);
        assert!(fit.segmentation.breakpoints()[0].abs_diff(brute.segmentation.breakpoints()[0]) <= 30);
    }
}

/// Optimality conditions of `½‖x − y‖² + λ TV(x)`: the running sums of
/// `y − x` stay within `±λ`, close at zero, and equal `−λ·sign(jump)` at every jump.
fn check_tv_optimality(y: &[f64], x: &[f64], lambda: f64) -> Result<(), TestCaseError> {
    let tol = 1e-8 * (1.0 + lambda);
    let mut c = 0.0;
    for j in 0..y.len() {
        c += y[j] - x[j];
        if j + 1 == y.len() {
            prop_assert!(c.abs() <= tol);
        } else {
            prop_assert!(c.abs() <= lambda + tol);
            let jump = x[j + 1] - x[j];
            if jump.abs() > 1e-9 {
                prop_assert!((c + lambda * jump.signum()).abs() <= tol);
            }
        }
    }
    Ok(())
}

proptest! {
    #[test]
    fn tv_prox_is_optimal(y in proptest::collection::vec(-10.0f64..10.0, 1..60), lambda in 0.0f64..5.0) {
        let x = tv_prox(&y, lambda);
        check_tv_optimality(&y, &x, lambda)?;
        prop_assert!(total_variation(&x) <= total_variation(&y) + 1e-9);
    }
}
