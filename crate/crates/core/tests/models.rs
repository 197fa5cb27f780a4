// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use maxem::models::EmissionModel;
use maxem::{Dataset, FitOptions, Model, ResponseKind, Rows};
use proptest::prelude::*;

fn one_row(model: Model, y: f64, event: bool, x: &[f64]) -> Dataset {
    let rows = if x.is_empty() { vec![] } else { vec![x.to_vec(), x.to_vec()] };
    match model {
        Model::WeibullAft => Dataset::censored(vec![y, y], vec![event, event], rows).unwrap(),
        _ => Dataset::new(EmissionModel::<f64>::response_kind(&model), vec![y, y], rows).unwrap(),
    }
}

#[test]
fn closed_form_densities() {
    let d = one_row(Model::Mean, 0.0, true, &[]);
    let v = Model::Mean.log_density(&d, 0, &[0.0, 0.0]);
    assert!((v + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);

    let d = one_row(Model::WeibullAft, 1.0, true, &[]);
    assert!((Model::WeibullAft.log_density(&d, 0, &[0.0, 0.0]) + 1.0).abs() < 1e-12);
    let d = one_row(Model::WeibullAft, 1.0, false, &[]);
    assert!((Model::WeibullAft.log_density(&d, 0, &[0.0, 0.0]) + 1.0).abs() < 1e-12);

    let d = one_row(Model::Logistic, 1.0, true, &[]);
    assert!((Model::Logistic.log_density(&d, 0, &[0.0]) - 0.5f64.ln()).abs() < 1e-12);

    let d = one_row(Model::Poisson, 0.0, true, &[]);
    assert!((Model::Poisson.log_density(&d, 0, &[0.0]) + 1.0).abs() < 1e-12);
}

#[test]
fn poisson_probabilities_sum_to_one() {
    for &eta in &[-1.0, 0.3, 2.0] {
        let total: f64 = (0..=200)
            .map(|y| Model::Poisson.log_density(&one_row(Model::Poisson, y as f64, true, &[]), 0, &[eta]).exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-8, "eta {eta}: {total}");
    }
}

#[test]
fn continuous_densities_integrate_to_one() {
    let trapezoid = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| {
        let m = 20_000;
        let h = (b - a) / m as f64;
        (0..=m)
            .map(|j| {
                let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                w * f(a + j as f64 * h)
            })
            .sum::<f64>()
            * h
    };
    let (mu, sigma) = (1.5f64, 0.7f64);
    let normal = |y: f64| Model::Mean.log_density(&one_row(Model::Mean, y, true, &[]), 0, &[mu, sigma.ln()]).exp();
    assert!((trapezoid(&normal, mu - 10.0 * sigma, mu + 10.0 * sigma) - 1.0).abs() < 1e-3);

    // Event density in t; integrate over log t with the Jacobian t.
    let (b0, s) = (0.4f64, 0.8f64);
    let aft = |u: f64| {
        let t = u.exp();
        Model::WeibullAft.log_density(&one_row(Model::WeibullAft, t, true, &[]), 0, &[b0, s.ln()]).exp() * t
    };
    assert!((trapezoid(&aft, b0 - 30.0 * s, b0 + 10.0 * s) - 1.0).abs() < 1e-3);
}

#[test]
fn constant_data_floors_sigma() {
    let d = Dataset::new(ResponseKind::Continuous, vec![10.0; 3], vec![]).unwrap();
    let fit = Model::Mean.fit_mle(&d, Rows::Range(0..3), &FitOptions::default());
    assert!((fit.theta[0] - 10.0).abs() < 1e-12);
    assert!((fit.theta[1] - 1e-8f64.ln()).abs() < 1e-9);
    assert!(fit.degenerate);
}

#[test]
fn exact_line_fits_exactly() {
    let xs: Vec<f64> = (0..6).map(|i| i as f64 * 0.5).collect();
    let d = Dataset::new(ResponseKind::Continuous, xs.iter().map(|x| 2.0 * x).collect(), xs.iter().map(|&x| vec![x]).collect())
        .unwrap();
    let fit = Model::Linear.fit_mle(&d, Rows::Range(0..6), &FitOptions::default());
    assert!(fit.theta[0].abs() < 1e-9 && (fit.theta[1] - 2.0).abs() < 1e-9);
    assert!(fit.degenerate);
}

#[test]
fn aft_fit_matches_grid_search() {
    let mut g = common::rng(31, 0);
    let sc = common::random_scenario(&mut g, Model::WeibullAft, 200, 1, 200);
    let mut data = sc.sample(&mut g).unwrap().data;
    data = Dataset::censored(data.response().to_vec(), vec![true; 200], vec![]).unwrap();
    let fit = Model::WeibullAft.fit_mle(&data, Rows::Range(0..200), &FitOptions::default());
    let ll = |b: f64, ls: f64| Model::WeibullAft.loglik(&data, Rows::Range(0..200), &[b, ls]);
    let step = 0.005;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for a in -400..=400 {
        for c in -200..=200 {
            let (b, ls) = (fit.theta[0] + a as f64 * step, fit.theta[1] + c as f64 * step);
            let v = ll(b, ls);
            if v > best.0 {
                best = (v, b, ls);
            }
        }
    }
    assert!((best.1 - fit.theta[0]).abs() <= step && (best.2 - fit.theta[1]).abs() <= step);
    assert!(fit.loglik >= best.0 - 1e-9);
}

#[test]
fn logistic_intercept_is_logit_of_rate() {
    let y: Vec<f64> = (0..40).map(|i| f64::from(i % 4 == 0)).collect();
    let d = Dataset::new(ResponseKind::Binary, y, vec![]).unwrap();
    let fit = Model::Logistic.fit_mle(&d, Rows::Range(0..40), &FitOptions::default());
    assert!((fit.theta[0] - (0.25f64 / 0.75).ln()).abs() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn score_matches_finite_differences(seed in 0u64..10_000, m in 0usize..5) {
        let model = Model::ALL[m];
        let mut g = common::rng(seed, 7);
        let sc = common::random_scenario(&mut g, model, 20, 1, 20);
        let data = sc.sample(&mut g).unwrap().data;
        let theta = sc.true_theta(0);
        for i in [0, 7, 19] {
            let s = model.score(&data, i, &theta);
            for (j, &sj) in s.iter().enumerate() {
                let fd = common::central_diff(|t| model.log_density(&data, i, t), &theta, j, 1e-5);
                prop_assert!((sj - fd).abs() <= 1e-6 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn mle_beats_perturbations(seed in 0u64..10_000, m in 0usize..5) {
        let model = Model::ALL[m];
        let mut g = common::rng(seed, 8);
        let sc = common::random_scenario(&mut g, model, 150, 1, 150);
        let data = sc.sample(&mut g).unwrap().data;
        let rows = || Rows::Range(0..150);
        let fit = model.fit_mle(&data, rows(), &FitOptions::default());
        prop_assume!(!fit.degenerate);
        for j in 0..fit.theta.len() {
            for h in [-1e-2, 1e-2] {
                let mut t = fit.theta.clone();
                t[j] += h;
                prop_assert!(model.loglik(&data, rows(), &t) <= fit.loglik + 1e-9);
            }
        }
    }
}
