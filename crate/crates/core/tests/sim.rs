// SPDX-License-Identifier: MIT OR Apache-2.0

use maxem::sim::{evaluate, run_replicates, Estimate, Method};
use maxem::{Error, Model, PipelineOptions, Scenario, Segmentation};

#[test]
fn mean_segments_match_the_truth() {
    let sc = Scenario::preset("mean-1bp").unwrap();
    let sim = sc.generate(42).unwrap();
    let y = sim.data.response();
    for (k, seg) in sim.truth.segments().enumerate() {
        let m = y[seg.clone()].iter().sum::<f64>() / seg.len() as f64;
        let target = sc.segments[k].coefficients[0];
        assert!((m - target).abs() < 3.0 * 3.0 / (seg.len() as f64).sqrt(), "segment {k}: {m}");
    }
}

#[test]
fn bernoulli_covariates_are_fair() {
    let sc = Scenario::preset("logistic-1bp").unwrap();
    let data = sc.generate(3).unwrap().data;
    let mean = (0..data.n()).map(|i| data.row(i)[0]).sum::<f64>() / data.n() as f64;
    assert!((mean - 0.5).abs() < 3.0 * 0.5 / (data.n() as f64).sqrt());
    assert!((0..data.n()).all(|i| data.row(i)[0] == 0.0 || data.row(i)[0] == 1.0));
}

/// Expected censored fraction for the first segment of the AFT scenario,
/// by quadrature over the covariates and the latent exponential.
fn censoring_oracle(b: &[f64], sigma: f64, rate: f64) -> f64 {
    let grid = 60;
    let mut total = 0.0;
    for a in 0..grid {
        for c in 0..grid {
            let (x1, x2) = ((a as f64 + 0.5) / grid as f64, (c as f64 + 0.5) / grid as f64);
            let eta = b[0] + b[1] * x1 + b[2] * x2;
            // P(C < Y | x) = 1 − E[exp(−rate · Y)], Y = exp(eta) E^σ.
            let m = 4000;
            let h = 40.0 / m as f64;
            let mut survive = 0.0;
            for j in 0..m {
                let e = (j as f64 + 0.5) * h;
                survive += (-e).exp() * (-rate * eta.exp() * e.powf(sigma)).exp() * h;
            }
            total += 1.0 - survive;
        }
    }
    total / (grid * grid) as f64
}

#[test]
fn censoring_fraction_matches_quadrature() {
    let mut sc = Scenario::preset("aft-1bp").unwrap();
    sc.breakpoints = vec![];
    sc.segments.truncate(1);
    let spec = &sc.segments[0];
    let expected = censoring_oracle(&spec.coefficients, spec.scale.unwrap(), sc.censoring_rate.unwrap());
    let mut censored = 0;
    for seed in 0..20 {
        let data = sc.generate(seed).unwrap().data;
        censored += (0..data.n()).filter(|&i| !data.event(i)).count();
    }
    let frac = censored as f64 / 20_000.0;
    assert!((frac - expected).abs() < 0.015, "{frac} vs {expected}");
}

#[test]
fn replicates_are_reproducible() {
    let sc = Scenario::preset("mean-1bp").unwrap();
    let a = sc.generate_replicate(5, 3).unwrap();
    let b = sc.generate_replicate(5, 3).unwrap();
    assert_eq!(a.data, b.data);
    assert_ne!(a.data, sc.generate_replicate(5, 4).unwrap().data);
}

#[test]
fn metrics_by_hand() {
    let sc = Scenario::preset("mean-1bp").unwrap();
    let est = |bp: usize, m1: f64, m2: f64| Estimate {
        segmentation: Segmentation::new(500, vec![bp]).unwrap(),
        thetas: vec![vec![m1, 3f64.ln()], vec![m2, 3f64.ln()]],
        loglik: 0.0,
    };
    let report = evaluate(&sc, &[est(345, 11.0, 12.0), est(355, 9.0, 12.0)]);
    // Squared errors 1 and 1 over K·J = 4 entries.
    assert!((report.mse - 0.5).abs() < 1e-12);
    assert!((report.bias2 - 0.0).abs() < 1e-12);
    assert!((report.var - 0.5).abs() < 1e-12);
    assert!((report.mape - (0.1 + 0.1) / 4.0).abs() < 1e-12);
    assert!((report.acce - 10.0 / 1000.0).abs() < 1e-12);
    assert!(report.sigma_mse.unwrap().abs() < 1e-12);
    assert_eq!(report.j, 2);
}

#[test]
fn scenario_toml_round_trip() {
    for name in Scenario::preset_names() {
        let sc = Scenario::preset(name).unwrap();
        let back = Scenario::from_toml_str(&sc.to_toml_string()).unwrap();
        assert_eq!(back, sc);
    }
    assert!(Scenario::from_toml_str("name = 'x'\nmodel = 'mean'\nbogus = 1").is_err());
    assert!(matches!(Scenario::preset("unknown"), Err(Error::UnknownPreset { .. })));
}

#[test]
fn brute_and_maxem_runs_agree_on_the_mean_preset() {
    let sc = Scenario::preset("mean-1bp").unwrap();
    let opts = PipelineOptions::default();
    let a = run_replicates(&sc, 8, Method::MaxemBs, 1, &opts).unwrap();
    let b = run_replicates(&sc, 8, Method::Brute, 1, &opts).unwrap();
    for (x, y) in a.estimates.iter().zip(&b.estimates) {
        assert_eq!(x.segmentation, y.segmentation);
    }
    assert_eq!(a.metrics.j, 8);
    assert_eq!(sc.model, Model::Mean);
}

#[test]
fn mse_splits_into_bias_and_variance() {
    let sc = Scenario::preset("linear-1bp").unwrap();
    let opts = PipelineOptions::default();
    let run = run_replicates(&sc, 5, Method::MaxemBs, 17, &opts).unwrap();
    let m = &run.metrics;
    assert!((m.mse - m.bias2 - m.var).abs() < 1e-8);
    let single = evaluate(&sc, &run.estimates[..1]);
    assert_eq!(single.var, 0.0);
    assert!((single.mse - single.bias2).abs() < 1e-12);
}

#[test]
fn exact_estimates_score_zero() {
    let sc = Scenario::preset("aft-1bp").unwrap();
    let est = Estimate {
        segmentation: Segmentation::new(sc.n, sc.breakpoints.clone()).unwrap(),
        thetas: (0..2).map(|k| sc.true_theta(k)).collect(),
        loglik: 0.0,
    };
    let m = evaluate(&sc, &[est.clone(), est]);
    assert!(m.mse.abs() < 1e-24 && m.bias2.abs() < 1e-24 && m.var.abs() < 1e-24);
    assert_eq!((m.mape, m.acce), (0.0, 0.0));
}
