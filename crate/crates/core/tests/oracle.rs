// SPDX-License-Identifier: MIT OR Apache-2.0

use maxem::oracle::{brute_force, brute_force_cached, count_segmentations, SegmentFitCache};
use maxem::{BruteForceOptions, Dataset, Error, FitOptions, Model, ResponseKind};

fn levels() -> Dataset {
    let y = vec![0.05, -0.1, 0.02, 5.1, 4.95, 5.0, 10.1, 9.9, 10.05, 9.95];
    Dataset::new(ResponseKind::Continuous, y, vec![]).unwrap()
}

#[test]
fn recovers_constructed_levels() {
    let fit = brute_force(&Model::Mean, &levels(), 3, &BruteForceOptions::default()).unwrap();
    assert_eq!(fit.segmentation.breakpoints(), &[3, 6]);
    assert!((fit.thetas[1][0] - 5.016666666666667).abs() < 1e-9);
}

#[test]
fn exhaustive_count_by_hand() {
    // C(9, 2) for n = 10, K = 3.
    assert_eq!(count_segmentations(10, 3, 1), 36);
    assert_eq!(count_segmentations(10, 2, 1), 9);
    assert_eq!(count_segmentations(10, 3, 3), 3);
}

#[test]
fn guard_refuses_large_problems() {
    let opts = BruteForceOptions {
        guard: 10,
        ..Default::default()
    };
    match brute_force(&Model::Mean, &levels(), 3, &opts) {
        Err(Error::GuardExceeded { count, guard }) => assert_eq!((count, guard), (36, 10)),
        other => panic!("expected guard error, got {other:?}"),
    }
}

#[test]
fn cache_fits_each_interval_once() {
    let data = levels();
    let cache = SegmentFitCache::new(&Model::Mean, &data, FitOptions::default());
    brute_force_cached(&cache, 2, &BruteForceOptions::default()).unwrap();
    assert_eq!(cache.misses(), 2 * 9);
    let before = cache.misses();
    brute_force_cached(&cache, 2, &BruteForceOptions::default()).unwrap();
    assert_eq!(cache.misses(), before);
    assert!(cache.hits() > 0);
}

#[test]
fn loglik_is_monotone_in_k() {
    let data = levels();
    let cache = SegmentFitCache::new(&Model::Mean, &data, FitOptions::default());
    let opts = BruteForceOptions::default();
    let ll: Vec<f64> = (2..=4).map(|k| brute_force_cached(&cache, k, &opts).unwrap().loglik).collect();
    assert!(ll.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{ll:?}");
}

#[test]
fn covariate_relabeling_permutes_coefficients() {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..24 {
        let (a, b) = ((i * 7 % 11) as f64 / 11.0, (i * 5 % 13) as f64 / 13.0);
        let shift = if i < 12 { 0.0 } else { 4.0 };
        y.push(1.0 + shift + 2.0 * a - b + 0.1 * ((i * 3 % 7) as f64 - 3.0));
        rows.push(vec![a, b]);
    }
    let data = Dataset::new(ResponseKind::Continuous, y, rows).unwrap();
    let swapped = data.with_permuted_covariates(&[1, 0]);
    let opts = BruteForceOptions::default();
    let a = brute_force(&Model::Linear, &data, 2, &opts).unwrap();
    let b = brute_force(&Model::Linear, &swapped, 2, &opts).unwrap();
    assert_eq!(a.segmentation, b.segmentation);
    for (ta, tb) in a.thetas.iter().zip(&b.thetas) {
        assert!((ta[1] - tb[2]).abs() < 1e-8 && (ta[2] - tb[1]).abs() < 1e-8);
    }
}
