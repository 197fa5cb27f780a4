// SPDX-License-Identifier: MIT OR Apache-2.0

use maxem::select::{bic, select_k};
use maxem::{InitMethod, Model, PipelineOptions, Scenario};

#[test]
fn bic_by_hand() {
    assert!((bic(-100.0f64, 2, 3, 100) - (200.0 + 6.0 * 100f64.ln())).abs() < 1e-12);
}

#[test]
fn null_data_selects_one_segment() {
    let sc = Scenario::preset("mean-null").unwrap();
    for seed in 0..3 {
        let data = sc.generate(seed).unwrap().data;
        let report = select_k(&Model::Mean, &data, 1..=4, &InitMethod::Bs, &PipelineOptions::default()).unwrap();
        assert_eq!(report.chosen_k, 1, "seed {seed}");
        assert_eq!(report.fits.len(), 4);
    }
}

#[test]
fn two_breakpoints_are_selected() {
    let sc = Scenario::preset("linear-2bp").unwrap();
    let data = sc.generate(1).unwrap().data;
    let report = select_k(&Model::Linear, &data, 1..=4, &InitMethod::Bs, &PipelineOptions::default()).unwrap();
    assert_eq!(report.chosen_k, 3);
    let chosen = report.chosen();
    for (b, t) in chosen.fit.segmentation.breakpoints().iter().zip(&sc.breakpoints) {
        assert!(b.abs_diff(*t) <= 40, "{b} vs {t}");
    }
    let best = report.fits.iter().map(|f| f.bic).fold(f64::INFINITY, f64::min);
    assert_eq!(chosen.bic, best);
}

#[test]
#[allow(clippy::reversed_empty_ranges)]
fn rejects_bad_ranges() {
    let data = Scenario::preset("mean-null").unwrap().generate(0).unwrap().data;
    let opts = PipelineOptions::default();
    assert!(select_k(&Model::Mean, &data, 0..=2, &InitMethod::Bs, &opts).is_err());
    assert!(select_k(&Model::Mean, &data, 3..=2, &InitMethod::Bs, &opts).is_err());
}
