// SPDX-License-Identifier: MIT OR Apache-2.0

//! Choice of the number of segments by BIC.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::init::{candidate_pool, combination_search, CandidatePool, InitMethod, PipelineOptions};
use crate::maxem::SegmentedFit;
use crate::models::EmissionModel;
use crate::real::Real;

/// `−2ℓ + d·K·ln n`.
pub fn bic<T: Real>(loglik: T, d: usize, k: usize, n: usize) -> T {
    -T::lit(2.0) * loglik + T::from_usize_lossy(d * k) * T::from_usize_lossy(n).ln()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KFit<T> {
    pub k: usize,
    pub fit: SegmentedFit<T>,
    pub bic: T,
    pub pool: Option<CandidatePool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelectionReport<T> {
    pub fits: Vec<KFit<T>>,
    pub chosen_k: usize,
}

impl<T: Real> SelectionReport<T> {
    pub fn chosen(&self) -> &KFit<T> {
        self.fits.iter().find(|f| f.k == self.chosen_k).expect("chosen k is present")
    }
}

/// Runs the full pipeline for every `K` in `k_range` and keeps the BIC
/// minimizer (ties to the smaller `K`).
pub fn select_k<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    k_range: RangeInclusive<usize>,
    method: &InitMethod,
    opts: &PipelineOptions<T>,
) -> Result<SelectionReport<T>> {
    model.check_data(data)?;
    let n = data.n();
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo == 0 || lo > hi || hi > n {
        return Err(Error::invalid(format!("segment range {lo}..={hi} must lie within 1..={n}")));
    }
    let d = model.dim(data.p());
    // The binary segmentation pool does not depend on K.
    let shared = match method {
        InitMethod::Bs if hi > 1 => Some(candidate_pool(model, data, hi, method, opts)?),
        _ => None,
    };
    let fits: Vec<Result<KFit<T>>> = (lo..=hi)
        .into_par_iter()
        .map(|k| {
            let pool = match (&shared, k) {
                (_, 1) => None,
                (Some(p), _) => Some(p.clone()),
                (None, _) => Some(candidate_pool(model, data, k, method, opts)?),
            };
            let empty = CandidatePool::given(n, &[])?;
            let fit = combination_search(model, data, k, pool.as_ref().unwrap_or(&empty), &opts.maxem)?;
            Ok(KFit {
                k,
                bic: bic(fit.loglik, d, k, n),
                fit,
                pool,
            })
        })
        .collect();
    let fits = fits.into_iter().collect::<Result<Vec<_>>>()?;
    let chosen_k = fits
        .iter()
        .fold(None::<&KFit<T>>, |best, f| match best {
            Some(b) if b.bic <= f.bic => Some(b),
            _ => Some(f),
        })
        .expect("non-empty range")
        .k;
    Ok(SelectionReport { fits, chosen_k })
}
