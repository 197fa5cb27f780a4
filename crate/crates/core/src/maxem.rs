// SPDX-License-Identifier: MIT OR Apache-2.0

//! Classification EM over the segment-label chain: alternate a MAP
//! segmentation given per-segment parameters with per-segment maximum
//! likelihood fits, until the segmentation repeats.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Segmentation};
use crate::error::{Error, Result};
use crate::hmm::{self, Chain, TransitionScheme};
use crate::models::{EmissionModel, FitOptions, MleFit};
use crate::real::Real;

#[derive(Clone, Debug)]
pub struct MaxEmOptions<T> {
    pub max_iter: usize,
    /// Stop once the log-likelihood gains less than this.
    pub tol: T,
    /// Allowed decrease before an iteration counts as non-monotone.
    pub monotone_slack: T,
    pub scheme: TransitionScheme,
    pub fit: FitOptions<T>,
}

impl<T: Real> Default for MaxEmOptions<T> {
    fn default() -> Self {
        MaxEmOptions {
            max_iter: 100,
            tol: T::lit(1e-9),
            monotone_slack: T::lit(1e-9).max(T::epsilon() * T::lit(1e3)),
            scheme: TransitionScheme::Uniform,
            fit: FitOptions::default(),
        }
    }
}

/// A segmentation with per-segment fitted parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentedFit<T> {
    pub segmentation: Segmentation,
    pub thetas: Vec<Vec<T>>,
    /// Segmented log-likelihood `Σ_k Σ_{i∈C_k} log e_i(θ_k)`.
    pub loglik: T,
    pub iterations: usize,
    pub converged: bool,
    /// Some segment fit was degenerate.
    pub degenerate: bool,
    /// Log-likelihood after the initial M-step and after every iteration.
    pub trace: Vec<T>,
    /// Some iteration lowered the log-likelihood by more than the slack.
    pub monotone_violation: bool,
    /// The iteration revisited an earlier segmentation.
    pub cycled: bool,
}

fn check<T: Real, M: EmissionModel<T> + ?Sized>(model: &M, data: &Dataset<T>, seg: &Segmentation) -> Result<()> {
    model.check_data(data)?;
    if seg.n() != data.n() {
        return Err(Error::invalid(format!(
            "segmentation covers {} rows, dataset has {}",
            seg.n(),
            data.n()
        )));
    }
    Ok(())
}

/// Fits every segment of `seg`, warm-starting from `warm` when given. A
/// warm-started fit never ends below its starting point: if the fit falls
/// back to a worse (degenerate) solution, the start is kept instead.
pub fn fit_segments<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    seg: &Segmentation,
    warm: Option<&[Vec<T>]>,
    opts: &FitOptions<T>,
) -> Vec<MleFit<T>> {
    seg.segments()
        .enumerate()
        .map(|(k, rows)| match warm.and_then(|w| w.get(k)) {
            Some(start) => {
                let fit = model.fit_mle_from(data, rows.clone().into(), start, opts);
                let at_start = model.loglik(data, rows.into(), start);
                if at_start > fit.loglik {
                    MleFit {
                        theta: start.clone(),
                        loglik: at_start,
                        iterations: fit.iterations,
                        converged: false,
                        degenerate: true,
                    }
                } else {
                    fit
                }
            }
            None => model.fit_mle(data, rows.into(), opts),
        })
        .collect()
}

/// Profile fit of a fixed segmentation.
pub fn fit_segmentation<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    seg: &Segmentation,
    opts: &FitOptions<T>,
) -> Result<SegmentedFit<T>> {
    check(model, data, seg)?;
    let fits = fit_segments(model, data, seg, None, opts);
    let loglik = fits.iter().map(|f| f.loglik).sum();
    Ok(SegmentedFit {
        segmentation: seg.clone(),
        degenerate: fits.iter().any(|f| f.degenerate),
        thetas: fits.into_iter().map(|f| f.theta).collect(),
        loglik,
        iterations: 0,
        converged: true,
        trace: vec![loglik],
        monotone_violation: false,
        cycled: false,
    })
}

/// `Σ_k Σ_{i∈C_k} log e_i(θ_k)` for given parameters.
pub fn evaluate_loglik<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    seg: &Segmentation,
    thetas: &[Vec<T>],
) -> T {
    seg.segments().zip(thetas).map(|(rows, th)| model.loglik(data, rows.into(), th)).sum()
}

/// Log emissions of every row under every segment's parameters, `n × K`
/// row-major.
pub fn emission_table<T: Real, M: EmissionModel<T> + ?Sized>(model: &M, data: &Dataset<T>, thetas: &[Vec<T>]) -> Vec<T> {
    let k = thetas.len();
    let mut table = vec![T::zero(); data.n() * k];
    let fill = |(i, row): (usize, &mut [T])| {
        for (s, cell) in row.iter_mut().enumerate() {
            let v = model.log_density(data, i, &thetas[s]);
            *cell = if v.is_nan() { T::neg_infinity() } else { v };
        }
    };
    if table.len() >= 1 << 14 {
        table.par_chunks_mut(k).enumerate().for_each(fill);
    } else {
        table.chunks_mut(k).enumerate().for_each(fill);
    }
    table
}

/// MAP segmentation for fixed per-segment parameters.
pub fn decode<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    thetas: &[Vec<T>],
    scheme: TransitionScheme,
) -> Result<Segmentation> {
    let chain = Chain::new(data.n(), thetas.len(), scheme)?;
    let table = emission_table(model, data, thetas);
    Ok(hmm::map_decode(&hmm::max_forward_backward(chain, &table)?))
}

/// Runs max-EM from `init`. On a cycle, returns the best segmentation
/// visited.
pub fn max_em<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    init: &Segmentation,
    opts: &MaxEmOptions<T>,
) -> Result<SegmentedFit<T>> {
    check(model, data, init)?;
    let k = init.num_segments();
    let chain = Chain::new(data.n(), k, opts.scheme)?;

    let mut seg = init.clone();
    let mut fits = fit_segments(model, data, &seg, None, &opts.fit);
    let mut ll: T = fits.iter().map(|f| f.loglik).sum();
    let mut trace = vec![ll];
    let mut history = vec![seg.clone()];
    let mut best = (ll, seg.clone(), fits.clone());
    let mut violation = false;
    let mut cycled = false;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let thetas: Vec<Vec<T>> = fits.iter().map(|f| f.theta.clone()).collect();
        let table = emission_table(model, data, &thetas);
        let next = hmm::map_decode(&hmm::max_forward_backward(chain, &table)?);
        if next == seg {
            converged = true;
            break;
        }
        let next_fits = fit_segments(model, data, &next, Some(&thetas), &opts.fit);
        let next_ll: T = next_fits.iter().map(|f| f.loglik).sum();
        trace.push(next_ll);
        if next_ll < ll - opts.monotone_slack {
            violation = true;
            log::debug!("max-EM decreased log-likelihood {ll} -> {next_ll} at iteration {iterations}");
        }
        if history.contains(&next) {
            cycled = true;
            converged = true;
            break;
        }
        history.push(next.clone());
        let gain = next_ll - ll;
        seg = next;
        fits = next_fits;
        ll = next_ll;
        if ll > best.0 {
            best = (ll, seg.clone(), fits.clone());
        }
        if gain.abs() < opts.tol {
            converged = true;
            break;
        }
    }

    let (ll, seg, fits) = if cycled { best } else { (ll, seg, fits) };
    Ok(SegmentedFit {
        segmentation: seg,
        degenerate: fits.iter().any(|f| f.degenerate),
        thetas: fits.into_iter().map(|f| f.theta).collect(),
        loglik: ll,
        iterations,
        converged,
        trace,
        monotone_violation: violation,
        cycled,
    })
}

/// Result of soft (standard) EM on the same chain.
#[derive(Clone, Debug)]
pub struct SoftEmFit<T> {
    pub thetas: Vec<Vec<T>>,
    /// Marginal log-likelihood `log Σ_R P(R) Π e_i`.
    pub log_marginal: T,
    pub iterations: usize,
    pub converged: bool,
    /// MAP segmentation under the final parameters.
    pub segmentation: Segmentation,
}

/// Standard EM with posterior-weighted M-steps, for comparison with
/// max-EM.
pub fn standard_em<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    init: &Segmentation,
    opts: &MaxEmOptions<T>,
) -> Result<SoftEmFit<T>> {
    check(model, data, init)?;
    let (n, k) = (data.n(), init.num_segments());
    let chain = Chain::new(n, k, opts.scheme)?;
    let mut thetas: Vec<Vec<T>> =
        fit_segments(model, data, init, None, &opts.fit).into_iter().map(|f| f.theta).collect();
    let mut prev = T::neg_infinity();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let lattice = hmm::forward_backward(chain, &emission_table(model, data, &thetas))?;
        let z = lattice.total();
        let omega = hmm::posterior_weights(&lattice);
        let mut w = vec![T::zero(); n];
        for (s, theta) in thetas.iter_mut().enumerate() {
            for (i, wi) in w.iter_mut().enumerate() {
                *wi = omega[i * k + s];
            }
            *theta = model.fit_weighted(data, &w, &opts.fit).theta;
        }
        if (z - prev).abs() < opts.tol {
            converged = true;
            prev = z;
            break;
        }
        prev = z;
    }
    let segmentation = decode(model, data, &thetas, opts.scheme)?;
    Ok(SoftEmFit {
        thetas,
        log_marginal: prev,
        iterations,
        converged,
        segmentation,
    })
}
