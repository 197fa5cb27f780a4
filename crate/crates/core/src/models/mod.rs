// SPDX-License-Identifier: MIT OR Apache-2.0

//! Per-observation emission models with scores, Hessians and maximum
//! likelihood fits on observation subsets.

pub mod aft;
pub mod gaussian;
pub mod logistic;
pub mod poisson;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ResponseKind, Rows};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::real::Real;

/// Observations entering a fit: a plain subset, or per-row weights over the
/// whole sample.
#[derive(Clone, Debug)]
pub enum Obs<'a, T> {
    Rows(Rows<'a>),
    Weighted(&'a [T]),
}

impl<T: Real> Obs<'_, T> {
    #[inline]
    pub fn for_each(&self, mut f: impl FnMut(usize, T)) {
        match self {
            Obs::Rows(rows) => rows.iter().for_each(|i| f(i, T::one())),
            Obs::Weighted(ws) => ws.iter().enumerate().filter(|(_, &w)| w != T::zero()).for_each(|(i, &w)| f(i, w)),
        }
    }

    pub fn total_weight(&self) -> T {
        match self {
            Obs::Rows(rows) => T::from_usize_lossy(rows.len()),
            Obs::Weighted(ws) => ws.iter().copied().sum(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitOptions<T> {
    pub max_iter: usize,
    /// Gradient tolerance, scaled by the number of observations.
    pub grad_tol: T,
    pub max_halvings: usize,
    /// Penalty `ridge · ‖β‖²` subtracted from the objective (scale
    /// coordinates are not penalized).
    pub ridge: T,
    /// Ridge used when the unpenalized fit is degenerate.
    pub fallback_ridge: T,
    pub sigma_floor: T,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        FitOptions {
            max_iter: 100,
            grad_tol: T::default_tol(),
            max_halvings: 30,
            ridge: T::zero(),
            fallback_ridge: T::lit(1e-4),
            sigma_floor: T::lit(1e-8),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MleFit<T> {
    pub theta: Vec<T>,
    /// Unpenalized log-likelihood at `theta`.
    pub loglik: T,
    pub iterations: usize,
    pub converged: bool,
    /// Too few observations, singular design, σ floor, divergence, ridge
    /// fallback or non-convergence.
    pub degenerate: bool,
}

/// A parametric family `e_i(θ)` evaluated observation by observation.
pub trait EmissionModel<T: Real>: Send + Sync {
    fn name(&self) -> &'static str;

    fn response_kind(&self) -> ResponseKind;

    /// Parameter dimension for `p` covariates.
    fn dim(&self, p: usize) -> usize;

    /// Index of the `log σ` coordinate, if any.
    fn scale_index(&self, p: usize) -> Option<usize>;

    fn log_density(&self, data: &Dataset<T>, i: usize, theta: &[T]) -> T;

    /// Adds `w · ∂/∂θ log e_i` into `out`.
    fn add_score(&self, data: &Dataset<T>, i: usize, theta: &[T], w: T, out: &mut [T]);

    /// Adds `w · ∂²/∂θ∂θᵀ log e_i` into `acc`.
    fn add_hessian(&self, data: &Dataset<T>, i: usize, theta: &[T], w: T, acc: &mut Matrix<T>);

    fn initial_theta(&self, data: &Dataset<T>, obs: &Obs<'_, T>) -> Vec<T>;

    /// Coefficients beyond this magnitude are treated as a diverging fit.
    fn divergence_bound(&self) -> T {
        T::lit(1e3)
    }

    /// Maximizes `Σ w_i log e_i(θ)`, from `start` when given.
    fn fit(&self, data: &Dataset<T>, obs: &Obs<'_, T>, start: Option<&[T]>, opts: &FitOptions<T>) -> MleFit<T> {
        newton_fit(self, data, obs, start, opts)
    }

    /// Whether small segments are fitted exactly (closed form), so that
    /// brute force is trustworthy down to `dim` observations.
    fn exact_small_sample(&self) -> bool {
        false
    }

    /// Maximized log-likelihood of every prefix of `order`; `None` when the
    /// model has no incremental form.
    fn prefix_max_loglik(&self, _data: &Dataset<T>, _order: &[usize], _min_len: usize) -> Option<Vec<Option<T>>> {
        None
    }

    fn check_data(&self, data: &Dataset<T>) -> Result<()> {
        if data.kind() != self.response_kind() {
            return Err(Error::invalid(format!(
                "model `{}` expects a {:?} response, dataset holds {:?}",
                self.name(),
                self.response_kind(),
                data.kind()
            )));
        }
        Ok(())
    }

    fn score(&self, data: &Dataset<T>, i: usize, theta: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); theta.len()];
        self.add_score(data, i, theta, T::one(), &mut out);
        out
    }

    fn hessian(&self, data: &Dataset<T>, i: usize, theta: &[T]) -> Matrix<T> {
        let mut acc = Matrix::zeros(theta.len());
        self.add_hessian(data, i, theta, T::one(), &mut acc);
        acc
    }

    fn loglik(&self, data: &Dataset<T>, rows: Rows<'_>, theta: &[T]) -> T {
        rows.iter().map(|i| self.log_density(data, i, theta)).sum()
    }

    fn hessian_sum(&self, data: &Dataset<T>, rows: Rows<'_>, theta: &[T]) -> Matrix<T> {
        let mut acc = Matrix::zeros(theta.len());
        rows.iter().for_each(|i| self.add_hessian(data, i, theta, T::one(), &mut acc));
        acc
    }

    fn fit_mle(&self, data: &Dataset<T>, rows: Rows<'_>, opts: &FitOptions<T>) -> MleFit<T> {
        self.fit(data, &Obs::Rows(rows), None, opts)
    }

    fn fit_mle_from(&self, data: &Dataset<T>, rows: Rows<'_>, start: &[T], opts: &FitOptions<T>) -> MleFit<T> {
        self.fit(data, &Obs::Rows(rows), Some(start), opts)
    }

    fn fit_weighted(&self, data: &Dataset<T>, weights: &[T], opts: &FitOptions<T>) -> MleFit<T> {
        self.fit(data, &Obs::Weighted(weights), None, opts)
    }
}

fn penalized<T: Real>(theta: &[T], ridge: T, scale: Option<usize>) -> T {
    if ridge == T::zero() {
        return T::zero();
    }
    theta
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != scale)
        .map(|(_, &t)| t * t)
        .sum::<T>()
        * ridge
}

fn objective<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    obs: &Obs<'_, T>,
    theta: &[T],
    ridge: T,
    scale: Option<usize>,
) -> (T, T) {
    let mut ll = T::zero();
    obs.for_each(|i, w| ll += w * model.log_density(data, i, theta));
    let pen = ll - penalized(theta, ridge, scale);
    (if pen.is_nan() { T::neg_infinity() } else { pen }, ll)
}

/// Damped Newton ascent with step halving. Falls back to a ridge-penalized
/// fit, flagged degenerate, when the plain fit diverges or the sample is
/// too small.
pub fn newton_fit<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    obs: &Obs<'_, T>,
    start: Option<&[T]>,
    opts: &FitOptions<T>,
) -> MleFit<T> {
    let d = model.dim(data.p());
    let start = match start {
        Some(s) if s.len() == d && s.iter().all(|v| v.is_finite()) => s.to_vec(),
        _ => model.initial_theta(data, obs),
    };
    let too_small = obs.total_weight() < T::from_usize_lossy(d);
    let ridge = if too_small && opts.ridge == T::zero() { opts.fallback_ridge } else { opts.ridge };
    let mut fit = newton_run(model, data, obs, start.clone(), ridge, opts);
    fit.degenerate |= too_small;
    let bound = model.divergence_bound();
    let diverged = |f: &MleFit<T>| !f.loglik.is_finite() || f.theta.iter().any(|t| !(t.abs() <= bound));
    if diverged(&fit) && ridge == T::zero() {
        fit = newton_run(model, data, obs, model.initial_theta(data, obs), opts.fallback_ridge, opts);
        fit.degenerate = true;
    }
    if let Some(s) = model.scale_index(data.p()) {
        let floor = opts.sigma_floor.ln();
        if !(fit.theta[s] >= floor) {
            fit.theta[s] = floor;
            fit.loglik = objective(model, data, obs, &fit.theta, T::zero(), None).1;
            fit.degenerate = true;
        }
    }
    fit
}

fn newton_run<T: Real, M: EmissionModel<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    obs: &Obs<'_, T>,
    mut theta: Vec<T>,
    ridge: T,
    opts: &FitOptions<T>,
) -> MleFit<T> {
    let d = theta.len();
    let scale = model.scale_index(data.p());
    let tol = opts.grad_tol * obs.total_weight().max(T::one());
    let (mut f, mut ll) = objective(model, data, obs, &theta, ridge, scale);
    let mut grad = vec![T::zero(); d];
    let mut hess = Matrix::zeros(d);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        grad.iter_mut().for_each(|g| *g = T::zero());
        hess.fill_zero();
        obs.for_each(|i, w| {
            model.add_score(data, i, &theta, w, &mut grad);
            model.add_hessian(data, i, &theta, w, &mut hess);
        });
        if ridge > T::zero() {
            for j in (0..d).filter(|&j| Some(j) != scale) {
                grad[j] -= T::lit(2.0) * ridge * theta[j];
                hess[(j, j)] -= T::lit(2.0) * ridge;
            }
        }
        let gmax = grad.iter().fold(T::zero(), |m, g| m.max(g.abs()));
        if !gmax.is_finite() {
            break;
        }
        if gmax <= tol {
            converged = true;
            break;
        }
        iterations += 1;
        hess.scale(-T::one());
        let slack = T::epsilon() * T::lit(16.0) * (T::one() + f.abs());
        let mut damping = T::zero();
        let mut stepped = false;
        for _ in 0..12 {
            let mut a = hess.clone();
            a.add_diagonal(damping);
            let Some(ch) = a.cholesky() else {
                damping = next_damping(damping, &hess);
                continue;
            };
            let delta = ch.solve(&grad);
            let mut t = T::one();
            for _ in 0..=opts.max_halvings {
                let cand: Vec<T> = theta.iter().zip(&delta).map(|(&a, &b)| a + t * b).collect();
                let (fc, llc) = objective(model, data, obs, &cand, ridge, scale);
                if fc >= f - slack {
                    let gained = fc > f;
                    theta = cand;
                    f = fc;
                    ll = llc;
                    stepped = gained || t == T::one();
                    break;
                }
                t *= T::lit(0.5);
            }
            if stepped {
                break;
            }
            damping = next_damping(damping, &hess);
        }
        if !stepped {
            break;
        }
    }
    MleFit {
        theta,
        loglik: ll,
        iterations,
        converged,
        degenerate: !converged,
    }
}

fn next_damping<T: Real>(damping: T, hess: &Matrix<T>) -> T {
    if damping == T::zero() {
        T::lit(1e-6) * (T::one() + hess.max_abs())
    } else {
        damping * T::lit(10.0)
    }
}

/// The built-in families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Normal with per-segment mean and variance; covariates ignored.
    Mean,
    /// Normal linear regression.
    Linear,
    Logistic,
    Poisson,
    /// Weibull accelerated failure time with right censoring.
    #[serde(rename = "aft")]
    WeibullAft,
}

impl Model {
    pub const ALL: [Model; 5] = [Model::Mean, Model::Linear, Model::Logistic, Model::Poisson, Model::WeibullAft];

    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Mean => "mean",
            Model::Linear => "linear",
            Model::Logistic => "logistic",
            Model::Poisson => "poisson",
            Model::WeibullAft => "aft",
        }
    }

    /// Parameters compared against the truth in simulations: regression
    /// coefficients, plus the scale for the survival model.
    pub fn reported<T: Real>(&self, theta: &[T]) -> Vec<T> {
        let d = theta.len();
        match self {
            Model::Mean => vec![theta[0]],
            Model::Linear => theta[..d - 1].to_vec(),
            Model::Logistic | Model::Poisson => theta.to_vec(),
            Model::WeibullAft => {
                let mut v = theta[..d - 1].to_vec();
                v.push(theta[d - 1].exp());
                v
            }
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(Model::Mean),
            "linear" => Ok(Model::Linear),
            "logistic" => Ok(Model::Logistic),
            "poisson" => Ok(Model::Poisson),
            "aft" | "weibull-aft" | "weibull_aft" | "survival" => Ok(Model::WeibullAft),
            other => Err(Error::invalid(format!(
                "unknown model `{other}` (expected mean, linear, logistic, poisson or aft)"
            ))),
        }
    }
}

fn weighted_mean<T: Real>(data: &Dataset<T>, obs: &Obs<'_, T>, f: impl Fn(T) -> T) -> T {
    let (mut s, mut w) = (T::zero(), T::zero());
    obs.for_each(|i, wi| {
        s += wi * f(data.y(i));
        w += wi;
    });
    if w > T::zero() {
        s / w
    } else {
        T::zero()
    }
}

impl<T: Real> EmissionModel<T> for Model {
    fn name(&self) -> &'static str {
        self.as_str()
    }

    fn response_kind(&self) -> ResponseKind {
        match self {
            Model::Mean | Model::Linear => ResponseKind::Continuous,
            Model::Logistic => ResponseKind::Binary,
            Model::Poisson => ResponseKind::Count,
            Model::WeibullAft => ResponseKind::CensoredTime,
        }
    }

    fn dim(&self, p: usize) -> usize {
        match self {
            Model::Mean => 2,
            Model::Linear | Model::WeibullAft => p + 2,
            Model::Logistic | Model::Poisson => p + 1,
        }
    }

    fn scale_index(&self, p: usize) -> Option<usize> {
        match self {
            Model::Mean => Some(1),
            Model::Linear | Model::WeibullAft => Some(p + 1),
            Model::Logistic | Model::Poisson => None,
        }
    }

    #[inline]
    fn log_density(&self, data: &Dataset<T>, i: usize, theta: &[T]) -> T {
        match self {
            Model::Mean => gaussian::log_density(data, i, theta, false),
            Model::Linear => gaussian::log_density(data, i, theta, true),
            Model::Logistic => logistic::log_density(data, i, theta),
            Model::Poisson => poisson::log_density(data, i, theta),
            Model::WeibullAft => aft::log_density(data, i, theta),
        }
    }

    fn add_score(&self, data: &Dataset<T>, i: usize, theta: &[T], w: T, out: &mut [T]) {
        match self {
            Model::Mean => gaussian::add_score(data, i, theta, false, w, out),
            Model::Linear => gaussian::add_score(data, i, theta, true, w, out),
            Model::Logistic => logistic::add_score(data, i, theta, w, out),
            Model::Poisson => poisson::add_score(data, i, theta, w, out),
            Model::WeibullAft => aft::add_score(data, i, theta, w, out),
        }
    }

    fn add_hessian(&self, data: &Dataset<T>, i: usize, theta: &[T], w: T, acc: &mut Matrix<T>) {
        match self {
            Model::Mean => gaussian::add_hessian(data, i, theta, false, w, acc),
            Model::Linear => gaussian::add_hessian(data, i, theta, true, w, acc),
            Model::Logistic => logistic::add_hessian(data, i, theta, w, acc),
            Model::Poisson => poisson::add_hessian(data, i, theta, w, acc),
            Model::WeibullAft => aft::add_hessian(data, i, theta, w, acc),
        }
    }

    fn initial_theta(&self, data: &Dataset<T>, obs: &Obs<'_, T>) -> Vec<T> {
        let d = <Model as EmissionModel<T>>::dim(self, data.p());
        let mut theta = vec![T::zero(); d];
        match self {
            Model::Mean | Model::Linear => {
                return gaussian::fit(data, &rows_of(obs), weights_of(obs), *self == Model::Linear, &FitOptions::default())
                    .theta
            }
            Model::Logistic => {
                let m = weighted_mean(data, obs, |y| y).max(T::lit(0.01)).min(T::lit(0.99));
                theta[0] = (m / (T::one() - m)).ln();
            }
            Model::Poisson => {
                theta[0] = weighted_mean(data, obs, |y| y).max(T::lit(1e-3)).ln();
            }
            Model::WeibullAft => {
                let ls = gaussian::fit(data, &rows_of(obs), weights_of(obs), true, &FitOptions::default());
                // The log-time least squares fit transferred to the extreme-value scale.
                let sigma = ls.theta[d - 1].exp() * T::lit(6.0).sqrt() / T::PI();
                theta[..d - 1].copy_from_slice(&ls.theta[..d - 1]);
                theta[0] += sigma * T::lit(0.577_215_664_901_532_9);
                theta[d - 1] = sigma.max(T::lit(1e-2)).ln();
                if !theta.iter().all(|t| t.is_finite()) {
                    theta = vec![T::zero(); d];
                }
            }
        }
        theta
    }

    fn divergence_bound(&self) -> T {
        match self {
            Model::Logistic | Model::Poisson => T::lit(15.0),
            _ => T::lit(1e3),
        }
    }

    fn fit(&self, data: &Dataset<T>, obs: &Obs<'_, T>, start: Option<&[T]>, opts: &FitOptions<T>) -> MleFit<T> {
        match self {
            Model::Mean | Model::Linear => {
                gaussian::fit(data, &rows_of(obs), weights_of(obs), *self == Model::Linear, opts)
            }
            _ => newton_fit(self, data, obs, start, opts),
        }
    }

    fn exact_small_sample(&self) -> bool {
        matches!(self, Model::Mean | Model::Linear)
    }

    fn prefix_max_loglik(&self, data: &Dataset<T>, order: &[usize], min_len: usize) -> Option<Vec<Option<T>>> {
        let floor = FitOptions::<T>::default().sigma_floor;
        match self {
            Model::Mean => Some(gaussian::prefix_max_loglik(data, order, false, min_len, floor)),
            Model::Linear => Some(gaussian::prefix_max_loglik(data, order, true, min_len, floor)),
            _ => None,
        }
    }
}

fn rows_of<'a, T>(obs: &Obs<'a, T>) -> Rows<'a> {
    match obs {
        Obs::Rows(r) => r.clone(),
        Obs::Weighted(_) => Rows::Range(0..0),
    }
}

fn weights_of<'a, T>(obs: &Obs<'a, T>) -> Option<&'a [T]> {
    match obs {
        Obs::Rows(_) => None,
        Obs::Weighted(w) => Some(w),
    }
}
