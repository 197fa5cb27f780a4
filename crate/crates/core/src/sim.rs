// SPDX-License-Identifier: MIT OR Apache-2.0

//! Simulation scenarios, replicate runs and accuracy metrics.
//!
//! Scenarios are TOML documents:
//!
//! ```toml
//! name = "linear-1bp"
//! model = "linear"          # mean | linear | logistic | poisson | aft
//! n = 1000
//! breakpoints = [553]       # K - 1 increasing values in 1..n
//! sigma = 2.5               # error sd, mean and linear models
//! num_covariates = 2
//! covariates = "uniform"    # uniform on [0, 1] | bernoulli (p = 0.5)
//! censoring_rate = 0.1      # exponential censoring rate, aft only
//!
//! [[segments]]              # one table per segment
//! coefficients = [1.0, 11.4, 0.6]   # intercept first
//! scale = 1.7               # aft only
//! ```

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ResponseKind, Segmentation};
use crate::error::{Error, Result};
use crate::init::{detect, InitMethod, PipelineOptions};
use crate::lrtest::replicate_rng;
use crate::maxem::SegmentedFit;
use crate::models::Model;
use crate::oracle::{brute_force, BruteForceOptions};
use crate::real::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateLaw {
    #[default]
    Uniform,
    Bernoulli,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub model: Model,
    pub n: usize,
    pub breakpoints: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub num_covariates: usize,
    #[serde(default)]
    pub covariates: CovariateLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censoring_rate: Option<f64>,
    pub segments: Vec<SegmentSpec>,
}

const PRESETS: &[(&str, &str)] = &[
    ("mean-1bp", include_str!("../presets/mean-1bp.toml")),
    ("mean-5bp", include_str!("../presets/mean-5bp.toml")),
    ("mean-null", include_str!("../presets/mean-null.toml")),
    ("linear-null", include_str!("../presets/linear-null.toml")),
    ("linear-1bp", include_str!("../presets/linear-1bp.toml")),
    ("linear-2bp", include_str!("../presets/linear-2bp.toml")),
    ("linear-test-s2", include_str!("../presets/linear-test-s2.toml")),
    ("linear-test-s3", include_str!("../presets/linear-test-s3.toml")),
    ("logistic-1bp", include_str!("../presets/logistic-1bp.toml")),
    ("logistic-2bp", include_str!("../presets/logistic-2bp.toml")),
    ("logistic-test-s2", include_str!("../presets/logistic-test-s2.toml")),
    ("logistic-test-s3", include_str!("../presets/logistic-test-s3.toml")),
    ("aft-1bp", include_str!("../presets/aft-1bp.toml")),
    ("aft-2bp", include_str!("../presets/aft-2bp.toml")),
    ("aft-test-s2", include_str!("../presets/aft-test-s2.toml")),
    ("aft-test-s3", include_str!("../presets/aft-test-s3.toml")),
    ("poisson-1bp", include_str!("../presets/poisson-1bp.toml")),
];

/// A generated sample with its true segment labels.
#[derive(Clone, Debug)]
pub struct Simulated {
    pub data: Dataset<f64>,
    pub truth: Segmentation,
}

impl Scenario {
    pub fn preset_names() -> Vec<&'static str> {
        PRESETS.iter().map(|p| p.0).collect()
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS.iter().find(|p| p.0 == name).ok_or_else(|| Error::UnknownPreset {
            name: name.to_string(),
            available: Self::preset_names().join(", "),
        })?;
        Self::from_toml_str(text)
    }

    /// A bundled preset name, or else a path to a TOML file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if PRESETS.iter().any(|p| p.0 == name_or_path) || !Path::new(name_or_path).exists() {
            return Self::preset(name_or_path);
        }
        Self::load(name_or_path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn k(&self) -> usize {
        self.breakpoints.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("scenario `{}`: {m}", self.name)));
        Segmentation::new(self.n, self.breakpoints.clone()).map_err(|e| Error::Config(e.to_string()))?;
        if self.segments.len() != self.k() {
            return bad(format!("{} segments for {} breakpoints", self.segments.len(), self.breakpoints.len()));
        }
        let p = self.num_covariates;
        let want = match self.model {
            Model::Mean => 1,
            _ => p + 1,
        };
        if self.model == Model::Mean && p != 0 {
            return bad("the mean model takes no covariates".into());
        }
        for (k, s) in self.segments.iter().enumerate() {
            if s.coefficients.len() != want {
                return bad(format!("segment {} has {} coefficients, expected {want}", k + 1, s.coefficients.len()));
            }
            if s.coefficients.iter().any(|c| !c.is_finite()) {
                return bad(format!("segment {} has a non-finite coefficient", k + 1));
            }
            match (self.model, s.scale) {
                (Model::WeibullAft, Some(v)) if v > 0.0 => {}
                (Model::WeibullAft, _) => return bad(format!("segment {} needs a positive scale", k + 1)),
                (_, Some(_)) => return bad("only the aft model takes a per-segment scale".into()),
                _ => {}
            }
        }
        match (self.model, self.sigma) {
            (Model::Mean | Model::Linear, Some(s)) if s > 0.0 => {}
            (Model::Mean | Model::Linear, _) => return bad("a positive sigma is required".into()),
            (_, Some(_)) => return bad("sigma applies to the mean and linear models only".into()),
            _ => {}
        }
        match (self.model, self.censoring_rate) {
            (Model::WeibullAft, Some(r)) if r <= 0.0 => bad("censoring_rate must be positive".into()),
            (Model::WeibullAft, _) | (_, None) => Ok(()),
            (_, Some(_)) => bad("censoring applies to the aft model only".into()),
        }
    }

    /// True parameters of segment `k` in the model's own parametrization.
    pub fn true_theta(&self, k: usize) -> Vec<f64> {
        let s = &self.segments[k];
        let mut theta = s.coefficients.clone();
        match self.model {
            Model::Mean | Model::Linear => theta.push(self.sigma.expect("validated").ln()),
            Model::WeibullAft => theta.push(s.scale.expect("validated").ln()),
            Model::Logistic | Model::Poisson => {}
        }
        theta
    }

    /// True parameters as compared in the metrics (see [`Model::reported`]).
    pub fn true_reported(&self) -> Vec<Vec<f64>> {
        (0..self.k()).map(|k| self.model.reported(&self.true_theta(k))).collect()
    }

    /// One sample from `rng`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Simulated> {
        let truth = Segmentation::new(self.n, self.breakpoints.clone())?;
        let p = self.num_covariates;
        let mut rows = Vec::with_capacity(self.n);
        let mut response = Vec::with_capacity(self.n);
        let mut events = Vec::with_capacity(self.n);
        let censor = self.censoring_rate.map(|r| Exp::new(r).expect("positive rate"));
        for (k, seg) in truth.segments().enumerate() {
            let spec = &self.segments[k];
            for _ in seg {
                let z: Vec<f64> = (0..p)
                    .map(|_| match self.covariates {
                        CovariateLaw::Uniform => rng.random::<f64>(),
                        CovariateLaw::Bernoulli => f64::from(u8::from(rng.random_bool(0.5))),
                    })
                    .collect();
                let eta = spec.coefficients[0] + spec.coefficients[1..].iter().zip(&z).map(|(b, x)| b * x).sum::<f64>();
                match self.model {
                    Model::Mean | Model::Linear => {
                        let noise: f64 = Normal::new(0.0, self.sigma.expect("validated")).expect("sd > 0").sample(rng);
                        response.push(eta + noise);
                    }
                    Model::Logistic => {
                        let prob = 1.0 / (1.0 + (-eta).exp());
                        response.push(f64::from(u8::from(rng.random_bool(prob))));
                    }
                    Model::Poisson => {
                        response.push(Poisson::new(eta.exp()).map_err(|e| Error::Config(e.to_string()))?.sample(rng));
                    }
                    Model::WeibullAft => {
                        let e: f64 = Exp1.sample(rng);
                        let y = (eta + spec.scale.expect("validated") * e.ln()).exp();
                        let c = censor.map_or(f64::INFINITY, |d| d.sample(rng));
                        response.push(y.min(c).max(f64::MIN_POSITIVE));
                        events.push(y <= c);
                    }
                }
                rows.push(z);
            }
        }
        let data = match self.model {
            Model::Mean | Model::Linear => Dataset::new(ResponseKind::Continuous, response, rows)?,
            Model::Logistic => Dataset::new(ResponseKind::Binary, response, rows)?,
            Model::Poisson => Dataset::new(ResponseKind::Count, response, rows)?,
            Model::WeibullAft => Dataset::censored(response, events, rows)?,
        };
        Ok(Simulated { data, truth })
    }

    /// Deterministic sample for `seed`.
    pub fn generate(&self, seed: u64) -> Result<Simulated> {
        self.sample(&mut replicate_rng(seed, 0))
    }

    /// Replicate `r` of a run seeded with `seed`, independent of the others.
    pub fn generate_replicate(&self, seed: u64, r: u64) -> Result<Simulated> {
        self.sample(&mut replicate_rng(seed, r))
    }
}

/// One replicate's estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub segmentation: Segmentation,
    /// Per-segment parameters in the model's own parametrization.
    pub thetas: Vec<Vec<f64>>,
    pub loglik: f64,
}

impl<T: Real> From<&SegmentedFit<T>> for Estimate {
    fn from(f: &SegmentedFit<T>) -> Self {
        Estimate {
            segmentation: f.segmentation.clone(),
            thetas: f.thetas.iter().map(|t| t.iter().map(|v| v.as_f64()).collect()).collect(),
            loglik: f.loglik.as_f64(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub bias2: f64,
    pub var: f64,
    pub mape: f64,
    pub acce: f64,
    /// Replicates entering the metrics.
    pub j: usize,
    /// Replicates dropped for a segment-count mismatch.
    pub excluded: usize,
    /// Coordinates skipped in MAPE because the truth is zero.
    pub mape_skipped: usize,
    /// MSE of the error standard deviation (mean and linear models).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_mse: Option<f64>,
}

/// Accuracy of `estimates` against the scenario truth. ACCE is the average
/// misallocated fraction per replicate.
pub fn evaluate(scenario: &Scenario, estimates: &[Estimate]) -> MetricsReport {
    let k = scenario.k();
    let n = scenario.n;
    let truth = scenario.true_reported();
    let true_labels = Segmentation::new(n, scenario.breakpoints.clone()).expect("validated").labels();
    let kept: Vec<&Estimate> = estimates
        .iter()
        .filter(|e| e.segmentation.num_segments() == k && e.segmentation.n() == n && e.thetas.len() == k)
        .collect();
    let j = kept.len();
    let mut report = MetricsReport {
        j,
        excluded: estimates.len() - j,
        ..Default::default()
    };
    if j == 0 {
        return report;
    }
    let reported: Vec<Vec<Vec<f64>>> =
        kept.iter().map(|e| e.thetas.iter().map(|t| scenario.model.reported(t)).collect()).collect();
    let (jf, kf) = (j as f64, k as f64);
    let mut mse = 0.0;
    let mut var = 0.0;
    let mut bias2 = 0.0;
    let mut mape = 0.0;
    for s in 0..k {
        let d = truth[s].len();
        let mut mean = vec![0.0; d];
        for rep in &reported {
            for l in 0..d {
                mean[l] += rep[s][l] / jf;
            }
        }
        for l in 0..d {
            bias2 += (mean[l] - truth[s][l]).powi(2);
        }
        for rep in &reported {
            for l in 0..d {
                let v = rep[s][l];
                mse += (v - truth[s][l]).powi(2);
                var += (v - mean[l]).powi(2);
                if truth[s][l].abs() < 1e-12 {
                    report.mape_skipped += 1;
                } else {
                    mape += ((v - truth[s][l]) / truth[s][l]).abs();
                }
            }
        }
    }
    report.mse = mse / (kf * jf);
    report.var = var / (kf * jf);
    report.bias2 = bias2 / kf;
    report.mape = mape / (kf * jf);
    let wrong: usize = kept
        .iter()
        .map(|e| e.segmentation.labels().iter().zip(&true_labels).filter(|(a, b)| a != b).count())
        .sum();
    report.acce = wrong as f64 / (n as f64 * jf);
    if let Some(sigma) = scenario.sigma {
        let se: f64 = kept
            .iter()
            .flat_map(|e| e.thetas.iter().map(|t| (t[t.len() - 1].exp() - sigma).powi(2)))
            .sum();
        report.sigma_mse = Some(se / (kf * jf));
    }
    report
}

/// Estimation procedure for replicate runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MaxemBs,
    MaxemFl,
    Brute,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maxem-bs" => Ok(Method::MaxemBs),
            "maxem-fl" => Ok(Method::MaxemFl),
            "brute" => Ok(Method::Brute),
            other => Err(Error::invalid(format!("unknown method `{other}` (expected maxem-bs, maxem-fl or brute)"))),
        }
    }
}

/// Fits `k` segments to one sample with `method`.
pub fn estimate(
    model: Model,
    data: &Dataset<f64>,
    k: usize,
    method: Method,
    opts: &PipelineOptions<f64>,
) -> Result<SegmentedFit<f64>> {
    match method {
        Method::MaxemBs => Ok(detect(&model, data, k, &InitMethod::Bs, opts)?.0),
        Method::MaxemFl => Ok(detect(&model, data, k, &InitMethod::Fl, opts)?.0),
        Method::Brute => brute_force(&model, data, k, &BruteForceOptions::default()),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicateRun {
    pub scenario: String,
    pub method: Method,
    pub seed: u64,
    pub estimates: Vec<Estimate>,
    pub metrics: MetricsReport,
}

/// `j` independent replicates of `scenario`, estimated with `method` in
/// parallel.
pub fn run_replicates(
    scenario: &Scenario,
    j: usize,
    method: Method,
    seed: u64,
    opts: &PipelineOptions<f64>,
) -> Result<ReplicateRun> {
    let estimates = (0..j as u64)
        .into_par_iter()
        .map(|r| {
            let sim = scenario.generate_replicate(seed, r)?;
            let fit = estimate(scenario.model, &sim.data, scenario.k(), method, opts)?;
            Ok(Estimate::from(&fit))
        })
        .collect::<Result<Vec<_>>>()?;
    let metrics = evaluate(scenario, &estimates);
    Ok(ReplicateRun {
        scenario: scenario.name.clone(),
        method,
        seed,
        estimates,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for name in Scenario::preset_names() {
            let sc = Scenario::preset(name).unwrap();
            assert_eq!(sc.name, name);
        }
        assert!(matches!(Scenario::preset("nope"), Err(Error::UnknownPreset { .. })));
    }

    #[test]
    fn equal_seeds_are_identical() {
        let sc = Scenario::preset("logistic-1bp").unwrap();
        let a = sc.generate(7).unwrap();
        let b = sc.generate(7).unwrap();
        assert_eq!(a.data, b.data);
        assert_ne!(a.data, sc.generate(8).unwrap().data);
    }

    #[test]
    fn perfect_estimates_score_zero() {
        let sc = Scenario::preset("linear-1bp").unwrap();
        let est = Estimate {
            segmentation: Segmentation::new(sc.n, sc.breakpoints.clone()).unwrap(),
            thetas: (0..2).map(|k| sc.true_theta(k)).collect(),
            loglik: 0.0,
        };
        let m = evaluate(&sc, &[est.clone(), est]);
        assert_eq!((m.mse, m.bias2, m.var, m.mape, m.acce), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(m.sigma_mse, Some(0.0));
    }

    #[test]
    fn rejects_inconsistent_scenarios() {
        let text = Scenario::preset("mean-1bp").unwrap().to_toml_string().replace("sigma = 3.0", "sigma = -1.0");
        assert!(matches!(Scenario::from_toml_str(&text), Err(Error::Config(_))));
    }
}
