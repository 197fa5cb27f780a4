// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change-point detection in parametric regression models via max-EM on a
//! constrained hidden Markov chain, with a score-based likelihood ratio test
//! for a single change.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

// NaN-aware comparisons are written as negations on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod hmm;
pub mod init;
pub mod linalg;
pub mod lrtest;
pub mod maxem;
pub mod models;
pub mod oracle;
pub mod real;
pub mod select;
pub mod sim;
pub mod tv;

pub use data::{load_csv, read_csv, save_csv, write_csv, CsvSchema, ResponseKind, Rows, Segmentation};
pub use error::{Error, Result};
pub use hmm::TransitionScheme;
pub use init::{CandidatePool, InitMethod};
pub use models::{EmissionModel, Model, Obs};
pub use real::Real;
pub use sim::{Method, MetricsReport, Scenario};

pub type Dataset = data::Dataset<f64>;
pub type FitOptions = models::FitOptions<f64>;
pub type MleFit = models::MleFit<f64>;
pub type MaxEmOptions = maxem::MaxEmOptions<f64>;
pub type SegmentedFit = maxem::SegmentedFit<f64>;
pub type PipelineOptions = init::PipelineOptions<f64>;
pub type BruteForceOptions = oracle::BruteForceOptions<f64>;
pub type LrOptions = lrtest::LrOptions<f64>;
pub type LrCurve = lrtest::LrCurve<f64>;
pub type PermutationResult = lrtest::PermutationResult<f64>;
pub type SelectionReport = select::SelectionReport<f64>;
