//! Evaluation metrics: SSIM background consistency, Fréchet distance
//! between feature Gaussians, and affordance point accuracy per clutter
//! level.

pub mod apa;
pub mod frechet;
pub mod ssim;

pub use apa::{apa, clutter_level, ApaReport, ApaSample, ClutterLevel};
pub use frechet::{fit_gaussian, frechet_distance, GaussianSummary};
pub use ssim::{ssim, GrayRaster, SsimParams};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("feature row {row} has length {len}, expected {expected}")]
    RaggedFeatures { row: usize, len: usize, expected: usize },
    #[error("covariance is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("covariance is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
}
