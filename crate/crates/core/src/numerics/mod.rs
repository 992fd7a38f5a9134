//! Small dense networks, Adam, and a trust-region policy step.

mod adam;
mod linalg;
mod net;
mod trust_region;

pub use adam::{AdamConfig, AdamState};
pub use linalg::{cholesky_solve, ridge_regression};
pub use net::{Activation, DenseNet, ForwardTrace};
pub use trust_region::{
    conjugate_gradient, mean_kl, trust_region_step, PolicyBatch, StepStatus, TrustRegionConfig,
    TrustRegionReport,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("invalid network architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("curvature along search direction is not positive ({0})")]
    NotPositiveDefinite(f64),
}

/// Numerically stable `log softmax`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}
