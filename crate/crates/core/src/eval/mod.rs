//! Evaluation metrics, kinematic histograms, and model comparison.

mod compare;
mod evaluate;
mod histogram;
mod metrics;

pub use compare::{
    compare_models, kinematic_histograms, kinematic_l1, Comparison, Kinematic, ModelReport,
    COMPARISON_COLUMNS,
};
pub use evaluate::{evaluate, evaluate_oracle, Evaluation};
pub use histogram::{build_histogram, l1_distance, Histogram};
pub use metrics::MetricsRecord;

use thiserror::Error;

use crate::airl::AirlError;

/// Published histogram deviations from the expert, rows in `Kinematic::ALL`
/// order, columns meta-learned, pretrained, and scratch models.
pub const REFERENCE_DEVIATIONS: [[f64; 3]; 4] = [
    [0.32, 0.48, 0.83],
    [0.08, 0.18, 0.27],
    [0.30, 0.41, 0.42],
    [0.15, 0.28, 0.33],
];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("histogram '{0}' has no values")]
    EmptyHistogram(String),
    #[error("histogram '{metric}': invalid binning ({bins} bins over [{lo}, {hi}])")]
    InvalidBins {
        metric: String,
        bins: usize,
        lo: f64,
        hi: f64,
    },
    #[error("histogram '{metric}': non-finite value {value}")]
    NonFinite { metric: String, value: f64 },
    #[error("histograms '{left}' and '{right}' have different bin edges")]
    EdgeMismatch { left: String, right: String },
    #[error("a comparison needs at least one model")]
    NoModels,
    #[error(transparent)]
    Airl(#[from] AirlError),
}
