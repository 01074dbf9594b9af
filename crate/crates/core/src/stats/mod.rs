//! Statistics over evaluation outputs: correlations, bootstrap intervals,
//! signed-rank tests, layer selection and human response summaries.

mod bootstrap;
mod correlation;
pub mod human;
mod layers;
mod wilcoxon;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bootstrap::{bootstrap_ci, CorrelationStat, DEFAULT_RESAMPLES};
pub use correlation::{partial_correlation, pearson, ranks, spearman};
pub use layers::{best_layer, read_curves_csv, regret, write_curves_csv, LayerCurve};
pub use wilcoxon::{wilcoxon_signed_rank, EXACT_MAX_N};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("zero variance in {0}")]
    Degenerate(&'static str),
    #[error("all differences are zero")]
    AllZero,
    #[error("layer curves cover different layers")]
    LayerMismatch,
    #[error("invalid layer curve: {0}")]
    InvalidCurve(String),
    #[error("bootstrap could not draw a non-degenerate resample")]
    BootstrapStuck,
}

pub type Result<T, E = StatsError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub value: f64,
    pub ci: Option<ConfidenceInterval>,
    pub p_value: Option<f64>,
    pub n: usize,
}

impl StatResult {
    pub fn point(value: f64, n: usize) -> Self {
        Self {
            value,
            ci: None,
            p_value: None,
            n,
        }
    }
}

/// Lower median (the smaller middle element for even counts). `None` when empty.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted[(sorted.len() - 1) / 2])
}
