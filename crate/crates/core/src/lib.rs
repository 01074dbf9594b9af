//! Prosodic ABX discrimination for frame-level speech representations.
//!
//! Pipeline: a [`manifest::Dataset`] of prosodic minimal pairs is expanded
//! into ABX triplets, each item's features are loaded (or sliced from a full
//! utterance), A and B are aligned to X with DTW, and the triplet scores are
//! averaged per speaker-pair cell, per contrast and across contrasts.
//! [`stats`] holds the layer-wise and cross-condition analyses.

pub mod abx;
pub mod dsp;
pub mod dtw;
pub mod features;
pub mod fixtures;
pub mod manifest;
pub mod stats;

pub use abx::{evaluate, ContextMode, EvalConfig, EvaluationReport};
pub use dtw::{dtw_align, Alignment, Metric};
pub use features::{FeatureSequence, FeatureSource, FrameSpec};
pub use manifest::{enumerate_triplets, Dataset, Item, Triplet};
