//! Streaming test-time adaptation over precomputed vision-language
//! embeddings.
//!
//! A stream of unlabeled samples (each a set of augmented view features) is
//! classified against class text embeddings. Per-class visual prototypes are
//! evolved online from a small cache of confident samples, weighted by a
//! quality reward that mixes prototype similarity, prediction confidence and
//! novelty against recent history.

// Validation compares with `!(x > 0.0)` on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data_io;
pub mod engine;
pub mod error;
pub mod numkit;
pub mod prototype;
pub mod report;
pub mod reward;

pub use engine::{
    aggregate_views, residual_refine, run_ablation, run_stream, zero_shot_probs, Engine,
    EngineConfig, PredictionRecord, RewardMask, TestSample,
};
pub use error::{Error, Result};
pub use numkit::{FeatureVector, ProbabilityVector};
pub use report::RunReport;
