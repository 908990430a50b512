//! Ordinal soft-label encodings for classification.
//!
//! - [`label_codec`]: one-hot, linear SORD and circular SORD encodings.
//! - [`ordering_search`]: candidate orderings with softmax-weighted losses.
//! - [`learned_codec`]: per-class label distributions learned jointly with
//!   the model, with the target entry pinned.
//! - [`diffcore`]: a small dense classifier, cross-entropy, Adam and a
//!   finite-difference gradient checker.
//! - [`synthdata`]: cyclic synthetic data with a hidden class ordering.
//! - [`harness`]: training runs, sweeps, reports and summaries.

pub mod diffcore;
pub mod error;
pub mod harness;
pub mod label_codec;
pub mod learned_codec;
pub mod numeric;
pub mod ordering_search;
pub mod synthdata;

pub use error::{Error, Result};
pub use harness::{
    run_experiment, sweep_summary, ExperimentConfig, RunReport, RunStatus, Scheme, SummaryTable,
};
pub use label_codec::{
    encode_onehot, encode_sord, pairwise_distance, DistanceSpec, Geometry, LabelMatrix,
    RankAssignment,
};
pub use learned_codec::{asymmetry_report, materialize, EncodingParams};
pub use ordering_search::{
    dominant_ordering, enumerate_orderings, per_ordering_losses, weighted_total_loss,
    OrderingCandidateSet, OrderingWeights,
};
pub use synthdata::{bayes_error, generate, Dataset, NoiseStructure, SynthConfig};
