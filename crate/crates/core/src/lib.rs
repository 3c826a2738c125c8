//! Disentangled linear attribute directions from labeled latent codes.
//!
//! The pipeline: build the joint contingency table of the binary attribute
//! labels, draw a subsample that is balanced across all `2^m` label
//! combinations, fit one direction per attribute (class-centroid difference or
//! linear SVM normal), and measure each direction's effect and entanglement by
//! re-scoring edited codes. [`oracle`] provides a synthetic world with planted
//! attribute directions to drive the whole loop without a generator.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contingency;
pub mod dataset;
pub mod directions;
pub mod error;
pub mod eval;
pub mod fit;
pub mod io;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod svm;

pub use contingency::{build_contingency, imbalance_stats, ContingencyTable, ImbalanceStats};
pub use dataset::{
    filter_by_confidence, split_by_attribute, validate_dataset, AttributeSchema, AttributeSplit,
    LabelCombination, LatentDataset, ValidationReport, Violation,
};
pub use directions::{
    centroid_direction, conditional_project, cosine_matrix, edit_latent, svm_direction,
    DirectionMethod, SemanticDirection,
};
pub use error::{Error, Result};
pub use eval::{
    effect, embedding_similarity, overall_entanglement, rescore, sweep_regularization,
    sweep_sample_size, AttributeScorer, EvalSettings, RescoreMatrix, SweepReport, SweepRow,
};
pub use fit::{fit_directions, FitMethod, Sampling};
pub use oracle::{make_world, oracle_score, sample_world, LinearAttributeWorld, WorldConfig};
pub use sampler::{
    balanced_subsample, uniform_subsample, ExhaustionPolicy, SamplePlan, SubsampleResult,
};
pub use svm::{train_svm, SvmModel, SvmParams};
