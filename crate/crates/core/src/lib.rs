//! Data-driven case-based reasoning (CBR) for insolvency prediction.
//!
//! The engine classifies a query company by retrieving its `K` most similar
//! reference cases under a learned global/local similarity measure and voting
//! on their labels. Local similarities may be asymmetric: a polynomial whose
//! degree depends on the direction of the difference between query and
//! reference values. Global weights come from feature scoring methods and the
//! polynomial degrees are tuned by particle swarm optimization against a
//! cross-validated cost.
//!
//! On top of the classifier the crate provides posterior probabilities from
//! monotone rank weights, Shapley attributions of those probabilities, and
//! what-if trajectories for decision support.

pub mod dataset;
pub mod error;
pub mod explain;
pub mod metrics;
pub mod model;
pub mod parallel;
pub mod probability;
pub mod retrieval;
pub mod seed;
pub mod service;
pub mod similarity;
pub mod training;
pub mod weighting;

pub use dataset::{Case, Dataset, FeatureDef, FeatureSchema, Label, ParseOptions, ScalingParams};
pub use error::{Error, Result};
pub use model::TrainedModel;
pub use probability::ProbWeights;
pub use similarity::{GlobalWeights, LocalParams, SimilarityModel, Variant};
