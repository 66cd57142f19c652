//! Silver-label sentiment annotation toolkit.
//!
//! Two annotators produce four-way sentiment labels (positive, negative,
//! neutral, mixed) for unlabelled sentences:
//!
//! * [`polarity`]: lexicon scores are mapped onto a polarity/intensity plane
//!   and each sentence takes the label of the nearest fixed class centroid,
//!   together with a confidence value `alpha`.
//! * [`gmm`]: a four-component Gaussian mixture fitted by EM over sentence
//!   embeddings (with the polarity coordinate appended), labelling each
//!   sentence with its most probable component.
//!
//! The resulting silver data trains a small softmax classifier
//! ([`classifier`]) with either plain or confidence-weighted cross-entropy,
//! and [`eval`] scores predictions with F1 and Cohen's kappa.

// `!(x > 0.0)` is deliberate throughout: NaN must fail range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod gmm;
pub mod polarity;
pub mod seed;
pub mod vectors;

pub use classifier::{LossKind, ModelParams, TrainConfig, TrainExample, TrainReport};
pub use corpus::{Corpus, Lexicon, Sentence, Token};
pub use error::{Error, Result};
pub use eval::{ConfusionMatrix, MetricsReport};
pub use gmm::{CovarianceType, FitReport, GmmConfig, GmmParams};
pub use polarity::{CentroidSet, PcAnnotation, PolarityCoordinate, SentimentLabel};
pub use vectors::{EmbeddingStore, FeatureMatrix};
