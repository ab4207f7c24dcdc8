//! Joint text-video embeddings for event recognition.
//!
//! Videos carry a textual description and one or more precomputed feature
//! modalities. Training learns a latent space that reconstructs the
//! description terms (through a textual projection) while being predictable
//! from the features (through one visual projection per modality). At test
//! time only features are needed: a video is embedded, and its embedding
//! serves either as input to an event classifier trained from a handful of
//! examples, or is decoded into predicted terms and matched against an
//! event's textual definition with no examples at all.
//!
//! Modules:
//! - [`corpus`]: vocabulary, term matrix, feature matrices and their files.
//! - [`embedding`]: losses, per-sample gradients, SGD training, model files.
//! - [`fusion`]: multimodal training with one projection per modality.
//! - [`zeroshot`]: term-sensitive training, event queries, cosine ranking.
//! - [`baselines`]: term attributes and the two-step description embedding.
//! - [`eval`]: AP/mAP, kernel event classifier, few-example harness.
//! - [`oracle`]: closed-form minimizers, alternating minimization, finite
//!   differences and a planted synthetic corpus.
//! - [`cli`]: the command-line front end.

pub mod baselines;
pub mod cli;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod linalg;
pub mod oracle;
pub mod textfmt;
pub mod zeroshot;

pub use error::{Error, Result};
