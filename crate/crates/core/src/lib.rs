//! Pool-based active learning for BIO sequence tagging.
//!
//! The crate is organised around the active-learning loop:
//!
//! - [`corpus`] reads CoNLL column files, validates BIO tags and holds the
//!   labeled and unlabeled pools.
//! - [`tagger`] is a small hashed-feature softmax tagger that produces
//!   per-token class distributions, including MC-dropout samples.
//! - [`acquisition`] turns those distributions into token-level uncertainty
//!   scores (least confidence, entropy, MNLP, BALD) and sentence scores.
//! - [`reweight`] computes smoothed inverse-frequency class weights from the
//!   labeled pool and selects queries by the weighted token sum.
//! - [`alloop`] drives select / label / retrain / evaluate rounds over
//!   several seeded trials; [`metrics`] holds span F1, the imbalance ratio
//!   and confidence intervals.
//! - [`synth`] generates imbalanced synthetic BIO corpora for experiments.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the common `f64` instantiations.

pub mod acquisition;
pub mod alloop;
pub mod corpus;
mod error;
pub mod metrics;
pub mod reweight;
mod scalar;
pub mod synth;
pub mod tagger;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use acquisition::AcquisitionKind;
pub use alloop::{ExperimentConfig, ExperimentResult, RunRecord};
pub use corpus::{LabeledCorpus, Sentence, TagSet, UnlabeledPool};
pub use tagger::TaggerConfig;

/// Per-token class distributions in double precision.
pub type ProbMatrix = tagger::ProbMatrix<f64>;
/// Per-token class distributions in single precision.
pub type ProbMatrix32 = tagger::ProbMatrix<f32>;
/// Trained tagger in double precision.
pub type TaggerModel = tagger::TaggerModel<f64>;
/// Trained tagger in single precision.
pub type TaggerModel32 = tagger::TaggerModel<f32>;
/// Smoothed class weights in double precision.
pub type ClassWeights = reweight::ClassWeights<f64>;
/// Smoothed class weights in single precision.
pub type ClassWeights32 = reweight::ClassWeights<f32>;
/// Token scores in double precision.
pub type TokenScores = acquisition::TokenScores<f64>;
/// Token scores in single precision.
pub type TokenScores32 = acquisition::TokenScores<f32>;
