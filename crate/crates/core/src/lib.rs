//! Vowel classification with Fisher-ratio selected MFCC subsets.
//!
//! The pipeline runs in five stages, one module each:
//!
//! * [`corpus`] loads labeled WAV clips or synthesizes a five-vowel corpus,
//! * [`frontend`] turns clips into 12-dimensional MFCC sequences,
//! * [`fratio`] ranks coefficients by between/within class variance ratio,
//! * [`hmm`] trains one GMM-HMM per class and classifies by likelihood,
//! * [`eval`] runs repeated stratified hold-out experiments over subset sizes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod error;
pub mod eval;
pub mod fratio;
pub mod frontend;
pub mod hmm;
pub mod math;

pub use corpus::{AudioClip, Corpus, VowelSpec};
pub use error::{Error, ErrorKind, Result};
pub use eval::{EvalConfig, FRatioScope, SweepReport};
pub use fratio::{CoefficientSubset, FRatioReport};
pub use frontend::{FeatureSequence, FrontendConfig, Window};
pub use hmm::{HmmModel, ModelSet, TrainingConfig};
