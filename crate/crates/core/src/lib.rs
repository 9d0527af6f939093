//! Corpus-to-classifier toolkit for predicting self-reported bipolar disorder
//! from Reddit-style comment dumps.
//!
//! The pipeline runs ingest -> cohort -> features -> evaluation -> analysis:
//!
//! - [`ingest`] streams dump JSONL into validated [`ingest::CommentRecord`]s.
//! - [`cohort`] finds self-reporting users, prunes topic leakage, samples
//!   controls and assigns topic categories.
//! - [`textproc`], [`lexicon`] and [`userfeat`] turn users into a
//!   [`matrix::FeatureMatrix`].
//! - [`ml`] and [`eval`] train classifiers under nested cross-validation.
//! - [`analysis`] holds the Welch t-test machinery and group comparisons.
//! - [`synth`] generates corpora with planted group effects.

pub mod analysis;
pub mod cohort;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod lexicon;
pub mod matrix;
pub mod ml;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod textproc;
pub mod userfeat;

pub use error::{Error, ErrorKind, Result};
