//! Cause/effect mining over vehicle complaint narratives.
//!
//! The crate is organised as a set of pipeline stages that can be used on
//! their own or chained through [`pipeline::run_pipeline`]:
//!
//! * [`ingest`] parses flat complaint files, deduplicates and date-filters them.
//! * [`lexicon`] flags ADAS-related complaints by keyword group.
//! * [`classifier`] is a hashed n-gram logistic regression baseline with a
//!   stratified cross-validation harness.
//! * [`corpus`] reads and writes C/E/O annotated sentences.
//! * [`tagger`] is a linear-chain CRF for cause/effect span extraction plus a
//!   line-delimited JSON protocol for external taggers.
//! * [`taxonomy`] maps spans to cause/effect categories and builds ranked reports.

pub mod classifier;
pub mod corpus;
pub mod digest;
pub mod ingest;
pub mod lexicon;
pub mod pipeline;
pub mod tagger;
pub mod taxonomy;
pub mod text;

pub use corpus::{AnnotatedSentence, Source, Tag};
pub use ingest::ComplaintRecord;
pub use lexicon::{AdasCategory, Lexicon};
pub use tagger::CrfModel;
