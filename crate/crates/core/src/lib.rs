//! Core algorithms for clinical named entity recognition.
//!
//! Everything in this crate is pure computation over in-memory values and
//! builds without `std` (only `alloc` is required). File IO, the experiment
//! harness, the annotation service and the command line live in the `ehrner`
//! companion crate.
//!
//! Module map:
//!
//! - [`corpus`]: tokenizer, annotated documents, dataset splitting and the
//!   synthetic clinical corpus generator.
//! - [`repr`]: static skip-gram embeddings and the convolutional contextual
//!   encoder pretrained by predicting masked tokens' static vectors.
//! - [`tagger`]: BILOU label scheme, transition legality, greedy decoding,
//!   supervised training and label-set extension.
//! - [`eval`]: exact-span precision, recall and F1.
#![no_std]

extern crate alloc;

pub mod codec;
pub mod corpus;
mod error;
pub mod eval;
pub mod nn;
pub mod repr;
pub mod rng;
pub mod tagger;

pub use error::{Error, FormatError, Result};

/// Source of wall-clock time. The core has no clock of its own; callers that
/// want timings in reports pass one in.
pub trait Clock {
    fn now_secs(&self) -> f64;
}

/// A clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_secs(&self) -> f64 {
        0.0
    }
}
