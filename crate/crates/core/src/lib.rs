//! Utterance-genre mining over speaker-normalized prosodic features.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithmic stage of the
//! pipeline: corpus model and validation, prosodic feature extraction with
//! per-session normalization, equal-population quantization, k-means, genre
//! mining with salience screening, session-level empathy classification with a
//! linear SVM, the symbolic turn aligner and a seeded synthetic corpus
//! generator. File formats, configuration and the command line live in the
//! `uttgenre` companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod aligner;
pub mod classifier;
pub mod corpus;
pub mod error;
pub mod features;
pub mod genre;
pub mod kmeans;
pub mod quantizer;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
