//! Word- and character-level Bi-LSTM-CRF named entity taggers.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: dense vectors and matrices, nonlinearities, gradient checks.
//! - [`data`]: CoNLL reading and writing, IOB labels, token normalization and
//!   the word ↔ character label conversion.
//! - [`embeddings`]: vocabularies, embedding tables and the word2vec loader.
//! - [`encoders`]: LSTM, Bi-LSTM and CNN feature extractors and the five model
//!   variants (`Word-0` … `Word-3`, `Char-0`).
//! - [`crf`]: the linear-chain CRF output layer.
//! - [`training`]: SGD training with early stopping, and checkpoints.
//! - [`evaluation`]: exact-match entity precision, recall and F1.
//! - [`synthetic`]: a seeded generator for a small toy NER corpus.
//! - [`cli`]: the `ner` command-line entry point.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod cli;
pub mod crf;
pub mod data;
pub mod embeddings;
pub mod encoders;
pub mod error;
pub mod evaluation;
pub mod numerics;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
