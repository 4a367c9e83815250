//! Neural feature extractors and the five tagger variants built from them.
//!
//! | variant | word vectors        | character features |
//! |---------|---------------------|--------------------|
//! | Word-0  | random              | none               |
//! | Word-1  | pretrained          | none               |
//! | Word-2  | pretrained          | CNN                |
//! | Word-3  | pretrained          | Bi-LSTM            |
//! | Char-0  | none (characters)   | n/a                |

mod cnn;
mod lstm;
mod model;

use std::fmt;
use std::str::FromStr;

pub use cnn::{char_cnn_features, CnnParams};
pub use lstm::{bilstm_forward, char_lstm_features, lstm_step, BiLstmParams, LstmParams};
pub use model::{iob_transition_allowed, Encoded, ForwardCache, Gradients, Model, SparseRows};

use crate::data::Level;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Per-position, per-tag scores (T × K) handed to the CRF.
pub type EmissionScores = Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariantKind {
    Word0,
    Word1,
    Word2,
    Word3,
    Char0,
}

impl VariantKind {
    pub const ALL: [VariantKind; 5] = [
        VariantKind::Word0,
        VariantKind::Word1,
        VariantKind::Word2,
        VariantKind::Word3,
        VariantKind::Char0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariantKind::Word0 => "Word-0",
            VariantKind::Word1 => "Word-1",
            VariantKind::Word2 => "Word-2",
            VariantKind::Word3 => "Word-3",
            VariantKind::Char0 => "Char-0",
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for VariantKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        VariantKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown variant {s:?}; expected one of Word-0, Word-1, Word-2, Word-3, Char-0"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharFeatureSource {
    None,
    Cnn,
    BiLstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordEmbeddingSource {
    Random,
    Pretrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelVariant {
    pub kind: VariantKind,
    pub char_feature_source: CharFeatureSource,
    /// `None` for the character-level model.
    pub word_embedding_source: Option<WordEmbeddingSource>,
}

impl ModelVariant {
    pub fn new(kind: VariantKind) -> Self {
        use CharFeatureSource as C;
        use WordEmbeddingSource as W;
        let (char_feature_source, word_embedding_source) = match kind {
            VariantKind::Word0 => (C::None, Some(W::Random)),
            VariantKind::Word1 => (C::None, Some(W::Pretrained)),
            VariantKind::Word2 => (C::Cnn, Some(W::Pretrained)),
            VariantKind::Word3 => (C::BiLstm, Some(W::Pretrained)),
            VariantKind::Char0 => (C::None, None),
        };
        ModelVariant {
            kind,
            char_feature_source,
            word_embedding_source,
        }
    }

    pub fn level(&self) -> Level {
        match self.kind {
            VariantKind::Char0 => Level::Char,
            _ => Level::Word,
        }
    }

    pub fn needs_pretrained(&self) -> bool {
        self.word_embedding_source == Some(WordEmbeddingSource::Pretrained)
    }

    pub fn uses_char_embeddings(&self) -> bool {
        self.kind == VariantKind::Char0 || self.char_feature_source != CharFeatureSource::None
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.kind.name())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(ModelVariant::new(s.parse()?))
    }
}

/// Layer sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    /// Used when no pretrained table fixes the word dimension.
    pub word_dim: usize,
    pub char_dim: usize,
    /// Hidden size per direction of the word-level Bi-LSTM.
    pub word_hidden: usize,
    pub cnn_filters: usize,
    pub cnn_window: usize,
    /// Hidden size per direction of the character-feature Bi-LSTM.
    pub char_hidden: usize,
    /// Hidden size per direction of the character-level model's Bi-LSTM.
    pub char_model_hidden: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            word_dim: 300,
            char_dim: 50,
            word_hidden: 200,
            cnn_filters: 30,
            cnn_window: 3,
            char_hidden: 25,
            char_model_hidden: 150,
        }
    }
}
