use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cnn::{self, CnnCache, CnnParams};
use super::lstm::{self, BiLstmParams, BiTrace};
use super::{CharFeatureSource, Dims, EmissionScores, ModelVariant};
use crate::crf::TransitionMatrix;
use crate::data::{word_to_char, CharLabel, CharSentence, LabelScheme, Level, WordLabel, WordSentence};
use crate::embeddings::{fill_uniform, word_key, EmbeddingTable, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, matvec_acc, matvec_t_acc, outer_acc, Matrix, Vector};

/// A sentence mapped to vocabulary ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Encoded {
    /// Word ids, plus the character ids of every word when the model uses
    /// character features.
    Words { words: Vec<usize>, chars: Vec<Vec<usize>> },
    Chars { chars: Vec<usize> },
}

impl Encoded {
    pub fn len(&self) -> usize {
        match self {
            Encoded::Words { words, .. } => words.len(),
            Encoded::Chars { chars } => chars.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Allowed IOB transitions: `I-X` only after `B-X` or `I-X`.
/// `from == None` is the START state. Character schemes allow everything.
pub fn iob_transition_allowed(scheme: &LabelScheme) -> impl Fn(Option<usize>, usize) -> bool {
    let word = scheme.level() == Level::Word;
    move |from, to| {
        if !word {
            return true;
        }
        match WordLabel::INVENTORY[to] {
            WordLabel::Inside(t) => {
                from.is_some_and(|f| WordLabel::INVENTORY[f].entity_type() == Some(t))
            }
            _ => true,
        }
    }
}

/// All parameters of one tagger.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub variant: ModelVariant,
    pub scheme: LabelScheme,
    pub word_embeddings: Option<EmbeddingTable>,
    pub char_embeddings: Option<EmbeddingTable>,
    pub char_cnn: Option<CnnParams>,
    pub char_lstm: Option<BiLstmParams>,
    pub encoder: BiLstmParams,
    pub projection: Matrix,
    pub projection_bias: Vector,
    pub transitions: TransitionMatrix,
}

impl Model {
    /// A model with every parameter zero, shaped by `dims` and the
    /// vocabularies. The word dimension comes from `dims.word_dim`.
    pub fn zeros(
        variant: ModelVariant,
        dims: &Dims,
        word_vocab: Option<Vocabulary>,
        char_vocab: Option<Vocabulary>,
    ) -> Result<Self> {
        let scheme = LabelScheme::for_level(variant.level());
        let word_embeddings = match (variant.level(), word_vocab) {
            (Level::Word, Some(v)) => {
                let rows = v.len();
                Some(EmbeddingTable::new(v, Matrix::zeros(rows, dims.word_dim), true)?)
            }
            (Level::Word, None) => return Err(Error::Config(format!("{variant} needs a word vocabulary"))),
            (Level::Char, _) => None,
        };
        let char_embeddings = match (variant.uses_char_embeddings(), char_vocab) {
            (true, Some(v)) => {
                let rows = v.len();
                Some(EmbeddingTable::new(v, Matrix::zeros(rows, dims.char_dim), true)?)
            }
            (true, None) => return Err(Error::Config(format!("{variant} needs a character vocabulary"))),
            (false, _) => None,
        };
        let (char_cnn, char_lstm, feat_dim) = match variant.char_feature_source {
            CharFeatureSource::None => (None, None, 0),
            CharFeatureSource::Cnn => (
                Some(CnnParams::zeros(dims.cnn_filters, dims.cnn_window, dims.char_dim)),
                None,
                dims.cnn_filters,
            ),
            CharFeatureSource::BiLstm => (
                None,
                Some(BiLstmParams::zeros(dims.char_dim, dims.char_hidden)),
                2 * dims.char_hidden,
            ),
        };
        let (input_dim, hidden) = match variant.level() {
            Level::Word => (dims.word_dim + feat_dim, dims.word_hidden),
            Level::Char => (dims.char_dim, dims.char_model_hidden),
        };
        let k = scheme.len();
        let model = Model {
            variant,
            word_embeddings,
            char_embeddings,
            char_cnn,
            char_lstm,
            encoder: BiLstmParams::zeros(input_dim, hidden),
            projection: Matrix::zeros(k, 2 * hidden),
            projection_bias: Vector::zeros(k),
            transitions: TransitionMatrix::zeros(k),
            scheme,
        };
        model.validate()?;
        Ok(model)
    }

    /// A freshly initialized model.
    ///
    /// Word variants take their word table as given (random or pretrained);
    /// its dimension overrides `dims.word_dim`. Character embeddings are drawn
    /// uniformly in `±√(3/char_dim)`; weight matrices are Glorot-uniform and
    /// the transitions start at zero.
    pub fn init(
        variant: ModelVariant,
        dims: &Dims,
        word_table: Option<EmbeddingTable>,
        char_vocab: Option<Vocabulary>,
        seed: u64,
    ) -> Result<Self> {
        let mut dims = *dims;
        if let Some(t) = &word_table {
            dims.word_dim = t.dim();
        }
        let word_vocab = word_table.as_ref().map(|t| t.vocab.clone());
        let mut model = Model::zeros(variant, &dims, word_vocab, char_vocab)?;
        model.word_embeddings = word_table;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(t) = &mut model.char_embeddings {
            let vocab = t.vocab.clone();
            *t = EmbeddingTable::random_init(vocab, dims.char_dim, rng.random())?;
        }
        if let Some(c) = &mut model.char_cnn {
            *c = CnnParams::init(dims.cnn_filters, dims.cnn_window, dims.char_dim, &mut rng);
        }
        if let Some(l) = &mut model.char_lstm {
            *l = BiLstmParams::init(dims.char_dim, dims.char_hidden, &mut rng);
        }
        let enc_in = model.encoder.fwd.input_dim();
        let enc_hidden = model.encoder.fwd.hidden_dim();
        model.encoder = BiLstmParams::init(enc_in, enc_hidden, &mut rng);
        let bound = (6.0 / (model.projection.rows() + model.projection.cols()) as f64).sqrt();
        fill_uniform(model.projection.as_mut_slice(), bound, &mut rng);
        model.validate()?;
        Ok(model)
    }

    /// Imposes `-∞` scores on IOB-invalid transitions.
    pub fn constrain_transitions(&mut self) {
        let allowed = iob_transition_allowed(&self.scheme);
        let t = std::mem::replace(&mut self.transitions, TransitionMatrix::zeros(1));
        self.transitions = t.with_mask(allowed);
    }

    /// Checks that the parameter blocks fit the variant and each other.
    pub fn validate(&self) -> Result<()> {
        let v = self.variant;
        let cfg = |m: String| Err(Error::Config(m));
        if self.scheme.level() != v.level() {
            return cfg(format!("{v} cannot use a {:?}-level label scheme", self.scheme.level()));
        }
        if (v.level() == Level::Word) != self.word_embeddings.is_some() {
            return cfg(format!("{v}: word embeddings present = {}", self.word_embeddings.is_some()));
        }
        if v.uses_char_embeddings() != self.char_embeddings.is_some() {
            return cfg(format!("{v}: character embeddings present = {}", self.char_embeddings.is_some()));
        }
        if (v.char_feature_source == CharFeatureSource::Cnn) != self.char_cnn.is_some()
            || (v.char_feature_source == CharFeatureSource::BiLstm) != self.char_lstm.is_some()
        {
            return cfg(format!("{v}: character feature extractor does not match the variant"));
        }
        let char_dim = self.char_embeddings.as_ref().map(EmbeddingTable::dim);
        let feat_dim = if let Some(c) = &self.char_cnn {
            c.validate()?;
            if Some(c.char_dim()) != char_dim {
                return cfg("CNN filters do not match the character dimension".into());
            }
            c.num_filters()
        } else if let Some(l) = &self.char_lstm {
            l.fwd.validate()?;
            l.bwd.validate()?;
            if Some(l.fwd.input_dim()) != char_dim || Some(l.bwd.input_dim()) != char_dim {
                return cfg("character Bi-LSTM does not match the character dimension".into());
            }
            l.output_dim()
        } else {
            0
        };
        let expected_in = match v.level() {
            Level::Word => self.word_embeddings.as_ref().unwrap().dim() + feat_dim,
            Level::Char => char_dim.unwrap(),
        };
        self.encoder.fwd.validate()?;
        self.encoder.bwd.validate()?;
        if self.encoder.fwd.input_dim() != expected_in || self.encoder.bwd.input_dim() != expected_in {
            return cfg(format!(
                "encoder expects inputs of dimension {}, features have {expected_in}",
                self.encoder.fwd.input_dim()
            ));
        }
        let k = self.scheme.len();
        if self.projection.rows() != k
            || self.projection.cols() != self.encoder.output_dim()
            || self.projection_bias.dim() != k
            || self.transitions.num_tags() != k
        {
            return cfg(format!("output layer does not map {} features to {k} tags", self.encoder.output_dim()));
        }
        Ok(())
    }

    pub fn num_tags(&self) -> usize {
        self.scheme.len()
    }

    fn char_ids(&self, text: &str) -> Vec<usize> {
        let table = self.char_embeddings.as_ref().expect("character table");
        let mut buf = [0u8; 4];
        text.chars()
            .map(|c| table.vocab.id_or_unk(c.encode_utf8(&mut buf)))
            .collect()
    }

    /// Maps a word sentence to ids. Character-level models see the sentence
    /// as its characters joined by single spaces.
    pub fn encode(&self, s: &WordSentence) -> Result<Encoded> {
        if s.is_empty() {
            return Err(Error::Contract("cannot tag an empty sentence".into()));
        }
        match self.variant.level() {
            Level::Char => Ok(self.encode_chars(&word_to_char(s))),
            Level::Word => {
                let table = self.word_embeddings.as_ref().expect("word table");
                let words = s.tokens.iter().map(|t| table.vocab.id_or_unk(&word_key(&t.surface))).collect();
                let chars = if self.variant.char_feature_source == CharFeatureSource::None {
                    Vec::new()
                } else {
                    s.tokens.iter().map(|t| self.char_ids(&t.surface)).collect()
                };
                Ok(Encoded::Words { words, chars })
            }
        }
    }

    pub fn encode_chars(&self, s: &CharSentence) -> Encoded {
        let text = s.text();
        Encoded::Chars {
            chars: self.char_ids(&text),
        }
    }

    /// Gold tag ids for `s` in this model's scheme, if every token has one.
    pub fn gold_tags(&self, s: &WordSentence) -> Option<Vec<usize>> {
        match self.variant.level() {
            Level::Word => s.tokens.iter().map(|t| t.gold_label.map(WordLabel::index)).collect(),
            Level::Char => {
                s.gold_labels()?;
                Some(word_to_char(s).chars.iter().map(|c| c.gold_label.index()).collect())
            }
        }
    }

    pub fn gold_char_tags(s: &CharSentence) -> Vec<usize> {
        s.chars.iter().map(|c| CharLabel::index(c.gold_label)).collect()
    }

    /// Emission scores for an encoded sentence, without dropout.
    pub fn emit(&self, input: &Encoded) -> Result<EmissionScores> {
        Ok(self.forward(input, None)?.0)
    }

    pub fn emit_sentence(&self, s: &WordSentence) -> Result<EmissionScores> {
        self.emit(&self.encode(s)?)
    }

    fn check_input(&self, input: &Encoded) -> Result<()> {
        if input.is_empty() {
            return Err(Error::Contract("empty input sequence".into()));
        }
        let bad = |m: &str| Err(Error::Config(format!("{}: {m}", self.variant)));
        match (input, self.variant.level()) {
            (Encoded::Words { words, chars }, Level::Word) => {
                let table = self.word_embeddings.as_ref().unwrap();
                if words.iter().any(|&w| w >= table.len()) {
                    return bad("word id outside the vocabulary");
                }
                if self.variant.char_feature_source != CharFeatureSource::None {
                    let ct = self.char_embeddings.as_ref().unwrap();
                    if chars.len() != words.len() || chars.iter().any(Vec::is_empty) {
                        return bad("every word needs its characters");
                    }
                    if chars.iter().flatten().any(|&c| c >= ct.len()) {
                        return bad("character id outside the vocabulary");
                    }
                }
                Ok(())
            }
            (Encoded::Chars { chars }, Level::Char) => {
                if chars.iter().any(|&c| c >= self.char_embeddings.as_ref().unwrap().len()) {
                    return bad("character id outside the vocabulary");
                }
                Ok(())
            }
            _ => bad("input level does not match the model"),
        }
    }

    /// Forward pass keeping what the backward pass needs. With `dropout`,
    /// each encoder input component is zeroed with the given probability and
    /// survivors are scaled by `1 / (1 - rate)`.
    pub fn forward(&self, input: &Encoded, dropout: Option<(f64, &mut ChaCha8Rng)>) -> Result<(EmissionScores, ForwardCache)> {
        self.check_input(input)?;
        let mut features = Vec::new();
        let mut inputs: Vec<Vec<f64>> = match input {
            Encoded::Chars { chars } => {
                let table = self.char_embeddings.as_ref().unwrap();
                chars.iter().map(|&c| table.row(c).to_vec()).collect()
            }
            Encoded::Words { words, chars } => {
                let table = self.word_embeddings.as_ref().unwrap();
                let mut out = Vec::with_capacity(words.len());
                for (t, &w) in words.iter().enumerate() {
                    let mut x = table.row(w).to_vec();
                    if let Some((feat, cache)) = self.char_features(chars.get(t)) {
                        x.extend_from_slice(&feat);
                        features.push(cache);
                    }
                    out.push(x);
                }
                out
            }
        };
        let masks = match dropout {
            Some((rate, rng)) if rate > 0.0 => {
                let keep = 1.0 / (1.0 - rate);
                let masks: Vec<Vec<f64>> = inputs
                    .iter()
                    .map(|x| x.iter().map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect())
                    .collect();
                for (x, m) in inputs.iter_mut().zip(&masks) {
                    x.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
                }
                Some(masks)
            }
            _ => None,
        };
        let trace = lstm::bi_run(&self.encoder, &inputs);
        let hidden = trace.outputs();
        let k = self.num_tags();
        let mut emissions = Matrix::zeros(hidden.len(), k);
        for (t, h) in hidden.iter().enumerate() {
            let row = emissions.row_mut(t);
            row.copy_from_slice(self.projection_bias.as_slice());
            matvec_acc(&self.projection, h, row);
        }
        Ok((
            emissions,
            ForwardCache {
                features,
                inputs,
                masks,
                trace,
                hidden,
            },
        ))
    }

    fn char_features(&self, chars: Option<&Vec<usize>>) -> Option<(Vec<f64>, CharFeatureCache)> {
        let chars = chars?;
        let table = self.char_embeddings.as_ref()?;
        let xs: Vec<&[f64]> = chars.iter().map(|&c| table.row(c)).collect();
        if let Some(p) = &self.char_cnn {
            let (feat, cache) = cnn::forward_cached(p, &xs);
            return Some((feat, CharFeatureCache::Cnn(cache)));
        }
        if let Some(p) = &self.char_lstm {
            let trace = lstm::bi_run(p, &xs);
            return Some((lstm::final_states(&trace), CharFeatureCache::Lstm(trace)));
        }
        None
    }

    /// Backpropagates `d_emissions` (loss gradient w.r.t. the emission
    /// scores) into `grads`.
    pub fn backward(&self, input: &Encoded, cache: &ForwardCache, d_emissions: &Matrix, grads: &mut Gradients) {
        let n = cache.hidden.len();
        let mut d_hidden = vec![vec![0.0; self.encoder.output_dim()]; n];
        for t in 0..n {
            let d = d_emissions.row(t);
            outer_acc(&mut grads.projection, d, &cache.hidden[t]);
            axpy(1.0, d, grads.projection_bias.as_mut_slice());
            matvec_t_acc(&self.projection, d, &mut d_hidden[t]);
        }
        let mut d_inputs = lstm::bi_backward(&self.encoder, &cache.inputs, &cache.trace, &d_hidden, &mut grads.encoder);
        if let Some(masks) = &cache.masks {
            for (d, m) in d_inputs.iter_mut().zip(masks) {
                d.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
            }
        }
        match input {
            Encoded::Chars { chars } => {
                for (&c, d) in chars.iter().zip(&d_inputs) {
                    grads.char_embeddings.add(c, d);
                }
            }
            Encoded::Words { words, chars } => {
                let word_dim = self.word_embeddings.as_ref().unwrap().dim();
                for (t, (&w, d)) in words.iter().zip(&d_inputs).enumerate() {
                    grads.word_embeddings.add(w, &d[..word_dim]);
                    let Some(feat_cache) = cache.features.get(t) else { continue };
                    let table = self.char_embeddings.as_ref().unwrap();
                    let ids = &chars[t];
                    let xs: Vec<&[f64]> = ids.iter().map(|&c| table.row(c)).collect();
                    let d_feat = &d[word_dim..];
                    let d_chars = match feat_cache {
                        CharFeatureCache::Cnn(c) => {
                            cnn::backward(self.char_cnn.as_ref().unwrap(), &xs, c, d_feat, grads.char_cnn.as_mut().unwrap())
                        }
                        CharFeatureCache::Lstm(trace) => lstm::final_states_backward(
                            self.char_lstm.as_ref().unwrap(),
                            &xs,
                            trace,
                            d_feat,
                            grads.char_lstm.as_mut().unwrap(),
                        ),
                    };
                    for (&c, dc) in ids.iter().zip(&d_chars) {
                        grads.char_embeddings.add(c, dc);
                    }
                }
            }
        }
    }

    /// Named parameter blocks with their `(rows, cols)` shapes, in a fixed
    /// order. Vectors are reported as single-column blocks.
    pub fn blocks(&self) -> Vec<(String, (usize, usize), &[f64])> {
        let mut out = Vec::new();
        for (name, t) in [("word_embeddings", &self.word_embeddings), ("char_embeddings", &self.char_embeddings)] {
            if let Some(t) = t {
                out.push((name.to_string(), (t.vectors.rows(), t.vectors.cols()), t.vectors.as_slice()));
            }
        }
        if let Some(c) = &self.char_cnn {
            for (i, f) in c.filters.iter().enumerate() {
                out.push((format!("char_cnn.filter.{i}"), (f.rows(), f.cols()), f.as_slice()));
            }
            out.push(("char_cnn.bias".into(), (c.biases.dim(), 1), c.biases.as_slice()));
            out.push(("char_cnn.pad".into(), (c.pad_vector.dim(), 1), c.pad_vector.as_slice()));
        }
        if let Some(l) = &self.char_lstm {
            push_bilstm(&mut out, "char_lstm", l);
        }
        push_bilstm(&mut out, "encoder", &self.encoder);
        let p = &self.projection;
        out.push(("projection.weight".into(), (p.rows(), p.cols()), p.as_slice()));
        out.push(("projection.bias".into(), (self.projection_bias.dim(), 1), self.projection_bias.as_slice()));
        let a = self.transitions.params();
        out.push(("crf.transitions".into(), (a.rows(), a.cols()), a.as_slice()));
        out
    }

    /// Mutable view of the blocks, same names and order as [`Self::blocks`].
    pub fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        if let Some(t) = &mut self.word_embeddings {
            out.push(("word_embeddings".into(), t.vectors.as_mut_slice()));
        }
        if let Some(t) = &mut self.char_embeddings {
            out.push(("char_embeddings".into(), t.vectors.as_mut_slice()));
        }
        if let Some(c) = &mut self.char_cnn {
            for (i, f) in c.filters.iter_mut().enumerate() {
                out.push((format!("char_cnn.filter.{i}"), f.as_mut_slice()));
            }
            out.push(("char_cnn.bias".into(), c.biases.as_mut_slice()));
            out.push(("char_cnn.pad".into(), c.pad_vector.as_mut_slice()));
        }
        if let Some(l) = &mut self.char_lstm {
            push_bilstm_mut(&mut out, "char_lstm", l);
        }
        push_bilstm_mut(&mut out, "encoder", &mut self.encoder);
        out.push(("projection.weight".into(), self.projection.as_mut_slice()));
        out.push(("projection.bias".into(), self.projection_bias.as_mut_slice()));
        out.push(("crf.transitions".into(), self.transitions.params_mut().as_mut_slice()));
        out
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        self.blocks_mut().into_iter().find(|(n, _)| n == name).map(|(_, b)| b)
    }

    /// `θ ← θ - rate · g`. Frozen embedding tables are left untouched.
    pub fn apply_gradients(&mut self, grads: &Gradients, rate: f64) {
        for (table, g) in [
            (&mut self.word_embeddings, &grads.word_embeddings),
            (&mut self.char_embeddings, &grads.char_embeddings),
        ] {
            if let Some(t) = table {
                if t.trainable {
                    for (&row, d) in &g.rows {
                        axpy(-rate, d, t.row_mut(row));
                    }
                }
            }
        }
        let dense = grads.dense_blocks();
        for ((name, block), (gname, g)) in self
            .blocks_mut()
            .into_iter()
            .filter(|(n, _)| !n.ends_with("_embeddings"))
            .zip(dense)
        {
            debug_assert_eq!(name, gname);
            axpy(-rate, g, block);
        }
    }
}

fn push_bilstm<'a>(out: &mut Vec<(String, (usize, usize), &'a [f64])>, prefix: &str, p: &'a BiLstmParams) {
    for (dir, l) in [("fwd", &p.fwd), ("bwd", &p.bwd)] {
        for ((name, data), shape) in l.blocks().into_iter().zip(l.block_shapes()) {
            out.push((format!("{prefix}.{dir}.{name}"), shape, data));
        }
    }
}

fn push_bilstm_ref<'a>(out: &mut Vec<(String, &'a [f64])>, prefix: &str, p: &'a BiLstmParams) {
    for (dir, l) in [("fwd", &p.fwd), ("bwd", &p.bwd)] {
        for (name, data) in l.blocks() {
            out.push((format!("{prefix}.{dir}.{name}"), data));
        }
    }
}

fn push_bilstm_mut<'a>(out: &mut Vec<(String, &'a mut [f64])>, prefix: &str, p: &'a mut BiLstmParams) {
    for (dir, l) in [("fwd", &mut p.fwd), ("bwd", &mut p.bwd)] {
        for (name, data) in l.blocks_mut() {
            out.push((format!("{prefix}.{dir}.{name}"), data));
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum CharFeatureCache {
    Cnn(CnnCache),
    Lstm(BiTrace),
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    features: Vec<CharFeatureCache>,
    inputs: Vec<Vec<f64>>,
    masks: Option<Vec<Vec<f64>>>,
    trace: BiTrace,
    hidden: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// Bi-LSTM outputs per position.
    pub fn hidden(&self) -> &[Vec<f64>] {
        &self.hidden
    }
}

/// Gradient rows for the embedding rows a sentence touched. Rows are kept
/// ordered so reductions over them are deterministic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRows {
    pub dim: usize,
    pub rows: BTreeMap<usize, Vec<f64>>,
}

impl SparseRows {
    pub fn new(dim: usize) -> Self {
        SparseRows {
            dim,
            rows: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, row: usize, d: &[f64]) {
        let dim = self.dim;
        axpy(1.0, d, self.rows.entry(row).or_insert_with(|| vec![0.0; dim]));
    }

    /// Dense `rows × dim` materialization.
    pub fn to_dense(&self, rows: usize) -> Vec<f64> {
        let mut out = vec![0.0; rows * self.dim];
        for (&r, d) in &self.rows {
            out[r * self.dim..(r + 1) * self.dim].copy_from_slice(d);
        }
        out
    }
}

/// Loss gradients for every parameter block of a [`Model`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub word_embeddings: SparseRows,
    pub char_embeddings: SparseRows,
    pub char_cnn: Option<CnnParams>,
    pub char_lstm: Option<BiLstmParams>,
    pub encoder: BiLstmParams,
    pub projection: Matrix,
    pub projection_bias: Vector,
    pub transitions: Matrix,
}

impl Gradients {
    pub fn zeros_like(m: &Model) -> Self {
        let cnn = m.char_cnn.as_ref().map(|c| CnnParams::zeros(c.num_filters(), c.window, c.char_dim()));
        let bilstm = |p: &BiLstmParams| BiLstmParams {
            fwd: lstm::LstmParams::zeros(p.fwd.input_dim(), p.fwd.hidden_dim()),
            bwd: lstm::LstmParams::zeros(p.bwd.input_dim(), p.bwd.hidden_dim()),
        };
        Gradients {
            word_embeddings: SparseRows::new(m.word_embeddings.as_ref().map_or(0, EmbeddingTable::dim)),
            char_embeddings: SparseRows::new(m.char_embeddings.as_ref().map_or(0, EmbeddingTable::dim)),
            char_cnn: cnn,
            char_lstm: m.char_lstm.as_ref().map(bilstm),
            encoder: bilstm(&m.encoder),
            projection: Matrix::zeros(m.projection.rows(), m.projection.cols()),
            projection_bias: Vector::zeros(m.projection_bias.dim()),
            transitions: Matrix::zeros(m.transitions.params().rows(), m.transitions.params().cols()),
        }
    }

    /// Resets every entry to zero, keeping allocations.
    pub fn clear(&mut self) {
        self.word_embeddings.rows.clear();
        self.char_embeddings.rows.clear();
        for (_, b) in self.dense_blocks_mut() {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Non-embedding blocks, named and ordered as in [`Model::blocks`].
    pub fn dense_blocks(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        if let Some(c) = &self.char_cnn {
            for (i, f) in c.filters.iter().enumerate() {
                out.push((format!("char_cnn.filter.{i}"), f.as_slice()));
            }
            out.push(("char_cnn.bias".into(), c.biases.as_slice()));
            out.push(("char_cnn.pad".into(), c.pad_vector.as_slice()));
        }
        if let Some(l) = &self.char_lstm {
            push_bilstm_ref(&mut out, "char_lstm", l);
        }
        push_bilstm_ref(&mut out, "encoder", &self.encoder);
        out.push(("projection.weight".into(), self.projection.as_slice()));
        out.push(("projection.bias".into(), self.projection_bias.as_slice()));
        out.push(("crf.transitions".into(), self.transitions.as_slice()));
        out
    }

    fn dense_blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        if let Some(c) = &mut self.char_cnn {
            for (i, f) in c.filters.iter_mut().enumerate() {
                out.push((format!("char_cnn.filter.{i}"), f.as_mut_slice()));
            }
            out.push(("char_cnn.bias".into(), c.biases.as_mut_slice()));
            out.push(("char_cnn.pad".into(), c.pad_vector.as_mut_slice()));
        }
        if let Some(l) = &mut self.char_lstm {
            push_bilstm_mut(&mut out, "char_lstm", l);
        }
        push_bilstm_mut(&mut out, "encoder", &mut self.encoder);
        out.push(("projection.weight".into(), self.projection.as_mut_slice()));
        out.push(("projection.bias".into(), self.projection_bias.as_mut_slice()));
        out.push(("crf.transitions".into(), self.transitions.as_mut_slice()));
        out
    }

    /// Every block densified, named and ordered as in [`Model::blocks`].
    pub fn all_blocks(&self, model: &Model) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        if let Some(t) = &model.word_embeddings {
            out.push(("word_embeddings".to_string(), self.word_embeddings.to_dense(t.len())));
        }
        if let Some(t) = &model.char_embeddings {
            out.push(("char_embeddings".to_string(), self.char_embeddings.to_dense(t.len())));
        }
        out.extend(self.dense_blocks().into_iter().map(|(n, b)| (n, b.to_vec())));
        out
    }

    /// Squared global L2 norm over all blocks.
    pub fn norm_sq(&self) -> f64 {
        let sparse: f64 = [&self.word_embeddings, &self.char_embeddings]
            .iter()
            .flat_map(|s| s.rows.values())
            .map(|r| dot(r, r))
            .sum();
        let dense: f64 = self.dense_blocks().iter().map(|(_, b)| dot(b, b)).sum();
        sparse + dense
    }

    pub fn scale(&mut self, c: f64) {
        for s in [&mut self.word_embeddings, &mut self.char_embeddings] {
            for r in s.rows.values_mut() {
                r.iter_mut().for_each(|v| *v *= c);
            }
        }
        for (_, b) in self.dense_blocks_mut() {
            b.iter_mut().for_each(|v| *v *= c);
        }
    }

    /// Rescales so the global norm is at most `max_norm`; returns the norm
    /// before clipping.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.norm_sq().sqrt();
        if norm > max_norm {
            self.scale(max_norm / norm);
        }
        norm
    }
}
