//! Maximum-likelihood training of a tagger with per-sentence SGD, global
//! gradient-norm clipping, a decaying learning rate and early stopping on
//! development-set F1.

mod checkpoint;
mod config;

use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::TrainConfig;

use crate::crf::{crf_gradients, log_likelihood, viterbi_decode};
use crate::data::{char_to_word, word_to_char, CharLabel, CharSentence, Level, WordLabel, WordSentence};
use crate::embeddings::{word_key, EmbeddingTable, Vocabulary};
use crate::encoders::{Encoded, Gradients, Model};
use crate::error::{Error, Result};
use crate::evaluation::{score, EvalReport};

/// Vocabulary of lowercased, normalized word keys seen in `corpus`.
pub fn build_word_vocab(corpus: &[WordSentence]) -> Vocabulary {
    let mut v = Vocabulary::new();
    for t in corpus.iter().flat_map(|s| &s.tokens) {
        v.insert(&word_key(&t.surface));
    }
    v
}

/// Vocabulary of the characters of `corpus`, plus the word separator.
pub fn build_char_vocab(corpus: &[WordSentence]) -> Vocabulary {
    let mut v = Vocabulary::new();
    v.insert(" ");
    let mut buf = [0u8; 4];
    for t in corpus.iter().flat_map(|s| &s.tokens) {
        for c in t.surface.chars() {
            v.insert(c.encode_utf8(&mut buf));
        }
    }
    v
}

/// A freshly initialized model for `cfg.variant`, with vocabularies built
/// from the training corpus.
///
/// Pretrained variants keep every pretrained row and add random rows for
/// training words the table lacks; `Word-0` draws all rows at random.
pub fn build_model(train_set: &[WordSentence], cfg: &TrainConfig, pretrained: Option<&EmbeddingTable>) -> Result<Model> {
    cfg.validate()?;
    let variant = cfg.variant;
    let word_table = match variant.level() {
        Level::Char => None,
        Level::Word => {
            let vocab = build_word_vocab(train_set);
            let mut table = if variant.needs_pretrained() {
                let mut t = pretrained
                    .ok_or_else(|| Error::Config(format!("{variant} requires pretrained word embeddings")))?
                    .clone();
                t.extend_random(vocab.symbols().iter().map(String::as_str), cfg.seed ^ 0x5eed_0001)?;
                t
            } else {
                EmbeddingTable::random_init(vocab, cfg.dims.word_dim, cfg.seed ^ 0x5eed_0001)?
            };
            table.trainable = cfg.train_word_embeddings;
            Some(table)
        }
    };
    let char_vocab = variant.uses_char_embeddings().then(|| build_char_vocab(train_set));
    let mut model = Model::init(variant, &cfg.dims, word_table, char_vocab, cfg.seed)?;
    if cfg.constrain_transitions {
        model.constrain_transitions();
    }
    Ok(model)
}

/// `-log p(gold | sentence)` under `model`.
pub fn loss(model: &Model, sentence: &WordSentence) -> Result<f64> {
    let tags = model
        .gold_tags(sentence)
        .ok_or_else(|| Error::Contract("loss needs gold labels on every token".into()))?;
    let e = model.emit_sentence(sentence)?;
    Ok(-log_likelihood(&e, &model.transitions, &tags)?)
}

/// Loss and its gradient for every parameter block, accumulated into
/// `grads` (which is not cleared first).
pub fn loss_and_gradients(
    model: &Model,
    input: &Encoded,
    tags: &[usize],
    dropout: Option<(f64, &mut ChaCha8Rng)>,
    grads: &mut Gradients,
) -> Result<f64> {
    let (e, cache) = model.forward(input, dropout)?;
    let g = crf_gradients(&e, &model.transitions, tags)?;
    let mut d_e = g.d_emissions;
    d_e.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
    for (acc, d) in grads.transitions.as_mut_slice().iter_mut().zip(g.d_transitions.as_slice()) {
        *acc -= d;
    }
    model.backward(input, &cache, &d_e, grads);
    Ok(-g.log_likelihood)
}

/// Decodes one sentence, returning a copy with predicted labels filled in.
/// Character-level models are decoded per character and resolved back to
/// words.
pub fn predict(model: &Model, sentence: &WordSentence) -> Result<WordSentence> {
    let mut out = sentence.clone();
    if sentence.is_empty() {
        return Ok(out);
    }
    match model.variant.level() {
        Level::Word => {
            let e = model.emit_sentence(sentence)?;
            let (tags, _) = viterbi_decode(&e, &model.transitions)?;
            for (t, tag) in out.tokens.iter_mut().zip(tags) {
                t.predicted_label = Some(WordLabel::INVENTORY[tag]);
            }
        }
        Level::Char => {
            let chars = predict_chars(model, &word_to_char(sentence))?;
            let words = char_to_word(&chars)?;
            for (t, w) in out.tokens.iter_mut().zip(words.tokens) {
                t.predicted_label = w.predicted_label;
            }
        }
    }
    Ok(out)
}

/// Decodes a character sentence with a character-level model.
pub fn predict_chars(model: &Model, sentence: &CharSentence) -> Result<CharSentence> {
    if model.variant.level() != Level::Char {
        return Err(Error::Config(format!("{} is not a character-level model", model.variant)));
    }
    let mut out = sentence.clone();
    if sentence.is_empty() {
        return Ok(out);
    }
    let e = model.emit(&model.encode_chars(sentence))?;
    let (tags, _) = viterbi_decode(&e, &model.transitions)?;
    for (c, tag) in out.chars.iter_mut().zip(tags) {
        c.predicted_label = Some(CharLabel::INVENTORY[tag]);
    }
    Ok(out)
}

/// Tags a corpus in parallel; output order matches input order.
pub fn predict_corpus(model: &Model, corpus: &[WordSentence]) -> Result<Vec<WordSentence>> {
    corpus.par_iter().map(|s| predict(model, s)).collect()
}

/// Tags `corpus` and scores the result against its gold labels.
pub fn evaluate(model: &Model, corpus: &[WordSentence]) -> Result<EvalReport> {
    let pred = predict_corpus(model, corpus)?;
    score(corpus, &pred, None)
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean per-sentence loss over the epoch.
    pub train_loss: f64,
    pub dev_precision: f64,
    pub dev_recall: f64,
    pub dev_f1: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochLog>,
}

/// Trains `cfg.variant` on `train_set`, selecting the epoch with the best
/// development F1 and stopping after `cfg.patience` epochs without
/// improvement, or as soon as dev F1 reaches 100 (no later epoch could
/// replace it). Epoch 0 is the initialized model.
pub fn train(
    train_set: &[WordSentence],
    dev_set: &[WordSentence],
    cfg: &TrainConfig,
    pretrained: Option<&EmbeddingTable>,
) -> Result<TrainOutcome> {
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(Error::Contract("training and development corpora must be non-empty".into()));
    }
    let mut model = build_model(train_set, cfg, pretrained)?;
    let examples = train_set
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .map(|(i, s)| {
            let tags = model
                .gold_tags(s)
                .ok_or_else(|| Error::Contract(format!("training sentence {i} lacks gold labels")))?;
            Ok((i, model.encode(s)?, tags))
        })
        .collect::<Result<Vec<_>>>()?;

    let initial = evaluate(&model, dev_set)?;
    let mut best = Checkpoint {
        config: cfg.clone(),
        model: model.clone(),
        epoch: 0,
        dev_f1: initial.overall.f1,
    };
    let mut history = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x7261_696e));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut grads = Gradients::zeros_like(&model);
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let rate = cfg.learning_rate / (1.0 + cfg.lr_decay * (epoch - 1) as f64);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &j in &order {
            let (sentence, input, tags) = &examples[j];
            grads.clear();
            let dropout = (cfg.dropout > 0.0).then_some((cfg.dropout, &mut rng));
            let l = loss_and_gradients(&model, input, tags, dropout, &mut grads)?;
            if !l.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    sentence: *sentence,
                    loss: l,
                });
            }
            total += l;
            // Clipping folded into the step size.
            let norm = grads.norm_sq().sqrt();
            let scale = if norm > cfg.clip_norm { cfg.clip_norm / norm } else { 1.0 };
            model.apply_gradients(&grads, rate * scale);
        }
        let report = evaluate(&model, dev_set)?;
        let log = EpochLog {
            epoch,
            learning_rate: rate,
            train_loss: total / examples.len().max(1) as f64,
            dev_precision: report.overall.precision,
            dev_recall: report.overall.recall,
            dev_f1: report.overall.f1,
            seconds: started.elapsed().as_secs_f64(),
        };
        info!(
            "{} epoch {:>3}  lr {:.5}  loss {:>9.4}  dev P {:6.2} R {:6.2} F1 {:6.2}  ({:.1}s)",
            cfg.variant, log.epoch, log.learning_rate, log.train_loss, log.dev_precision, log.dev_recall, log.dev_f1, log.seconds
        );
        history.push(log);
        if report.overall.f1 > best.dev_f1 {
            best = Checkpoint {
                config: cfg.clone(),
                model: model.clone(),
                epoch,
                dev_f1: report.overall.f1,
            };
            stale = 0;
            if best.dev_f1 >= 100.0 {
                debug!("perfect dev F1, stopping");
                break;
            }
        } else {
            stale += 1;
            if stale >= cfg.patience {
                debug!("no dev improvement for {stale} epochs, stopping");
                break;
            }
        }
    }
    Ok(TrainOutcome {
        checkpoint: best,
        history,
    })
}

/// Splits off a seeded random `fraction` of `corpus` as a development set.
/// Returns `(train, dev)`; both are non-empty when the corpus has at least
/// two sentences.
pub fn split_dev(corpus: &[WordSentence], fraction: f64, seed: u64) -> Result<(Vec<WordSentence>, Vec<WordSentence>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    if corpus.len() < 2 {
        return Err(Error::Contract("need at least two sentences to split".into()));
    }
    let mut idx: Vec<usize> = (0..corpus.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_dev = ((corpus.len() as f64 * fraction).round() as usize).clamp(1, corpus.len() - 1);
    let mut dev_idx = idx[..n_dev].to_vec();
    let mut train_idx = idx[n_dev..].to_vec();
    dev_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((
        train_idx.into_iter().map(|i| corpus[i].clone()).collect(),
        dev_idx.into_iter().map(|i| corpus[i].clone()).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{Dims, ModelVariant, VariantKind};

    fn tiny_cfg(kind: VariantKind) -> TrainConfig {
        TrainConfig {
            variant: ModelVariant::new(kind),
            dims: Dims {
                word_dim: 4,
                char_dim: 3,
                word_hidden: 3,
                cnn_filters: 2,
                cnn_window: 3,
                char_hidden: 2,
                char_model_hidden: 3,
            },
            dropout: 0.0,
            ..TrainConfig::default()
        }
    }

    fn corpus() -> Vec<WordSentence> {
        vec![
            WordSentence::from_pairs(&[("ông", "O"), ("Lê_Lợi", "B-PER"), ("ở", "O"), ("Huế", "B-LOC")]).unwrap(),
            WordSentence::from_pairs(&[("công_ty", "O"), ("FPT", "B-ORG")]).unwrap(),
        ]
    }

    #[test]
    fn uniform_model_loss_is_t_log_k() {
        let cfg = tiny_cfg(VariantKind::Word0);
        let mut m = build_model(&corpus(), &cfg, None).unwrap();
        m.projection.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
        let s = &corpus()[0];
        assert!((loss(&m, s).unwrap() - 4.0 * 9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let cfg = TrainConfig {
            max_epochs: 0,
            ..tiny_cfg(VariantKind::Word0)
        };
        let out = train(&corpus(), &corpus(), &cfg, None).unwrap();
        assert_eq!(out.checkpoint.model, build_model(&corpus(), &cfg, None).unwrap());
        assert_eq!(out.checkpoint.epoch, 0);
        assert!(out.history.is_empty());
    }

    #[test]
    fn pretrained_variants_require_a_table() {
        let cfg = tiny_cfg(VariantKind::Word2);
        assert!(matches!(build_model(&corpus(), &cfg, None), Err(Error::Config(_))));
    }

    #[test]
    fn char_model_predicts_word_labels() {
        let cfg = tiny_cfg(VariantKind::Char0);
        let m = build_model(&corpus(), &cfg, None).unwrap();
        let p = predict(&m, &corpus()[0]).unwrap();
        assert!(p.tokens.iter().all(|t| t.predicted_label.is_some()));
        assert!(predict_chars(&build_model(&corpus(), &tiny_cfg(VariantKind::Word0), None).unwrap(), &word_to_char(&corpus()[0])).is_err());
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let c: Vec<WordSentence> = (0..20)
            .map(|i| WordSentence::from_pairs(&[(&format!("w{i}"), "O")]).unwrap())
            .collect();
        let (tr, dev) = split_dev(&c, 0.25, 3).unwrap();
        assert_eq!((tr.len(), dev.len()), (15, 5));
        assert_eq!(split_dev(&c, 0.25, 3).unwrap().1, dev);
        assert!(dev.iter().all(|d| !tr.contains(d)));
        assert!(split_dev(&c, 1.0, 3).is_err());
        assert!(split_dev(&c[..1], 0.5, 3).is_err());
    }

    #[test]
    fn clipping_bounds_the_global_norm() {
        let cfg = tiny_cfg(VariantKind::Word2);
        let pre = EmbeddingTable::random_init(build_word_vocab(&corpus()), 4, 9).unwrap();
        let m = build_model(&corpus(), &cfg, Some(&pre)).unwrap();
        let s = &corpus()[0];
        let mut g = Gradients::zeros_like(&m);
        loss_and_gradients(&m, &m.encode(s).unwrap(), &m.gold_tags(s).unwrap(), None, &mut g).unwrap();
        let before = g.clip_norm(1e-3);
        assert!(before > 1e-3);
        assert!(g.norm_sq().sqrt() <= 1e-3 + 1e-12);
    }
}
