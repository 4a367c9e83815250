//! Compares the analytic gradient of a small Word-2 tagger against central
//! finite differences, block by block.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use bilstm_crf_ner::crf::log_likelihood;
use bilstm_crf_ner::data::WordSentence;
use bilstm_crf_ner::embeddings::EmbeddingTable;
use bilstm_crf_ner::encoders::{Dims, Gradients, ModelVariant, VariantKind};
use bilstm_crf_ner::numerics::{grad_check, Vector};
use bilstm_crf_ner::training::{build_model, build_word_vocab, loss_and_gradients, TrainConfig};

fn main() -> bilstm_crf_ner::Result<()> {
    let corpus = vec![WordSentence::from_pairs(&[("Ông", "O"), ("Lê_Lợi", "B-PER"), ("ở", "O"), ("Huế", "B-LOC")])?];
    let cfg = TrainConfig {
        variant: ModelVariant::new(VariantKind::Word2),
        dims: Dims {
            word_dim: 4,
            char_dim: 3,
            word_hidden: 3,
            cnn_filters: 2,
            cnn_window: 3,
            char_hidden: 2,
            char_model_hidden: 3,
        },
        ..TrainConfig::default()
    };
    let pre = EmbeddingTable::random_init(build_word_vocab(&corpus), 4, 1)?;
    let model = build_model(&corpus, &cfg, Some(&pre))?;
    let input = model.encode(&corpus[0])?;
    let tags = model.gold_tags(&corpus[0]).unwrap();

    let mut grads = Gradients::zeros_like(&model);
    let loss = loss_and_gradients(&model, &input, &tags, None, &mut grads)?;
    println!("loss {loss:.6}");
    for (name, g) in grads.all_blocks(&model) {
        let values: Vec<f64> = model.blocks().into_iter().find(|(n, _, _)| *n == name).unwrap().2.to_vec();
        let mut probe = model.clone();
        let f = |p: &Vector| {
            probe.block_mut(&name).unwrap().copy_from_slice(p.as_slice());
            -log_likelihood(&probe.emit(&input).unwrap(), &probe.transitions, &tags).unwrap()
        };
        let err = grad_check(f, &Vector::from(values), &Vector::from(g), 1e-5)?;
        println!("{name:<24} {err:.2e}");
    }
    Ok(())
}
