//! Trains the character-level model (Char-0) on the bundled toy corpus,
//! then tags a sentence character by character.
//!
//! ```text
//! cargo run --release --example train_char_model [-- <epochs>]
//! ```

use std::fs;
use std::path::PathBuf;

use bilstm_crf_ner::data::{read_conll, word_to_char, WordSentence, WordToken};
use bilstm_crf_ner::encoders::VariantKind;
use bilstm_crf_ner::training::{evaluate, predict, predict_chars, train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let epochs: usize = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(20);
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let load = |name: &str| -> bilstm_crf_ner::Result<_> { read_conll(&fs::read_to_string(dir.join(name))?, 3) };
    let (train_set, dev_set, test_set) = (load("train.conll")?, load("dev.conll")?, load("test.conll")?);

    let cfg = TrainConfig {
        max_epochs: epochs,
        ..TrainConfig::for_variant(VariantKind::Char0)
    };
    let model = train(&train_set, &dev_set, &cfg, None)?.checkpoint.model;
    println!("test F1 {:.2}", evaluate(&model, &test_set)?.overall.f1);

    let s = WordSentence::new(test_set[0].tokens.iter().map(|t| WordToken::unlabeled(t.surface.clone())).collect());
    let chars = predict_chars(&model, &word_to_char(&s))?;
    println!("{}", chars.text());
    println!("{}", chars.chars.iter().map(|c| c.predicted_label.unwrap().letter()).collect::<String>());
    for t in predict(&model, &s)?.tokens {
        println!("{:<16} {}", t.surface, t.predicted_label.unwrap());
    }
    Ok(())
}
