//! Trains Word-2 (pretrained vectors plus CNN character features) on the
//! bundled toy corpus and scores it on the test split.
//!
//! ```text
//! cargo run --release --example train_word_model [-- <variant> <epochs>]
//! ```

use std::fs::{self, File};
use std::io::BufReader;
use std::path::PathBuf;

use bilstm_crf_ner::data::read_conll;
use bilstm_crf_ner::embeddings::load_word2vec_text;
use bilstm_crf_ner::encoders::VariantKind;
use bilstm_crf_ner::evaluation::format_report;
use bilstm_crf_ner::training::{evaluate, train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let kind: VariantKind = args.next().as_deref().unwrap_or("Word-2").parse()?;
    let epochs: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(20);

    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let load = |name: &str| -> bilstm_crf_ner::Result<_> { read_conll(&fs::read_to_string(dir.join(name))?, 3) };
    let (train_set, dev_set, test_set) = (load("train.conll")?, load("dev.conll")?, load("test.conll")?);
    let cfg = TrainConfig {
        max_epochs: epochs,
        ..TrainConfig::for_variant(kind)
    };
    let vectors = load_word2vec_text(BufReader::new(File::open(dir.join("vectors.txt"))?), None, cfg.seed)?;

    let out = train(&train_set, &dev_set, &cfg, Some(&vectors))?;
    println!("best dev F1 {:.2} at epoch {}", out.checkpoint.dev_f1, out.checkpoint.epoch);
    print!("{}", format_report(&evaluate(&out.checkpoint.model, &test_set)?));
    Ok(())
}
