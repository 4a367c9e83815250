//! Trains all five variants on the bundled toy corpus with the same budget
//! and prints a comparison table.
//!
//! ```text
//! cargo run --release --example compare_variants [-- <epochs>]
//! ```

use std::fs::{self, File};
use std::io::BufReader;
use std::path::PathBuf;
use std::time::Instant;

use bilstm_crf_ner::data::{read_conll, EntityType};
use bilstm_crf_ner::embeddings::load_word2vec_text;
use bilstm_crf_ner::encoders::VariantKind;
use bilstm_crf_ner::training::{evaluate, train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs: usize = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(10);
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let load = |name: &str| -> bilstm_crf_ner::Result<_> { read_conll(&fs::read_to_string(dir.join(name))?, 3) };
    let (train_set, dev_set, test_set) = (load("train.conll")?, load("dev.conll")?, load("test.conll")?);

    println!("{:<8}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}{:>9}", "variant", "LOC", "MISC", "ORG", "PER", "ALL", "epoch", "seconds");
    for kind in VariantKind::ALL {
        let cfg = TrainConfig {
            max_epochs: epochs,
            ..TrainConfig::for_variant(kind)
        };
        let vectors = load_word2vec_text(BufReader::new(File::open(dir.join("vectors.txt"))?), None, cfg.seed)?;
        let started = Instant::now();
        let out = train(&train_set, &dev_set, &cfg, Some(&vectors))?;
        let r = evaluate(&out.checkpoint.model, &test_set)?;
        print!("{kind:<8}");
        for t in EntityType::ALL {
            print!("{:>8.2}", r.per_type[&t].f1);
        }
        println!("{:>8.2}{:>8}{:>9.1}", r.overall.f1, out.checkpoint.epoch, started.elapsed().as_secs_f64());
    }
    Ok(())
}
