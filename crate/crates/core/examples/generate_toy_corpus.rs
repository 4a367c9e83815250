//! Regenerates the bundled toy corpus and word vectors.
//!
//! ```text
//! cargo run --example generate_toy_corpus [-- <output-dir>]
//! ```
//!
//! Writes `train.conll`, `dev.conll`, `test.conll` (five columns, NE tag in
//! the fourth) and `vectors.txt` (word2vec text format). The default output
//! directory is the crate's `data/toy/`.

use std::fs;
use std::path::PathBuf;

use bilstm_crf_ner::data::EntityType;
use bilstm_crf_ner::embeddings::write_word2vec_text;
use bilstm_crf_ner::synthetic::{bundled, write_toy_conll};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy"));
    fs::create_dir_all(&dir)?;
    let (corpus, vectors) = bundled()?;
    for (name, split) in [("train", &corpus.train), ("dev", &corpus.dev), ("test", &corpus.test)] {
        fs::write(dir.join(format!("{name}.conll")), write_toy_conll(split))?;
        let mentions: usize = split
            .iter()
            .flat_map(|s| &s.tokens)
            .filter(|t| matches!(t.gold_label, Some(l) if l.to_string().starts_with("B-")))
            .count();
        println!("{name}: {} sentences, {mentions} entity mentions", split.len());
    }
    fs::write(dir.join("vectors.txt"), write_word2vec_text(&vectors))?;
    println!("vectors: {} words, dimension {}", vectors.len(), vectors.dim());
    for ty in EntityType::ALL {
        let n = corpus.lexicon.iter().filter(|(t, _)| *t == ty).count();
        println!("{ty:>4} names: {n}");
    }
    println!("wrote {}", dir.display());
    Ok(())
}
