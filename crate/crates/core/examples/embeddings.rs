//! Loading word2vec text vectors, token normalization and OOV lookup.
//!
//! ```text
//! cargo run --example embeddings
//! ```

use std::io::Cursor;

use bilstm_crf_ner::data::normalize_token;
use bilstm_crf_ner::embeddings::{load_word2vec_text, word_key, Vocabulary, UNK};

const VECTORS: &str = "\
4 3
hà_nội 0.1 0.2 0.3
huế 0.2 0.1 0.0
number 0.0 0.0 1.0
punct -1.0 0.0 0.0
";

fn main() -> bilstm_crf_ner::Result<()> {
    let table = load_word2vec_text(Cursor::new(VECTORS), None, 42)?;
    println!("{} rows of dimension {}", table.len(), table.dim());
    for w in ["Hà_Nội", "HUẾ", "2016", "3,5", "...", "Đà_Lạt"] {
        let key = word_key(w);
        let known = if table.vocab.contains(&key) { key.as_str() } else { UNK };
        println!("{w:>8} -> {:<8} {:<8} {:?}", normalize_token(w), known, table.lookup(&key).as_slice());
    }

    // A filter restricts the table to a model vocabulary; missing words get
    // seeded random rows.
    let mut vocab = Vocabulary::new();
    vocab.insert("huế");
    vocab.insert("sài_gòn");
    let filtered = load_word2vec_text(Cursor::new(VECTORS), Some(&vocab), 42)?;
    println!("filtered: {:?}", filtered.vocab.symbols());
    Ok(())
}
