//! Character-level word features: CNN with max pooling and the final
//! states of a character Bi-LSTM.
//!
//! ```text
//! cargo run --example char_features -- Nguyễn_Du
//! ```

use bilstm_crf_ner::embeddings::{EmbeddingTable, Vocabulary};
use bilstm_crf_ner::encoders::{char_cnn_features, char_lstm_features, CnnParams, LstmParams};
use bilstm_crf_ner::numerics::Vector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn show(name: &str, v: &Vector) {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:+.3}")).collect();
    println!("{name:>5} ({:>2}): [{}]", v.dim(), parts.join(" "));
}

fn main() -> bilstm_crf_ner::Result<()> {
    let word = std::env::args().nth(1).unwrap_or_else(|| "Hà_Nội".to_string());
    let chars: Vec<String> = word.chars().map(String::from).collect();
    let mut vocab = Vocabulary::new();
    for c in &chars {
        vocab.insert(c);
    }
    let table = EmbeddingTable::random_init(vocab, 8, 7)?;
    let xs: Vec<Vector> = chars.iter().map(|c| table.lookup(c)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cnn = CnnParams::init(6, 3, 8, &mut rng);
    let fwd = LstmParams::init(8, 3, &mut rng);
    let bwd = LstmParams::init(8, 3, &mut rng);
    println!("{word}: {} characters", xs.len());
    show("cnn", &char_cnn_features(&cnn, &xs)?);
    show("lstm", &char_lstm_features(&fwd, &bwd, &xs)?);
    Ok(())
}
