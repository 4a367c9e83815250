use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use bilstm_crf_ner::data::{read_conll, EntityType};
use bilstm_crf_ner::embeddings::load_word2vec_text;
use bilstm_crf_ner::evaluation::extract_chunks;
use bilstm_crf_ner::synthetic::{bundled, write_toy_conll};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy").join(name)
}

#[test]
fn shipped_files_match_the_generator() {
    let (corpus, vectors) = bundled().unwrap();
    for (name, split) in [("train.conll", &corpus.train), ("dev.conll", &corpus.dev), ("test.conll", &corpus.test)] {
        let text = fs::read_to_string(data(name)).unwrap();
        assert_eq!(text, write_toy_conll(split), "{name} is stale; rerun the generate_toy_corpus example");
        assert_eq!(&read_conll(&text, 3).unwrap(), split);
    }
    let f = fs::File::open(data("vectors.txt")).unwrap();
    let loaded = load_word2vec_text(BufReader::new(f), None, 0).unwrap();
    assert_eq!(loaded.dim(), vectors.dim());
    for w in vectors.vocab.symbols().iter().filter(|w| !w.starts_with('<')) {
        assert_eq!(loaded.lookup(w), vectors.lookup(w), "{w}");
    }
}

#[test]
fn corpus_has_the_advertised_shape() {
    let (corpus, _) = bundled().unwrap();
    assert!(corpus.train.len() >= 500 && corpus.dev.len() >= 100);
    for t in EntityType::ALL {
        let n = corpus
            .train
            .iter()
            .flat_map(|s| extract_chunks(&s.gold_labels().unwrap()))
            .filter(|c| c.entity_type == t)
            .count();
        assert!(n >= 50, "{t}: {n} training mentions");
    }
    assert!(corpus.train.iter().flat_map(|s| &s.tokens).any(|t| t.surface.contains('_')));
}
