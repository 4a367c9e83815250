//! Saves a trained model, loads it back and checks that both copies tag a
//! corpus identically.
//!
//! ```text
//! cargo run --release --example checkpoint
//! ```

use std::fs;
use std::path::PathBuf;

use bilstm_crf_ner::data::read_conll;
use bilstm_crf_ner::encoders::VariantKind;
use bilstm_crf_ner::training::{load_checkpoint, predict_corpus, save_checkpoint, train, TrainConfig, CHECKPOINT_MAGIC};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let train_set: Vec<_> = read_conll(&fs::read_to_string(dir.join("train.conll"))?, 3)?.into_iter().take(300).collect();
    let dev_set = read_conll(&fs::read_to_string(dir.join("dev.conll"))?, 3)?;
    let mut cfg = TrainConfig::for_variant(VariantKind::Word0);
    cfg.max_epochs = 12;
    cfg.dims.word_dim = 32;
    cfg.dims.word_hidden = 32;
    let ckpt = train(&train_set, &dev_set, &cfg, None)?.checkpoint;

    let path = std::env::temp_dir().join("toy-word0.ckpt");
    save_checkpoint(&ckpt, fs::File::create(&path)?)?;
    let bytes = fs::read(&path)?;
    println!("{}: {} bytes, magic {:?}", path.display(), bytes.len(), std::str::from_utf8(&bytes[..8])?);
    assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);

    let back = load_checkpoint(bytes.as_slice())?;
    println!("epoch {} dev F1 {:.2}", back.epoch, back.dev_f1);
    let same = predict_corpus(&ckpt.model, &dev_set)? == predict_corpus(&back.model, &dev_set)?;
    println!("identical predictions after reload: {same}");
    fs::remove_file(&path)?;
    Ok(())
}
