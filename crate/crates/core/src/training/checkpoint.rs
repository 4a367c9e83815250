//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic      8 bytes   "BLCRFNER"
//! version    u32
//! config     u64 length + UTF-8 `key=value` lines
//! tables     u32 count, then per table:
//!              name (u32 length + UTF-8), u64 entry count,
//!              entries (u32 length + UTF-8 each)
//! blocks     u32 count, then per block:
//!              name (u32 length + UTF-8), u64 rows, u64 cols,
//!              rows · cols f64 values
//! ```
//!
//! The string tables hold the vocabularies; the blocks hold every parameter
//! in [`Model::blocks`] order.

use std::collections::HashMap;
use std::io::{Read, Write};

use super::TrainConfig;
use crate::embeddings::Vocabulary;
use crate::encoders::Model;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"BLCRFNER";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with the configuration and dev score it was selected by.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub model: Model,
    pub epoch: usize,
    pub dev_f1: f64,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

/// Serializes `c` to `sink`.
pub fn save_checkpoint<W: Write>(c: &Checkpoint, mut sink: W) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut buf, CHECKPOINT_VERSION);

    let mut cfg = c.config.clone();
    if let Some(t) = &c.model.word_embeddings {
        cfg.dims.word_dim = t.dim();
        cfg.train_word_embeddings = t.trainable;
    }
    cfg.constrain_transitions = c.model.transitions.is_masked();
    let text = format!("{}epoch={}\ndev_f1={}\n", cfg.to_kv(), c.epoch, c.dev_f1);
    put_u64(&mut buf, text.len() as u64);
    buf.extend_from_slice(text.as_bytes());

    let tables: Vec<(&str, &Vocabulary)> = [
        ("word_vocab", c.model.word_embeddings.as_ref().map(|t| &t.vocab)),
        ("char_vocab", c.model.char_embeddings.as_ref().map(|t| &t.vocab)),
    ]
    .into_iter()
    .filter_map(|(n, v)| v.map(|v| (n, v)))
    .collect();
    put_u32(&mut buf, tables.len() as u32);
    for (name, vocab) in tables {
        put_str(&mut buf, name);
        put_u64(&mut buf, vocab.len() as u64);
        for s in vocab.symbols() {
            put_str(&mut buf, s);
        }
    }

    let blocks = c.model.blocks();
    put_u32(&mut buf, blocks.len() as u32);
    for (name, (rows, cols), data) in blocks {
        put_str(&mut buf, &name);
        put_u64(&mut buf, rows as u64);
        put_u64(&mut buf, cols as u64);
        for v in data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    sink.write_all(&buf)?;
    sink.flush()?;
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self, wide: bool) -> Result<usize> {
        let n = if wide { self.u64()? } else { self.u32()? as u64 };
        usize::try_from(n)
            .ok()
            .filter(|&n| n <= self.data.len() - self.pos)
            .ok_or_else(|| Error::Checkpoint(format!("implausible length {n} at byte {}", self.pos)))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.len(false)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint<R: Read>(mut source: R) -> Result<Checkpoint> {
    let mut data = Vec::new();
    source.read_to_end(&mut data)?;
    let mut r = Reader { data: &data, pos: 0 };
    if r.take(8).ok() != Some(CHECKPOINT_MAGIC.as_slice()) {
        return Err(Error::Checkpoint("not a checkpoint (bad magic bytes)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let n = r.len(true)?;
    let text = std::str::from_utf8(r.take(n)?).map_err(|_| Error::Checkpoint("invalid UTF-8 in config".into()))?;
    let mut config = TrainConfig::default();
    let extra = config
        .apply_kv(text, false)
        .map_err(|e| Error::Checkpoint(format!("bad config block: {e}")))?;
    let mut epoch = None;
    let mut dev_f1 = None;
    for (k, v) in extra {
        match k.as_str() {
            "epoch" => epoch = v.parse().ok(),
            "dev_f1" => dev_f1 = v.parse().ok(),
            _ => return Err(Error::Checkpoint(format!("unknown config key {k:?}"))),
        }
    }
    let (epoch, dev_f1) = epoch
        .zip(dev_f1)
        .ok_or_else(|| Error::Checkpoint("config block lacks epoch or dev_f1".into()))?;

    let mut tables = HashMap::new();
    for _ in 0..r.u32()? {
        let name = r.string()?;
        let count = r.len(true)?;
        let symbols = (0..count).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        let vocab = Vocabulary::from_symbols(symbols).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
        tables.insert(name, vocab);
    }
    let mut model = Model::zeros(
        config.variant,
        &config.dims,
        tables.remove("word_vocab"),
        tables.remove("char_vocab"),
    )
    .map_err(|e| Error::Checkpoint(format!("inconsistent checkpoint: {e}")))?;

    let expected: HashMap<String, (usize, usize)> =
        model.blocks().into_iter().map(|(name, shape, _)| (name, shape)).collect();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(Error::Checkpoint(format!(
            "{count} parameter blocks, {} expected for {}",
            expected.len(),
            config.variant
        )));
    }
    let mut blocks = HashMap::new();
    for _ in 0..count {
        let name = r.string()?;
        let rows = r.len(true)?;
        let cols = r.len(true)?;
        if expected.get(&name) != Some(&(rows, cols)) {
            return Err(Error::Checkpoint(format!(
                "block {name:?} has shape {rows}x{cols}, expected {:?}",
                expected.get(&name)
            )));
        }
        let bytes = r.take(rows * cols * 8)?;
        let values: Vec<f64> = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        blocks.insert(name, values);
    }
    if r.pos != data.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", data.len() - r.pos)));
    }
    for (name, dst) in model.blocks_mut() {
        let src = blocks
            .get(&name)
            .ok_or_else(|| Error::Checkpoint(format!("missing block {name:?}")))?;
        dst.copy_from_slice(src);
    }
    if let Some(t) = &mut model.word_embeddings {
        t.trainable = config.train_word_embeddings;
    }
    if config.constrain_transitions {
        model.constrain_transitions();
    }
    model.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(Checkpoint {
        config,
        model,
        epoch,
        dev_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::WordSentence;
    use crate::embeddings::EmbeddingTable;
    use crate::encoders::{Dims, ModelVariant, VariantKind};
    use crate::training::{build_model, build_word_vocab};

    fn checkpoint(kind: VariantKind) -> Checkpoint {
        let corpus = vec![WordSentence::from_pairs(&[("Ông", "O"), ("Lê_Lợi", "B-PER"), ("ở", "O"), ("Huế", "B-LOC")]).unwrap()];
        let config = TrainConfig {
            variant: ModelVariant::new(kind),
            dims: Dims {
                word_dim: 5,
                char_dim: 3,
                word_hidden: 4,
                cnn_filters: 2,
                cnn_window: 3,
                char_hidden: 2,
                char_model_hidden: 3,
            },
            constrain_transitions: kind == VariantKind::Word1,
            ..TrainConfig::default()
        };
        let pre = EmbeddingTable::random_init(build_word_vocab(&corpus), 6, 1).unwrap();
        let model = build_model(&corpus, &config, Some(&pre)).unwrap();
        Checkpoint {
            config,
            model,
            epoch: 3,
            dev_f1: 87.123456789,
        }
    }

    fn bytes(c: &Checkpoint) -> Vec<u8> {
        let mut out = Vec::new();
        save_checkpoint(c, &mut out).unwrap();
        out
    }

    #[test]
    fn round_trip_every_variant() {
        for kind in VariantKind::ALL {
            let c = checkpoint(kind);
            let b = bytes(&c);
            let back = load_checkpoint(b.as_slice()).unwrap();
            assert_eq!(back.model, c.model, "{kind}");
            assert_eq!(back.epoch, 3);
            assert_eq!(back.dev_f1, c.dev_f1);
            assert_eq!(bytes(&back), b, "{kind}");
        }
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let b = bytes(&checkpoint(VariantKind::Word2));
        let mut bad_magic = b.clone();
        bad_magic[0] = b'X';
        assert!(matches!(load_checkpoint(bad_magic.as_slice()), Err(Error::Checkpoint(_))));
        let mut bad_version = b.clone();
        bad_version[8] = 99;
        assert!(matches!(load_checkpoint(bad_version.as_slice()), Err(Error::Checkpoint(_))));
        for cut in [4, 20, b.len() / 2, b.len() - 1] {
            assert!(load_checkpoint(&b[..cut]).is_err(), "cut at {cut}");
        }
        let mut trailing = b.clone();
        trailing.push(0);
        assert!(load_checkpoint(trailing.as_slice()).is_err());
        assert!(load_checkpoint(&[][..]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let c = checkpoint(VariantKind::Word0);
        let b = bytes(&c);
        // Rewrite word_hidden=4 to word_hidden=5 in the config block.
        let text = String::from_utf8_lossy(&b).into_owned();
        let at = text.find("word_hidden=4").unwrap() + "word_hidden=".len();
        let mut bad = b.clone();
        bad[at] = b'5';
        assert!(matches!(load_checkpoint(bad.as_slice()), Err(Error::Checkpoint(_))));
    }
}
