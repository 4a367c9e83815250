//! Symbol vocabularies and dense embedding tables.

use std::collections::HashMap;
use std::io::BufRead;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{normalize_token, NUMBER_TOKEN, PUNCT_TOKEN};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

pub const UNK: &str = "<unk>";
pub const PAD: &str = "<pad>";

/// Reserved symbols present in every vocabulary, in id order.
pub const SPECIALS: [&str; 4] = [UNK, NUMBER_TOKEN, PUNCT_TOKEN, PAD];

/// Bijective map between symbols and dense ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    /// A vocabulary holding only the reserved symbols.
    pub fn new() -> Self {
        let mut v = Vocabulary {
            symbols: Vec::new(),
            index: HashMap::new(),
        };
        for s in SPECIALS {
            v.insert(s);
        }
        v
    }

    /// Rebuilds a vocabulary from its id-ordered symbol list.
    pub fn from_symbols<I, S>(symbols: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary {
            symbols: Vec::new(),
            index: HashMap::new(),
        };
        for s in symbols {
            let s = s.into();
            if v.index.contains_key(&s) {
                return Err(Error::Contract(format!("duplicate vocabulary symbol {s:?}")));
            }
            v.insert(&s);
        }
        if v.symbols.len() < SPECIALS.len() || v.symbols[..SPECIALS.len()] != SPECIALS {
            return Err(Error::Contract("vocabulary does not start with the reserved symbols".into()));
        }
        Ok(v)
    }

    /// Adds `symbol` if absent and returns its id.
    pub fn insert(&mut self, symbol: &str) -> usize {
        if let Some(&id) = self.index.get(symbol) {
            return id;
        }
        let id = self.symbols.len();
        self.symbols.push(symbol.to_string());
        self.index.insert(symbol.to_string(), id);
        id
    }

    pub fn id(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    /// The id of `symbol`, or of the unknown-symbol entry.
    pub fn id_or_unk(&self, symbol: &str) -> usize {
        self.id(symbol).unwrap_or(0)
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.index.contains_key(symbol)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// The lookup key of a word: normalized, then lowercased.
pub fn word_key(surface: &str) -> String {
    normalize_token(surface).to_lowercase()
}

/// Bound `√(3/dim)` of the uniform initializer.
pub fn init_bound(dim: usize) -> f64 {
    (3.0 / dim as f64).sqrt()
}

/// One trainable vector per vocabulary symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub vocab: Vocabulary,
    pub vectors: Matrix,
    pub trainable: bool,
}

impl EmbeddingTable {
    pub fn new(vocab: Vocabulary, vectors: Matrix, trainable: bool) -> Result<Self> {
        if vectors.rows() != vocab.len() || vectors.cols() == 0 {
            return Err(Error::Shape(format!(
                "{} vocabulary entries but a {}x{} embedding matrix",
                vocab.len(),
                vectors.rows(),
                vectors.cols()
            )));
        }
        Ok(EmbeddingTable {
            vocab,
            vectors,
            trainable,
        })
    }

    /// Every entry drawn independently from `U[-√(3/dim), +√(3/dim)]`.
    pub fn random_init(vocab: Vocabulary, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("embedding dimension must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = Matrix::zeros(vocab.len(), dim);
        fill_uniform(vectors.as_mut_slice(), init_bound(dim), &mut rng);
        Ok(EmbeddingTable {
            vocab,
            vectors,
            trainable: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    /// The stored row for `symbol`, or the unknown-symbol row.
    pub fn lookup(&self, symbol: &str) -> Vector {
        Vector::from(self.row(self.vocab.id_or_unk(symbol)).to_vec())
    }

    pub fn row(&self, id: usize) -> &[f64] {
        self.vectors.row(id)
    }

    pub fn row_mut(&mut self, id: usize) -> &mut [f64] {
        self.vectors.row_mut(id)
    }

    /// Appends freshly initialized rows for every symbol not yet present.
    pub fn extend_random<'a, I>(&mut self, symbols: I, seed: u64) -> Result<()>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = init_bound(self.dim());
        let mut row = vec![0.0; self.dim()];
        for s in symbols {
            if self.vocab.contains(s) {
                continue;
            }
            self.vocab.insert(s);
            fill_uniform(&mut row, bound, &mut rng);
            self.vectors.push_row(&row)?;
        }
        Ok(())
    }
}

pub(crate) fn fill_uniform(out: &mut [f64], bound: f64, rng: &mut ChaCha8Rng) {
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    for v in out {
        *v = dist.sample(rng);
    }
}

/// Loads vectors in word2vec text format: a `count dim` header line, then
/// one `word v1 … v_dim` line per word.
///
/// With a filter the table covers exactly the filter's symbols, and symbols
/// missing from the file get random rows. Without one it covers the reserved
/// symbols followed by every word in the file. The first occurrence of a
/// repeated word wins.
pub fn load_word2vec_text<R: BufRead>(
    reader: R,
    vocab_filter: Option<&Vocabulary>,
    seed: u64,
) -> Result<EmbeddingTable> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing `count dim` header".into(),
                })
            }
        }
    };
    let header_err = |message: String| Error::Parse { line: 1, message };
    let mut fields = header.split_whitespace();
    let count: usize = fields
        .next()
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| header_err(format!("bad header {header:?}")))?;
    let dim: usize = fields
        .next()
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| header_err(format!("bad header {header:?}")))?;
    if fields.next().is_some() || dim == 0 {
        return Err(header_err(format!("bad header {header:?}")));
    }

    let mut found: Vec<(String, Vec<f64>)> = Vec::with_capacity(count);
    let mut seen = HashMap::new();
    for (i, line) in lines {
        let line = line?;
        let line_no = i + 1;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values = parts
            .map(|p| {
                p.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad value {p:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != dim {
            return Err(Error::Parse {
                line: line_no,
                message: format!("{} values for {word:?}, header says {dim}", values.len()),
            });
        }
        if seen.insert(word.to_string(), found.len()).is_none() {
            found.push((word.to_string(), values));
        }
    }
    if found.len() != count {
        return Err(Error::Parse {
            line: 1,
            message: format!("header announces {count} vectors, file has {}", found.len()),
        });
    }

    let vocab = match vocab_filter {
        Some(f) => f.clone(),
        None => {
            let mut v = Vocabulary::new();
            for (w, _) in &found {
                v.insert(w);
            }
            v
        }
    };
    let mut table = EmbeddingTable::random_init(vocab, dim, seed)?;
    for (word, values) in &found {
        if let Some(id) = table.vocab.id(word) {
            table.row_mut(id).copy_from_slice(values);
        }
    }
    Ok(table)
}

/// Writes a table in word2vec text format.
pub fn write_word2vec_text(table: &EmbeddingTable) -> String {
    let mut out = format!("{} {}\n", table.len(), table.dim());
    for (id, sym) in table.vocab.symbols().iter().enumerate() {
        out.push_str(sym);
        for v in table.row(id) {
            out.push(' ');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}
