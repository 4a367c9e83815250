//! CoNLL corpus handling: label schemes, reading and writing, token
//! normalization and the conversion between word-level IOB sentences and
//! character-level sentences.
//!
//! At character level every character of a word carries the single-letter
//! code of its entity type (`P`, `L`, `G`, `M`) or `O`, and the single space
//! inserted between consecutive words is always `O`.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use unicode_general_category::{get_general_category, GeneralCategory};

use crate::error::{Error, Result};

/// Surface used for any token containing a decimal digit.
pub const NUMBER_TOKEN: &str = "number";
/// Surface used for tokens made only of punctuation or symbols.
pub const PUNCT_TOKEN: &str = "punct";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityType {
    Loc,
    Misc,
    Org,
    Per,
}

impl EntityType {
    /// Report order: LOC, MISC, ORG, PER.
    pub const ALL: [EntityType; 4] = [
        EntityType::Loc,
        EntityType::Misc,
        EntityType::Org,
        EntityType::Per,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Loc => "LOC",
            EntityType::Misc => "MISC",
            EntityType::Org => "ORG",
            EntityType::Per => "PER",
        }
    }

    /// The character-level code of the type.
    pub fn letter(self) -> char {
        match self {
            EntityType::Per => 'P',
            EntityType::Loc => 'L',
            EntityType::Org => 'G',
            EntityType::Misc => 'M',
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LOC" => Ok(EntityType::Loc),
            "MISC" => Ok(EntityType::Misc),
            "ORG" => Ok(EntityType::Org),
            "PER" => Ok(EntityType::Per),
            _ => Err(Error::Config(format!("unknown entity type {s:?}"))),
        }
    }
}

/// A word-level IOB label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WordLabel {
    Begin(EntityType),
    Inside(EntityType),
    Outside,
}

impl WordLabel {
    /// The nine-label inventory in tag-id order.
    pub const INVENTORY: [WordLabel; 9] = [
        WordLabel::Outside,
        WordLabel::Begin(EntityType::Per),
        WordLabel::Inside(EntityType::Per),
        WordLabel::Begin(EntityType::Org),
        WordLabel::Inside(EntityType::Org),
        WordLabel::Begin(EntityType::Loc),
        WordLabel::Inside(EntityType::Loc),
        WordLabel::Begin(EntityType::Misc),
        WordLabel::Inside(EntityType::Misc),
    ];

    pub fn entity_type(self) -> Option<EntityType> {
        match self {
            WordLabel::Begin(t) | WordLabel::Inside(t) => Some(t),
            WordLabel::Outside => None,
        }
    }

    pub fn char_label(self) -> CharLabel {
        CharLabel(self.entity_type())
    }

    pub fn index(self) -> usize {
        Self::INVENTORY.iter().position(|&l| l == self).unwrap()
    }
}

impl fmt::Display for WordLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WordLabel::Begin(t) => f.pad(&format!("B-{t}")),
            WordLabel::Inside(t) => f.pad(&format!("I-{t}")),
            WordLabel::Outside => f.pad("O"),
        }
    }
}

impl FromStr for WordLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(WordLabel::Outside);
        }
        let bad = || Error::Config(format!("unknown label {s:?}"));
        let (prefix, ty) = s.split_once('-').ok_or_else(bad)?;
        let ty: EntityType = ty.parse().map_err(|_| bad())?;
        match prefix {
            "B" => Ok(WordLabel::Begin(ty)),
            "I" => Ok(WordLabel::Inside(ty)),
            _ => Err(bad()),
        }
    }
}

/// A character-level label: an entity type letter or `O`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CharLabel(pub Option<EntityType>);

impl CharLabel {
    pub const O: CharLabel = CharLabel(None);

    /// The five-label inventory in tag-id order: O, P, L, G, M.
    pub const INVENTORY: [CharLabel; 5] = [
        CharLabel(None),
        CharLabel(Some(EntityType::Per)),
        CharLabel(Some(EntityType::Loc)),
        CharLabel(Some(EntityType::Org)),
        CharLabel(Some(EntityType::Misc)),
    ];

    pub fn letter(self) -> char {
        self.0.map_or('O', EntityType::letter)
    }

    pub fn from_letter(c: char) -> Option<CharLabel> {
        Self::INVENTORY.iter().copied().find(|l| l.letter() == c)
    }

    pub fn index(self) -> usize {
        Self::INVENTORY.iter().position(|&l| l == self).unwrap()
    }
}

impl fmt::Display for CharLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.letter().encode_utf8(&mut [0; 4]))
    }
}

/// Whether a model works over words or characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Word,
    Char,
}

/// The ordered tag inventory a model predicts over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelScheme {
    level: Level,
    labels: Vec<String>,
}

impl LabelScheme {
    pub fn word() -> Self {
        LabelScheme {
            level: Level::Word,
            labels: WordLabel::INVENTORY.iter().map(|l| l.to_string()).collect(),
        }
    }

    pub fn char() -> Self {
        LabelScheme {
            level: Level::Char,
            labels: CharLabel::INVENTORY.iter().map(|l| l.to_string()).collect(),
        }
    }

    pub fn for_level(level: Level) -> Self {
        match level {
            Level::Word => Self::word(),
            Level::Char => Self::char(),
        }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn entity_types(&self) -> &'static [EntityType] {
        &EntityType::ALL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordToken {
    pub surface: String,
    pub gold_label: Option<WordLabel>,
    pub predicted_label: Option<WordLabel>,
}

impl WordToken {
    pub fn new(surface: impl Into<String>, gold: WordLabel) -> Self {
        WordToken {
            surface: surface.into(),
            gold_label: Some(gold),
            predicted_label: None,
        }
    }

    pub fn unlabeled(surface: impl Into<String>) -> Self {
        WordToken {
            surface: surface.into(),
            gold_label: None,
            predicted_label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordSentence {
    pub tokens: Vec<WordToken>,
}

impl WordSentence {
    pub fn new(tokens: Vec<WordToken>) -> Self {
        WordSentence { tokens }
    }

    /// Builds a sentence from `(surface, label)` pairs, with labels in CoNLL
    /// notation.
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Result<Self> {
        let tokens = pairs
            .iter()
            .map(|&(s, l)| Ok(WordToken::new(s, l.parse()?)))
            .collect::<Result<_>>()?;
        Ok(WordSentence { tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn gold_labels(&self) -> Option<Vec<WordLabel>> {
        self.tokens.iter().map(|t| t.gold_label).collect()
    }

    pub fn predicted_labels(&self) -> Option<Vec<WordLabel>> {
        self.tokens.iter().map(|t| t.predicted_label).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharToken {
    pub symbol: char,
    pub gold_label: CharLabel,
    pub predicted_label: Option<CharLabel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharSentence {
    pub chars: Vec<CharToken>,
    /// Inclusive `(start, end)` character ranges of each original word.
    pub word_boundaries: Vec<(usize, usize)>,
}

impl CharSentence {
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn gold_labels(&self) -> Vec<CharLabel> {
        self.chars.iter().map(|c| c.gold_label).collect()
    }

    /// Copies every gold label into the prediction slot.
    pub fn with_gold_as_predicted(mut self) -> Self {
        for c in &mut self.chars {
            c.predicted_label = Some(c.gold_label);
        }
        self
    }

    /// The concatenated text, words separated by single spaces.
    pub fn text(&self) -> String {
        self.chars.iter().map(|c| c.symbol).collect()
    }
}

/// Column layout of a CoNLL file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConllColumns {
    pub surface: usize,
    pub label: usize,
    /// Column holding predicted labels, if any. `usize::MAX` selects the
    /// last column of each line.
    pub prediction: Option<usize>,
}

impl ConllColumns {
    pub const LAST: usize = usize::MAX;

    pub fn with_label(label: usize) -> Self {
        ConllColumns {
            surface: 0,
            label,
            prediction: None,
        }
    }
}

impl Default for ConllColumns {
    fn default() -> Self {
        Self::with_label(3)
    }
}

/// Reads blank-line separated sentences, taking the surface from column 0
/// and the gold label from `label_column`. Other columns are ignored.
pub fn read_conll(text: &str, label_column: usize) -> Result<Vec<WordSentence>> {
    read_conll_with(text, ConllColumns::with_label(label_column))
}

pub fn read_conll_with(text: &str, columns: ConllColumns) -> Result<Vec<WordSentence>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            if !current.is_empty() {
                sentences.push(finish_sentence(std::mem::take(&mut current)));
            }
            continue;
        }
        let column = |idx: usize, what: &str| -> Result<&str> {
            let idx = if idx == ConllColumns::LAST { fields.len() - 1 } else { idx };
            fields.get(idx).copied().ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!(
                    "expected a {what} in column {idx}, found {} column(s)",
                    fields.len()
                ),
            })
        };
        let parse_label = |s: &str| -> Result<WordLabel> {
            s.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("unknown label {s:?}"),
            })
        };
        let surface = column(columns.surface, "surface")?.to_string();
        let gold = parse_label(column(columns.label, "label")?)?;
        let predicted = match columns.prediction {
            Some(idx) => Some(parse_label(column(idx, "predicted label")?)?),
            None => None,
        };
        current.push(WordToken {
            surface,
            gold_label: Some(gold),
            predicted_label: predicted,
        });
    }
    if !current.is_empty() {
        sentences.push(finish_sentence(current));
    }
    Ok(sentences)
}

fn finish_sentence(tokens: Vec<WordToken>) -> WordSentence {
    let mut s = WordSentence { tokens };
    let gold = s.tokens.iter().map(|t| t.gold_label).collect::<Vec<_>>();
    for (t, l) in s.tokens.iter_mut().zip(repair_iob_opt(&gold)) {
        t.gold_label = l;
    }
    s
}

/// Rewrites every `I-X` that does not follow `B-X` or `I-X` to `B-X`.
pub fn repair_iob(labels: &[WordLabel]) -> Vec<WordLabel> {
    let opt: Vec<_> = labels.iter().copied().map(Some).collect();
    repair_iob_opt(&opt).into_iter().map(Option::unwrap).collect()
}

fn repair_iob_opt(labels: &[Option<WordLabel>]) -> Vec<Option<WordLabel>> {
    let mut prev: Option<WordLabel> = None;
    labels
        .iter()
        .map(|&l| {
            let fixed = match l {
                Some(WordLabel::Inside(t)) if prev.and_then(WordLabel::entity_type) != Some(t) => {
                    Some(WordLabel::Begin(t))
                }
                other => other,
            };
            prev = fixed;
            fixed
        })
        .collect()
}

/// True when every `I-X` continues an entity of type `X`.
pub fn is_iob_valid(labels: &[WordLabel]) -> bool {
    repair_iob(labels) == labels
}

/// Writes one token per line as `surface gold [predicted]`, with a blank
/// line after every sentence.
pub fn write_conll(sentences: &[WordSentence], include_predictions: bool) -> String {
    let mut out = String::new();
    for s in sentences {
        for t in &s.tokens {
            out.push_str(&t.surface);
            out.push(' ');
            match t.gold_label {
                Some(l) => out.push_str(&l.to_string()),
                None => out.push('O'),
            }
            if include_predictions {
                out.push(' ');
                match t.predicted_label {
                    Some(l) => out.push_str(&l.to_string()),
                    None => out.push('O'),
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Normalizes a single surface form: digits anywhere give `number`, a token
/// made only of punctuation/symbol characters gives `punct`.
pub fn normalize_token(surface: &str) -> Cow<'_, str> {
    if surface.chars().any(|c| c.is_ascii_digit()) {
        Cow::Borrowed(NUMBER_TOKEN)
    } else if !surface.is_empty() && surface.chars().all(is_punct_or_symbol) {
        Cow::Borrowed(PUNCT_TOKEN)
    } else {
        Cow::Borrowed(surface)
    }
}

fn is_punct_or_symbol(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
            | MathSymbol
            | CurrencySymbol
            | ModifierSymbol
            | OtherSymbol
    )
}

/// Replaces number and punctuation tokens by their special surfaces.
pub fn preprocess(s: &WordSentence) -> WordSentence {
    WordSentence {
        tokens: s
            .tokens
            .iter()
            .map(|t| WordToken {
                surface: normalize_token(&t.surface).into_owned(),
                ..t.clone()
            })
            .collect(),
    }
}

/// Expands a word sentence to characters. Word characters take the letter of
/// the word's gold entity type; separating spaces take `O`. Tokens without a
/// gold label are treated as `O`.
pub fn word_to_char(s: &WordSentence) -> CharSentence {
    let mut chars = Vec::new();
    let mut word_boundaries = Vec::with_capacity(s.len());
    for (i, t) in s.tokens.iter().enumerate() {
        if i > 0 {
            chars.push(CharToken {
                symbol: ' ',
                gold_label: CharLabel::O,
                predicted_label: None,
            });
        }
        let label = t.gold_label.map_or(CharLabel::O, WordLabel::char_label);
        let start = chars.len();
        chars.extend(t.surface.chars().map(|symbol| CharToken {
            symbol,
            gold_label: label,
            predicted_label: None,
        }));
        word_boundaries.push((start, chars.len() - 1));
    }
    CharSentence {
        chars,
        word_boundaries,
    }
}

/// Resolves character predictions back to word-level IOB labels.
///
/// Each word takes the majority letter over its characters (ties go to the
/// letter of its first character). Space predictions are ignored. A typed
/// word opens a new entity unless the previous word resolved to the same
/// type, in which case it continues it.
pub fn char_to_word(c: &CharSentence) -> Result<WordSentence> {
    if c.word_boundaries.is_empty() && !c.chars.is_empty() {
        return Err(Error::Contract("character sentence has no word boundaries".into()));
    }
    let mut tokens = Vec::with_capacity(c.word_boundaries.len());
    let mut gold_letters = Vec::with_capacity(c.word_boundaries.len());
    let mut prev: Option<EntityType> = None;
    for (w, &(start, end)) in c.word_boundaries.iter().enumerate() {
        if start > end || end >= c.chars.len() {
            return Err(Error::Contract(format!(
                "word {w} boundary ({start},{end}) outside a sentence of {} characters",
                c.chars.len()
            )));
        }
        let span = &c.chars[start..=end];
        let predicted = span
            .iter()
            .map(|ch| ch.predicted_label)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| {
                Error::Contract(format!("word {w} has characters without predictions"))
            })?;
        let ty = majority(&predicted).0;
        let label = match ty {
            None => WordLabel::Outside,
            Some(t) if prev == Some(t) => WordLabel::Inside(t),
            Some(t) => WordLabel::Begin(t),
        };
        prev = ty;
        gold_letters.push(majority(&span.iter().map(|ch| ch.gold_label).collect::<Vec<_>>()).0);
        tokens.push(WordToken {
            surface: span.iter().map(|ch| ch.symbol).collect(),
            gold_label: None,
            predicted_label: Some(label),
        });
    }
    // Gold letters lose the B/I distinction; rebuild it with the same rule.
    let mut prev = None;
    for (t, ty) in tokens.iter_mut().zip(gold_letters) {
        t.gold_label = Some(match ty {
            None => WordLabel::Outside,
            Some(x) if prev == Some(x) => WordLabel::Inside(x),
            Some(x) => WordLabel::Begin(x),
        });
        prev = ty;
    }
    Ok(WordSentence { tokens })
}

fn majority(labels: &[CharLabel]) -> CharLabel {
    let mut counts = [0usize; 5];
    for l in labels {
        counts[l.index()] += 1;
    }
    let first = labels[0];
    let best = *counts.iter().max().unwrap();
    if counts[first.index()] == best {
        return first;
    }
    CharLabel::INVENTORY[counts.iter().position(|&c| c == best).unwrap()]
}
