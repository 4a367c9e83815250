//! Exact-match entity scoring in the style of the CoNLL evaluation script.
//!
//! A predicted entity counts as correct only if a gold entity has the same
//! start, end and type. Percentages are reported on a 0–100 scale; a ratio
//! with a zero denominator is 0.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::data::{char_to_word, CharSentence, EntityType, WordLabel, WordSentence};
use crate::error::{Error, Result};

/// An entity occupying tokens `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChunkSpan {
    pub start: usize,
    pub end: usize,
    pub entity_type: EntityType,
}

/// Reads entities off an IOB sequence. An `I-X` that does not continue an
/// `X` entity opens a new one, as does every `B-X`.
pub fn extract_chunks(labels: &[WordLabel]) -> Vec<ChunkSpan> {
    let mut out: Vec<ChunkSpan> = Vec::new();
    let mut open: Option<ChunkSpan> = None;
    for (i, &l) in labels.iter().enumerate() {
        match l {
            WordLabel::Inside(t) if open.is_some_and(|c| c.entity_type == t) => {
                open.as_mut().unwrap().end = i;
            }
            WordLabel::Begin(t) | WordLabel::Inside(t) => {
                out.extend(open.take());
                open = Some(ChunkSpan {
                    start: i,
                    end: i,
                    entity_type: t,
                });
            }
            WordLabel::Outside => out.extend(open.take()),
        }
    }
    out.extend(open);
    out
}

/// `2PR / (P + R)`, or 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Counts and derived percentages for one entity type, or for all of them.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TypeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_count: usize,
    pub pred_count: usize,
    pub correct_count: usize,
}

impl TypeScore {
    pub fn from_counts(gold_count: usize, pred_count: usize, correct_count: usize) -> Self {
        let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
        let precision = pct(correct_count, pred_count);
        let recall = pct(correct_count, gold_count);
        TypeScore {
            precision,
            recall,
            f1: f1_score(precision, recall),
            gold_count,
            pred_count,
            correct_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_type: BTreeMap<EntityType, TypeScore>,
    /// Micro-averaged over the reported types.
    pub overall: TypeScore,
    pub type_filter: Option<Vec<EntityType>>,
    /// Number of tokens scored.
    pub tokens: usize,
}

/// Scores aligned label sequences.
pub fn score_labels(
    gold: &[Vec<WordLabel>],
    pred: &[Vec<WordLabel>],
    type_filter: Option<&[EntityType]>,
) -> Result<EvalReport> {
    if gold.len() != pred.len() {
        return Err(Error::Contract(format!(
            "{} gold sentences but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let types: Vec<EntityType> = match type_filter {
        Some(f) => EntityType::ALL.into_iter().filter(|t| f.contains(t)).collect(),
        None => EntityType::ALL.to_vec(),
    };
    let mut counts: BTreeMap<EntityType, (usize, usize, usize)> = types.iter().map(|&t| (t, (0, 0, 0))).collect();
    let mut tokens = 0;
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(Error::Contract(format!(
                "sentence {i}: {} gold labels but {} predicted",
                g.len(),
                p.len()
            )));
        }
        tokens += g.len();
        let gold_spans: BTreeSet<ChunkSpan> = extract_chunks(g).into_iter().collect();
        for s in &gold_spans {
            if let Some(c) = counts.get_mut(&s.entity_type) {
                c.0 += 1;
            }
        }
        for s in extract_chunks(p) {
            if let Some(c) = counts.get_mut(&s.entity_type) {
                c.1 += 1;
                if gold_spans.contains(&s) {
                    c.2 += 1;
                }
            }
        }
    }
    let (g, p, c) = counts
        .values()
        .fold((0, 0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1, acc.2 + x.2));
    Ok(EvalReport {
        per_type: counts
            .into_iter()
            .map(|(t, (g, p, c))| (t, TypeScore::from_counts(g, p, c)))
            .collect(),
        overall: TypeScore::from_counts(g, p, c),
        type_filter: type_filter.map(|_| types),
        tokens,
    })
}

/// Scores the gold labels of `gold` against the predicted labels of `pred`.
pub fn score(gold: &[WordSentence], pred: &[WordSentence], type_filter: Option<&[EntityType]>) -> Result<EvalReport> {
    let g = gold
        .iter()
        .enumerate()
        .map(|(i, s)| s.gold_labels().ok_or_else(|| Error::Contract(format!("gold sentence {i} is missing labels"))))
        .collect::<Result<Vec<_>>>()?;
    let p = pred
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.predicted_labels()
                .ok_or_else(|| Error::Contract(format!("sentence {i} is missing predictions")))
        })
        .collect::<Result<Vec<_>>>()?;
    score_labels(&g, &p, type_filter)
}

/// Converts character predictions to words, then scores them.
pub fn score_char_model(
    gold: &[WordSentence],
    pred: &[CharSentence],
    type_filter: Option<&[EntityType]>,
) -> Result<EvalReport> {
    let words = pred.iter().map(char_to_word).collect::<Result<Vec<_>>>()?;
    score(gold, &words, type_filter)
}

/// Fixed-width table: one row per entity type, then `ALL`.
pub fn format_report(r: &EvalReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "processed {} tokens with {} phrases; found: {} phrases; correct: {}.",
        r.tokens, r.overall.gold_count, r.overall.pred_count, r.overall.correct_count
    )
    .unwrap();
    writeln!(
        out,
        "{:<8}{:>10}{:>10}{:>10}{:>8}{:>8}{:>9}",
        "Entity", "P", "R", "F1", "gold", "found", "correct"
    )
    .unwrap();
    let row = |out: &mut String, name: &str, s: &TypeScore| {
        writeln!(
            out,
            "{:<8}{:>10.2}{:>10.2}{:>10.2}{:>8}{:>8}{:>9}",
            name, s.precision, s.recall, s.f1, s.gold_count, s.pred_count, s.correct_count
        )
        .unwrap();
    };
    for (t, s) in &r.per_type {
        row(&mut out, t.as_str(), s);
    }
    row(&mut out, "ALL", &r.overall);
    out
}

/// `key=value` lines, e.g. `LOC.f1=88.38`, for scripts.
pub fn format_report_kv(r: &EvalReport) -> String {
    let mut out = String::new();
    let mut emit = |name: &str, s: &TypeScore| {
        for (k, v) in [("precision", s.precision), ("recall", s.recall), ("f1", s.f1)] {
            writeln!(out, "{name}.{k}={v:.4}").unwrap();
        }
        for (k, v) in [("gold", s.gold_count), ("found", s.pred_count), ("correct", s.correct_count)] {
            writeln!(out, "{name}.{k}={v}").unwrap();
        }
    };
    for (t, s) in &r.per_type {
        emit(t.as_str(), s);
    }
    emit("ALL", &r.overall);
    out
}
