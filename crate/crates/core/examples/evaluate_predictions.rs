//! Exact-match entity scoring, per type and overall.
//!
//! ```text
//! cargo run --example evaluate_predictions
//! ```

use bilstm_crf_ner::data::{read_conll, EntityType};
use bilstm_crf_ner::evaluation::{format_report, score};

const GOLD: &str = "\
Lê B-PER
Lợi I-PER
ở O
Huế B-LOC

công_ty O
FPT B-ORG
";

const PRED: &str = "\
Lê B-PER
Lợi O
ở O
Huế B-LOC

công_ty B-ORG
FPT I-ORG
";

fn main() -> bilstm_crf_ner::Result<()> {
    let gold = read_conll(GOLD, 1)?;
    let mut pred = gold.clone();
    for (s, p) in pred.iter_mut().zip(read_conll(PRED, 1)?) {
        for (t, q) in s.tokens.iter_mut().zip(p.tokens) {
            t.predicted_label = q.gold_label;
        }
    }
    print!("{}", format_report(&score(&gold, &pred, None)?));
    println!();
    print!("{}", format_report(&score(&gold, &pred, Some(&[EntityType::Loc, EntityType::Org]))?));
    Ok(())
}
