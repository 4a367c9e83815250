use bilstm_crf_ner::data::{read_conll, word_to_char, EntityType, WordSentence};
use bilstm_crf_ner::evaluation::{f1_score, format_report, score, score_char_model, TypeScore};

const GOLD: &str = include_str!("fixtures/confusion_gold.conll");
const PRED: &str = include_str!("fixtures/confusion_pred.conll");

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn with_predictions(gold: &[WordSentence], pred: &[WordSentence]) -> Vec<WordSentence> {
    gold.iter()
        .zip(pred)
        .map(|(g, p)| {
            let mut s = g.clone();
            for (t, q) in s.tokens.iter_mut().zip(&p.tokens) {
                t.predicted_label = q.gold_label;
            }
            s
        })
        .collect()
}

fn as_predicted(gold: &[WordSentence]) -> Vec<WordSentence> {
    with_predictions(gold, gold)
}

#[test]
fn published_all_rows() {
    assert_eq!(round2(f1_score(90.97, 85.93)), 88.38);
    assert_eq!(round2(f1_score(86.78, 67.90)), 76.19);
    assert_eq!(f1_score(0.0, 0.0), 0.0);
}

#[test]
fn gold_against_itself_scores_100() {
    let gold = read_conll(GOLD, 3).unwrap();
    let r = score(&gold, &as_predicted(&gold), None).unwrap();
    assert_eq!((r.overall.precision, r.overall.recall, r.overall.f1), (100.0, 100.0, 100.0));
    for s in r.per_type.values() {
        assert_eq!(s.f1, 100.0);
    }
}

#[test]
fn hand_counted_confusion_fixture() {
    let gold = read_conll(GOLD, 3).unwrap();
    let pred = read_conll(PRED, 1).unwrap();
    assert_eq!(gold.len(), 5);
    let r = score(&gold, &with_predictions(&gold, &pred), None).unwrap();
    let get = |t| r.per_type[&t];
    assert_eq!(get(EntityType::Per), TypeScore::from_counts(3, 2, 2));
    assert_eq!(round2(get(EntityType::Per).recall), 66.67);
    assert_eq!(round2(get(EntityType::Per).f1), 80.0);
    assert_eq!(get(EntityType::Loc), TypeScore::from_counts(1, 2, 1));
    assert_eq!(round2(get(EntityType::Loc).f1), 66.67);
    assert_eq!(get(EntityType::Org).f1, 0.0);
    assert_eq!(get(EntityType::Misc).f1, 0.0);
    assert_eq!((r.overall.gold_count, r.overall.pred_count, r.overall.correct_count), (6, 6, 3));
    assert_eq!(r.overall.f1, 50.0);
    assert_eq!(r.tokens, 13);

    let three = [EntityType::Per, EntityType::Loc, EntityType::Org];
    let r = score(&gold, &with_predictions(&gold, &pred), Some(&three)).unwrap();
    assert!(!r.per_type.contains_key(&EntityType::Misc));
    assert_eq!((r.overall.gold_count, r.overall.pred_count, r.overall.correct_count), (5, 5, 3));
    assert_eq!(r.overall.f1, 60.0);

    let table = format_report(&r);
    assert!(table.lines().last().unwrap().starts_with("ALL"));
    assert!(table.contains("60.00"));
}

#[test]
fn char_predictions_copied_from_gold_score_100() {
    let gold = read_conll(GOLD, 3).unwrap();
    let chars: Vec<_> = gold.iter().map(|s| word_to_char(s).with_gold_as_predicted()).collect();
    assert_eq!(score_char_model(&gold, &chars, None).unwrap().overall.f1, 100.0);

    let mut silent = chars.clone();
    for s in &mut silent {
        for c in &mut s.chars {
            c.predicted_label = Some(bilstm_crf_ner::data::CharLabel::O);
        }
    }
    let r = score_char_model(&gold, &silent, None).unwrap();
    assert_eq!((r.overall.precision, r.overall.recall, r.overall.f1), (0.0, 0.0, 0.0));
}

#[test]
fn misaligned_inputs_are_errors() {
    let gold = read_conll(GOLD, 3).unwrap();
    assert!(score(&gold, &as_predicted(&gold[..4]), None).is_err());
    assert!(score(&gold, &gold, None).is_err());
}
