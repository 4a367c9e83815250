//! Word-level IOB labels and their character-level counterpart.
//!
//! ```text
//! cargo run --example label_schemes
//! ```

use bilstm_crf_ner::data::{char_to_word, word_to_char, CharLabel, WordSentence};

fn main() -> bilstm_crf_ner::Result<()> {
    let s = WordSentence::from_pairs(&[("Anh", "B-ORG"), ("rời", "O"), ("EU", "B-ORG"), ("hôm_qua", "O")])?;
    let c = word_to_char(&s);
    println!("{}", c.text());
    println!("{}", c.gold_labels().iter().map(|l| l.letter()).collect::<String>());

    // A character model that reads "nh" of "Anh" as a location and the "U"
    // of "EU" as O. Each word takes its majority letter; ties go to the
    // first character.
    let mut pred = c.clone().with_gold_as_predicted();
    let loc = CharLabel::from_letter('L').unwrap();
    pred.chars[1].predicted_label = Some(loc);
    pred.chars[2].predicted_label = Some(loc);
    pred.chars[9].predicted_label = Some(CharLabel::O);
    for t in char_to_word(&pred)?.tokens {
        println!("{:<8} {}", t.surface, t.predicted_label.unwrap());
    }
    Ok(())
}
