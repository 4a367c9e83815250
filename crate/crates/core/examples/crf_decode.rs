//! Scores, normalizes and decodes a three-word sentence with a hand-built
//! CRF over the nine IOB tags.
//!
//! ```text
//! cargo run --example crf_decode
//! ```

use bilstm_crf_ner::crf::{crf_gradients, log_likelihood, log_partition, viterbi_decode, TransitionMatrix};
use bilstm_crf_ner::data::{LabelScheme, WordLabel};
use bilstm_crf_ner::encoders::iob_transition_allowed;
use bilstm_crf_ner::numerics::Matrix;

fn main() -> bilstm_crf_ner::Result<()> {
    let scheme = LabelScheme::word();
    let k = scheme.len();
    // "Ông Lê_Lợi đến": O, B-PER, O is the intended reading.
    let mut e = Matrix::zeros(3, k);
    e[(0, 0)] = 2.0;
    e[(1, 1)] = 1.5;
    e[(1, 2)] = 1.7;
    e[(2, 0)] = 1.0;
    e[(2, 2)] = 0.9;

    let free = TransitionMatrix::zeros(k);
    let masked = TransitionMatrix::zeros(k).with_mask(iob_transition_allowed(&scheme));
    for (name, a) in [("unconstrained", &free), ("IOB-constrained", &masked)] {
        let (path, score) = viterbi_decode(&e, a)?;
        let labels: Vec<String> = path.iter().map(|&t| WordLabel::INVENTORY[t].to_string()).collect();
        println!("{name:>16}: {labels:?} score {score:.3} log Z {:.3}", log_partition(&e, a)?);
    }

    let gold = [0, 1, 0];
    println!("log p(O B-PER O) = {:.4}", log_likelihood(&e, &masked, &gold)?);
    let g = crf_gradients(&e, &masked, &gold)?;
    println!("d log p / d e[1, B-PER] = {:.4}", g.d_emissions[(1, 1)]);
    Ok(())
}
