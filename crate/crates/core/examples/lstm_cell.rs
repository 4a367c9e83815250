//! Runs the LSTM memory cell and the bidirectional encoder by hand.
//!
//! ```text
//! cargo run --example lstm_cell
//! ```

use bilstm_crf_ner::encoders::{bilstm_forward, lstm_step, LstmParams};
use bilstm_crf_ner::numerics::{Matrix, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bilstm_crf_ner::Result<()> {
    // One unit, input weights 1, everything else 0.
    let mut p = LstmParams::zeros(1, 1);
    for u in [&mut p.u_i, &mut p.u_f, &mut p.u_c, &mut p.u_o] {
        *u = Matrix::from_vec(1, 1, vec![1.0])?;
    }
    let (h, c) = lstm_step(&p, &Vector::from(vec![1.0]), &Vector::zeros(1), &Vector::zeros(1))?;
    println!("scalar cell: c = {:.6}, h = {:.6}", c[0], h[0]);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fwd = LstmParams::init(2, 3, &mut rng);
    let bwd = LstmParams::init(2, 3, &mut rng);
    let xs: Vec<Vector> = [[1.0, 0.0], [0.0, 1.0], [0.5, -0.5]].iter().map(|x| Vector::from(x.to_vec())).collect();
    for (t, out) in bilstm_forward(&fwd, &bwd, &xs)?.iter().enumerate() {
        let v: Vec<String> = out.iter().map(|x| format!("{x:+.3}")).collect();
        println!("t={t}: [{}]", v.join(" "));
    }
    Ok(())
}
