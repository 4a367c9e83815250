//! Independent reference implementations and fixtures shared by the
//! integration tests. Everything here is written with plain loops over
//! nested `Vec`s so it shares no code with the library kernels.

#![allow(dead_code)]

use bilstm_crf_ner::data::WordSentence;
use bilstm_crf_ner::embeddings::{EmbeddingTable, Vocabulary};
use bilstm_crf_ner::encoders::{Dims, Gradients, LstmParams, Model, ModelVariant, VariantKind};
use bilstm_crf_ner::numerics::{grad_check, Matrix, Vector};
use bilstm_crf_ner::training::{build_model, build_word_vocab, loss_and_gradients, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vector {
    Vector::from((0..dim).map(|_| rng.random_range(-scale..scale)).collect::<Vec<_>>())
}

// ---------------------------------------------------------------------------
// CRF by exhaustive enumeration.

/// Every tag sequence of length `t` over `k` tags, in lexicographic order.
pub fn all_sequences(t: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(k.pow(t as u32));
    let mut y = vec![0; t];
    loop {
        out.push(y.clone());
        let mut i = t;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            y[i] += 1;
            if y[i] < k {
                break;
            }
            y[i] = 0;
        }
    }
}

/// `e` is T × K, `a` is (K + 1) × K with the START row last.
pub fn brute_score(e: &[Vec<f64>], a: &[Vec<f64>], y: &[usize]) -> f64 {
    let start = a.len() - 1;
    let mut s = 0.0;
    let mut prev = start;
    for (t, &tag) in y.iter().enumerate() {
        s += a[prev][tag] + e[t][tag];
        prev = tag;
    }
    s
}

pub fn brute_log_partition(e: &[Vec<f64>], a: &[Vec<f64>]) -> f64 {
    let scores: Vec<f64> = all_sequences(e.len(), e[0].len())
        .iter()
        .map(|y| brute_score(e, a, y))
        .collect();
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln()
}

/// The best score and, among the sequences attaining it, the one a
/// lowest-id-at-every-backpointer decoder returns: the smallest under
/// comparison from the last position backwards.
pub fn brute_viterbi(e: &[Vec<f64>], a: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for y in all_sequences(e.len(), e[0].len()) {
        let s = brute_score(e, a, &y);
        let better = match &best {
            None => true,
            Some((by, bs)) => s > *bs || (s == *bs && y.iter().rev().lt(by.iter().rev())),
        };
        if better {
            best = Some((y, s));
        }
    }
    best.unwrap()
}

// ---------------------------------------------------------------------------
// Encoders.

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One LSTM step: gates read `W h + U x + b`.
pub fn lstm_step_ref(p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = p.b_i.dim();
    let pre = |w: &Matrix, u: &Matrix, b: &Vector, k: usize| {
        let mut z = b[k];
        for j in 0..h.len() {
            z += w[(k, j)] * h[j];
        }
        for j in 0..x.len() {
            z += u[(k, j)] * x[j];
        }
        z
    };
    let mut h_new = vec![0.0; n];
    let mut c_new = vec![0.0; n];
    for k in 0..n {
        let i = sig(pre(&p.w_i, &p.u_i, &p.b_i, k));
        let f = sig(pre(&p.w_f, &p.u_f, &p.b_f, k));
        let g = pre(&p.w_c, &p.u_c, &p.b_c, k).tanh();
        let o = sig(pre(&p.w_o, &p.u_o, &p.b_o, k));
        c_new[k] = f * c[k] + i * g;
        h_new[k] = o * c_new[k].tanh();
    }
    (h_new, c_new)
}

/// Hidden states of a left-to-right run from the zero state.
pub fn lstm_run_ref(p: &LstmParams, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = p.b_i.dim();
    let (mut h, mut c) = (vec![0.0; n], vec![0.0; n]);
    let mut out = Vec::new();
    for x in xs {
        let (h2, c2) = lstm_step_ref(p, x, &h, &c);
        h = h2;
        c = c2;
        out.push(h.clone());
    }
    out
}

pub fn bilstm_ref(fwd: &LstmParams, bwd: &LstmParams, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let f = lstm_run_ref(fwd, xs);
    let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    let mut b = lstm_run_ref(bwd, &rev);
    b.reverse();
    f.into_iter().zip(b).map(|(mut a, b)| {
        a.extend(b);
        a
    }).collect()
}

pub fn char_lstm_ref(fwd: &LstmParams, bwd: &LstmParams, xs: &[Vec<f64>]) -> Vec<f64> {
    let mut f = lstm_run_ref(fwd, xs).pop().unwrap();
    let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    f.extend(lstm_run_ref(bwd, &rev).pop().unwrap());
    f
}

/// Convolution with `window / 2` pad rows on each side, tanh, max over
/// positions.
pub fn char_cnn_ref(filters: &[Vec<Vec<f64>>], biases: &[f64], pad: &[f64], xs: &[Vec<f64>]) -> Vec<f64> {
    let window = filters[0].len();
    let half = window / 2;
    let at = |i: isize| -> &[f64] {
        if i < 0 || i as usize >= xs.len() {
            pad
        } else {
            &xs[i as usize]
        }
    };
    filters
        .iter()
        .zip(biases)
        .map(|(f, &b)| {
            (0..xs.len())
                .map(|pos| {
                    let mut z = b;
                    for (k, row) in f.iter().enumerate() {
                        let x = at(pos as isize + k as isize - half as isize);
                        z += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                    }
                    z.tanh()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Fixtures.

pub fn tiny_dims() -> Dims {
    Dims {
        word_dim: 4,
        char_dim: 3,
        word_hidden: 3,
        cnn_filters: 2,
        cnn_window: 3,
        char_hidden: 2,
        char_model_hidden: 3,
    }
}

pub fn tiny_corpus() -> Vec<WordSentence> {
    vec![
        WordSentence::from_pairs(&[("Ông", "O"), ("Lê_Lợi", "B-PER"), ("ở", "O"), ("Huế", "B-LOC")]).unwrap(),
        WordSentence::from_pairs(&[("công_ty", "B-ORG"), ("FPT", "I-ORG"), ("năm", "O"), ("2016", "O")]).unwrap(),
        WordSentence::from_pairs(&[("giải", "B-MISC"), ("V-League", "I-MISC"), ("!", "O")]).unwrap(),
    ]
}

pub fn tiny_pretrained(dim: usize, seed: u64) -> EmbeddingTable {
    let mut vocab: Vocabulary = build_word_vocab(&tiny_corpus());
    vocab.insert("unseen");
    EmbeddingTable::random_init(vocab, dim, seed).unwrap()
}

pub fn tiny_config(kind: VariantKind) -> TrainConfig {
    TrainConfig {
        variant: ModelVariant::new(kind),
        dims: tiny_dims(),
        dropout: 0.0,
        ..TrainConfig::default()
    }
}

/// A randomly initialized tiny model. Transitions and projection biases,
/// which start at zero, are filled with noise so that every block is
/// exercised away from a special point.
pub fn tiny_model(kind: VariantKind, seed: u64) -> Model {
    let mut cfg = tiny_config(kind);
    cfg.seed = seed;
    let pre = tiny_pretrained(4, seed + 1);
    let mut m = build_model(&tiny_corpus(), &cfg, Some(&pre)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
    for (name, block) in m.blocks_mut() {
        if name.starts_with("crf") || name.ends_with("bias") || name.ends_with(".b_i") || name.ends_with("pad") {
            block.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
    }
    m
}

/// Worst finite-difference error per block for the loss on `sentence`.
pub fn block_errors(model: &Model, sentence: &WordSentence) -> Vec<(String, f64)> {
    let input = model.encode(sentence).unwrap();
    let tags = model.gold_tags(sentence).unwrap();
    let mut grads = Gradients::zeros_like(model);
    loss_and_gradients(model, &input, &tags, None, &mut grads).unwrap();
    let blocks: Vec<(String, Vec<f64>)> = model.blocks().into_iter().map(|(n, _, d)| (n, d.to_vec())).collect();
    let analytic = grads.all_blocks(model);
    assert_eq!(
        blocks.iter().map(|b| &b.0).collect::<Vec<_>>(),
        analytic.iter().map(|b| &b.0).collect::<Vec<_>>()
    );
    blocks
        .into_iter()
        .zip(analytic)
        .map(|((name, values), (_, g))| {
            let mut probe = model.clone();
            let f = |p: &Vector| {
                probe.block_mut(&name).unwrap().copy_from_slice(p.as_slice());
                let e = probe.emit(&input).unwrap();
                -bilstm_crf_ner::crf::log_likelihood(&e, &probe.transitions, &tags).unwrap()
            };
            let err = grad_check(f, &Vector::from(values), &Vector::from(g), 1e-5).unwrap();
            (name, err)
        })
        .collect()
}
