//! LSTM memory cell, unidirectional runs over a sequence, and the
//! bidirectional wrapper, each with its analytic backward pass.

use rand_chacha::ChaCha8Rng;

use crate::embeddings::fill_uniform;
use crate::error::{shape_err, Result};
use crate::numerics::{
    axpy, matvec_acc, matvec_batch_acc, matvec_t_acc, matvec_t_batch_acc, outer_batch_acc, sigmoid_scalar, Matrix, Vector,
};

/// Gate parameters of one LSTM direction.
///
/// `w_*` multiply the previous hidden state (hidden × hidden), `u_*` the
/// current input (hidden × input).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_i: Matrix,
    pub w_f: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub u_i: Matrix,
    pub u_f: Matrix,
    pub u_c: Matrix,
    pub u_o: Matrix,
    pub b_i: Vector,
    pub b_f: Vector,
    pub b_c: Vector,
    pub b_o: Vector,
}

pub(crate) const LSTM_BLOCK_NAMES: [&str; 12] = [
    "w_i", "w_f", "w_c", "w_o", "u_i", "u_f", "u_c", "u_o", "b_i", "b_f", "b_c", "b_o",
];

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Matrix::zeros(hidden_dim, hidden_dim);
        let u = || Matrix::zeros(hidden_dim, input_dim);
        let b = || Vector::zeros(hidden_dim);
        LstmParams {
            w_i: w(),
            w_f: w(),
            w_c: w(),
            w_o: w(),
            u_i: u(),
            u_f: u(),
            u_c: u(),
            u_o: u(),
            b_i: b(),
            b_f: b(),
            b_c: b(),
            b_o: b(),
        }
    }

    /// Glorot-uniform matrices, zero biases except a forget-gate bias of 1.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        for m in [
            &mut p.w_i, &mut p.w_f, &mut p.w_c, &mut p.w_o, &mut p.u_i, &mut p.u_f, &mut p.u_c,
            &mut p.u_o,
        ] {
            let bound = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
            fill_uniform(m.as_mut_slice(), bound, rng);
        }
        p.b_f = Vector::ones(hidden_dim);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.u_i.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_i.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (h, d) = (self.hidden_dim(), self.input_dim());
        for w in [&self.w_i, &self.w_f, &self.w_c, &self.w_o] {
            if w.rows() != h || w.cols() != h {
                return Err(shape_err(format!("recurrent weights must be {h}x{h}")));
            }
        }
        for u in [&self.u_i, &self.u_f, &self.u_c, &self.u_o] {
            if u.rows() != h || u.cols() != d {
                return Err(shape_err(format!("input weights must be {h}x{d}")));
            }
        }
        for b in [&self.b_i, &self.b_f, &self.b_c, &self.b_o] {
            if b.dim() != h {
                return Err(shape_err(format!("gate biases must have dimension {h}")));
            }
        }
        Ok(())
    }

    pub(crate) fn blocks(&self) -> [(&'static str, &[f64]); 12] {
        [
            (LSTM_BLOCK_NAMES[0], self.w_i.as_slice()),
            (LSTM_BLOCK_NAMES[1], self.w_f.as_slice()),
            (LSTM_BLOCK_NAMES[2], self.w_c.as_slice()),
            (LSTM_BLOCK_NAMES[3], self.w_o.as_slice()),
            (LSTM_BLOCK_NAMES[4], self.u_i.as_slice()),
            (LSTM_BLOCK_NAMES[5], self.u_f.as_slice()),
            (LSTM_BLOCK_NAMES[6], self.u_c.as_slice()),
            (LSTM_BLOCK_NAMES[7], self.u_o.as_slice()),
            (LSTM_BLOCK_NAMES[8], self.b_i.as_slice()),
            (LSTM_BLOCK_NAMES[9], self.b_f.as_slice()),
            (LSTM_BLOCK_NAMES[10], self.b_c.as_slice()),
            (LSTM_BLOCK_NAMES[11], self.b_o.as_slice()),
        ]
    }

    pub(crate) fn blocks_mut(&mut self) -> [(&'static str, &mut [f64]); 12] {
        [
            (LSTM_BLOCK_NAMES[0], self.w_i.as_mut_slice()),
            (LSTM_BLOCK_NAMES[1], self.w_f.as_mut_slice()),
            (LSTM_BLOCK_NAMES[2], self.w_c.as_mut_slice()),
            (LSTM_BLOCK_NAMES[3], self.w_o.as_mut_slice()),
            (LSTM_BLOCK_NAMES[4], self.u_i.as_mut_slice()),
            (LSTM_BLOCK_NAMES[5], self.u_f.as_mut_slice()),
            (LSTM_BLOCK_NAMES[6], self.u_c.as_mut_slice()),
            (LSTM_BLOCK_NAMES[7], self.u_o.as_mut_slice()),
            (LSTM_BLOCK_NAMES[8], self.b_i.as_mut_slice()),
            (LSTM_BLOCK_NAMES[9], self.b_f.as_mut_slice()),
            (LSTM_BLOCK_NAMES[10], self.b_c.as_mut_slice()),
            (LSTM_BLOCK_NAMES[11], self.b_o.as_mut_slice()),
        ]
    }

    /// Shapes of the blocks, as `(rows, cols)`, in [`Self::blocks`] order.
    pub(crate) fn block_shapes(&self) -> [(usize, usize); 12] {
        let (h, d) = (self.hidden_dim(), self.input_dim());
        [
            (h, h),
            (h, h),
            (h, h),
            (h, h),
            (h, d),
            (h, d),
            (h, d),
            (h, d),
            (h, 1),
            (h, 1),
            (h, 1),
            (h, 1),
        ]
    }
}

/// A forward and a backward direction.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmParams {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

impl BiLstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        BiLstmParams {
            fwd: LstmParams::zeros(input_dim, hidden_dim),
            bwd: LstmParams::zeros(input_dim, hidden_dim),
        }
    }

    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let fwd = LstmParams::init(input_dim, hidden_dim, rng);
        let bwd = LstmParams::init(input_dim, hidden_dim, rng);
        BiLstmParams { fwd, bwd }
    }

    pub fn output_dim(&self) -> usize {
        self.fwd.hidden_dim() + self.bwd.hidden_dim()
    }
}

/// Activations of one cell step, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    /// Candidate `tanh(W_c h + U_c x + b_c)`.
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// `U_* x + b_*` for the four gates, in `i, f, c, o` order.
fn input_preactivations(p: &LstmParams, x: &[f64]) -> [Vec<f64>; 4] {
    let mut z = [&p.b_i, &p.b_f, &p.b_c, &p.b_o].map(|b| b.as_slice().to_vec());
    for (zk, u) in z.iter_mut().zip([&p.u_i, &p.u_f, &p.u_c, &p.u_o]) {
        matvec_acc(u, x, zk);
    }
    z
}

/// Completes a step from its input preactivations.
fn step_from_input(p: &LstmParams, z: [Vec<f64>; 4], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
    let [mut i, mut f, mut g, mut o] = z;
    for (zk, w) in [&mut i, &mut f, &mut g, &mut o].into_iter().zip([&p.w_i, &p.w_f, &p.w_c, &p.w_o]) {
        matvec_acc(w, h_prev, zk);
    }
    for v in i.iter_mut().chain(f.iter_mut()).chain(o.iter_mut()) {
        *v = sigmoid_scalar(*v);
    }
    for v in g.iter_mut() {
        *v = v.tanh();
    }
    let c: Vec<f64> = (0..i.len()).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
    StepCache {
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        i,
        f,
        g,
        o,
        c,
        tanh_c,
        h,
    }
}

pub(crate) fn step_cached(p: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
    step_from_input(p, input_preactivations(p, x), h_prev, c_prev)
}

/// One memory-cell update; returns `(h_t, c_t)`.
pub fn lstm_step(p: &LstmParams, x: &Vector, h_prev: &Vector, c_prev: &Vector) -> Result<(Vector, Vector)> {
    p.validate()?;
    let h = p.hidden_dim();
    if x.dim() != p.input_dim() || h_prev.dim() != h || c_prev.dim() != h {
        return Err(shape_err(format!(
            "lstm_step: input {} / state {},{} for a {}→{} cell",
            x.dim(),
            h_prev.dim(),
            c_prev.dim(),
            p.input_dim(),
            h
        )));
    }
    let s = step_cached(p, x.as_slice(), h_prev.as_slice(), c_prev.as_slice());
    Ok((Vector::from(s.h), Vector::from(s.c)))
}

/// Runs the cell over `xs` in the given order from a zero state.
pub(crate) fn run<X: AsRef<[f64]>>(p: &LstmParams, xs: &[X]) -> Vec<StepCache> {
    let h = p.hidden_dim();
    let n = xs.len();
    // Input terms for the whole sequence first, so each row of `U_*` is
    // read once per sequence rather than once per step.
    let mut pre: [Vec<Vec<f64>>; 4] = [&p.b_i, &p.b_f, &p.b_c, &p.b_o].map(|b| vec![b.as_slice().to_vec(); n]);
    for (z, u) in pre.iter_mut().zip([&p.u_i, &p.u_f, &p.u_c, &p.u_o]) {
        matvec_batch_acc(u, xs, z);
    }
    let [mut zi, mut zf, mut zc, mut zo] = pre.map(Vec::into_iter);
    let mut out: Vec<StepCache> = Vec::with_capacity(n);
    let zero = vec![0.0; h];
    for _ in 0..n {
        let z = [zi.next(), zf.next(), zc.next(), zo.next()].map(Option::unwrap);
        let step = match out.last() {
            Some(prev) => step_from_input(p, z, &prev.h, &prev.c),
            None => step_from_input(p, z, &zero, &zero),
        };
        out.push(step);
    }
    out
}

/// Backpropagates `dh[t]` (loss gradient w.r.t. each emitted `h_t`) through
/// a run, accumulating parameter gradients into `grads` and returning the
/// gradient w.r.t. each input.
pub(crate) fn run_backward<X: AsRef<[f64]>>(
    p: &LstmParams,
    xs: &[X],
    steps: &[StepCache],
    dh: &[Vec<f64>],
    grads: &mut LstmParams,
) -> Vec<Vec<f64>> {
    let h = p.hidden_dim();
    let n = steps.len();
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    // Preactivation gradients per gate and step.
    let mut da: [Vec<Vec<f64>>; 4] = std::array::from_fn(|_| vec![vec![0.0; h]; n]);
    for t in (0..n).rev() {
        let s = &steps[t];
        let [da_i, da_f, da_g, da_o] = &mut da;
        for k in 0..h {
            let dh_k = dh[t][k] + dh_next[k];
            let dc = dc_next[k] + dh_k * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            let d_o = dh_k * s.tanh_c[k];
            let d_i = dc * s.g[k];
            let d_g = dc * s.i[k];
            let d_f = dc * s.c_prev[k];
            dc_next[k] = dc * s.f[k];
            da_i[t][k] = d_i * s.i[k] * (1.0 - s.i[k]);
            da_f[t][k] = d_f * s.f[k] * (1.0 - s.f[k]);
            da_g[t][k] = d_g * (1.0 - s.g[k] * s.g[k]);
            da_o[t][k] = d_o * s.o[k] * (1.0 - s.o[k]);
        }
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        for (d, w) in da.iter().zip([&p.w_i, &p.w_f, &p.w_c, &p.w_o]) {
            matvec_t_acc(w, &d[t], &mut dh_next);
        }
    }
    let h_prev: Vec<&[f64]> = steps.iter().map(|s| s.h_prev.as_slice()).collect();
    let mut dxs = vec![vec![0.0; p.input_dim()]; n];
    for (d, u, gw, gu, gb) in [
        (&da[0], &p.u_i, &mut grads.w_i, &mut grads.u_i, &mut grads.b_i),
        (&da[1], &p.u_f, &mut grads.w_f, &mut grads.u_f, &mut grads.b_f),
        (&da[2], &p.u_c, &mut grads.w_c, &mut grads.u_c, &mut grads.b_c),
        (&da[3], &p.u_o, &mut grads.w_o, &mut grads.u_o, &mut grads.b_o),
    ] {
        outer_batch_acc(gw, d, &h_prev);
        outer_batch_acc(gu, d, xs);
        for dt in d {
            axpy(1.0, dt, gb.as_mut_slice());
        }
        matvec_t_batch_acc(u, d, &mut dxs);
    }
    dxs
}

/// Bidirectional run: forward steps in order, backward steps over the
/// reversed sequence (`bwd[j]` belongs to position `n - 1 - j`).
#[derive(Debug, Clone)]
pub(crate) struct BiTrace {
    pub fwd: Vec<StepCache>,
    pub bwd: Vec<StepCache>,
}

impl BiTrace {
    /// `concat(h_fwd[t], h_bwd[t])` per position.
    pub fn outputs(&self) -> Vec<Vec<f64>> {
        let n = self.fwd.len();
        (0..n)
            .map(|t| {
                let mut v = self.fwd[t].h.clone();
                v.extend_from_slice(&self.bwd[n - 1 - t].h);
                v
            })
            .collect()
    }
}

pub(crate) fn bi_run<X: AsRef<[f64]>>(p: &BiLstmParams, xs: &[X]) -> BiTrace {
    let rev: Vec<&[f64]> = xs.iter().rev().map(AsRef::as_ref).collect();
    BiTrace {
        fwd: run(&p.fwd, xs),
        bwd: run(&p.bwd, &rev),
    }
}

/// `d_out[t]` has the layout of [`BiTrace::outputs`]. Returns input gradients.
pub(crate) fn bi_backward<X: AsRef<[f64]>>(
    p: &BiLstmParams,
    xs: &[X],
    trace: &BiTrace,
    d_out: &[Vec<f64>],
    grads: &mut BiLstmParams,
) -> Vec<Vec<f64>> {
    let hf = p.fwd.hidden_dim();
    let n = xs.len();
    let dh_fwd: Vec<Vec<f64>> = d_out.iter().map(|d| d[..hf].to_vec()).collect();
    let dh_bwd: Vec<Vec<f64>> = (0..n).map(|j| d_out[n - 1 - j][hf..].to_vec()).collect();
    let rev: Vec<&[f64]> = xs.iter().rev().map(AsRef::as_ref).collect();
    let mut dx = run_backward(&p.fwd, xs, &trace.fwd, &dh_fwd, &mut grads.fwd);
    let dx_rev = run_backward(&p.bwd, &rev, &trace.bwd, &dh_bwd, &mut grads.bwd);
    for (j, d) in dx_rev.into_iter().enumerate() {
        axpy(1.0, &d, &mut dx[n - 1 - j]);
    }
    dx
}

/// Bi-LSTM over a sequence; position `t` yields `concat(h_fwd[t], h_bwd[t])`.
pub fn bilstm_forward(fwd: &LstmParams, bwd: &LstmParams, xs: &[Vector]) -> Result<Vec<Vector>> {
    check_sequence(fwd, bwd, xs)?;
    let p = BiLstmParams {
        fwd: fwd.clone(),
        bwd: bwd.clone(),
    };
    let xs: Vec<&[f64]> = xs.iter().map(Vector::as_slice).collect();
    Ok(bi_run(&p, &xs).outputs().into_iter().map(Vector::from).collect())
}

pub(crate) fn check_sequence(fwd: &LstmParams, bwd: &LstmParams, xs: &[Vector]) -> Result<()> {
    fwd.validate()?;
    bwd.validate()?;
    if xs.is_empty() {
        return Err(crate::error::Error::Contract("empty input sequence".into()));
    }
    if fwd.input_dim() != bwd.input_dim() {
        return Err(shape_err("forward and backward input dimensions differ"));
    }
    if let Some(x) = xs.iter().find(|x| x.dim() != fwd.input_dim()) {
        return Err(shape_err(format!(
            "input of dimension {} for a cell expecting {}",
            x.dim(),
            fwd.input_dim()
        )));
    }
    Ok(())
}

/// Final hidden states of both directions, concatenated.
pub fn char_lstm_features(fwd: &LstmParams, bwd: &LstmParams, char_vectors: &[Vector]) -> Result<Vector> {
    check_sequence(fwd, bwd, char_vectors)?;
    let p = BiLstmParams {
        fwd: fwd.clone(),
        bwd: bwd.clone(),
    };
    let xs: Vec<&[f64]> = char_vectors.iter().map(Vector::as_slice).collect();
    Ok(Vector::from(final_states(&bi_run(&p, &xs))))
}

pub(crate) fn final_states(trace: &BiTrace) -> Vec<f64> {
    let mut v = trace.fwd.last().unwrap().h.clone();
    v.extend_from_slice(&trace.bwd.last().unwrap().h);
    v
}

/// Backward of [`final_states`]: only the last step of each direction
/// receives an output gradient.
pub(crate) fn final_states_backward<X: AsRef<[f64]>>(
    p: &BiLstmParams,
    xs: &[X],
    trace: &BiTrace,
    d_feat: &[f64],
    grads: &mut BiLstmParams,
) -> Vec<Vec<f64>> {
    let n = xs.len();
    let hf = p.fwd.hidden_dim();
    let mut d_out = vec![vec![0.0; p.output_dim()]; n];
    d_out[n - 1][..hf].copy_from_slice(&d_feat[..hf]);
    d_out[0][hf..].copy_from_slice(&d_feat[hf..]);
    bi_backward(p, xs, trace, &d_out, grads)
}
