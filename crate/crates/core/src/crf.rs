//! Linear-chain CRF output layer.
//!
//! A sequence `y` over emissions `e` (T × K) scores
//! `Σ_t A[y_{t-1}, y_t] + e[t, y_t]`, where `y_0` is a START pseudo-tag
//! stored as the last row of the transition matrix. There is no STOP
//! transition. All dynamic programs run in log space.

use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp_slice, Matrix};

/// Transition scores `A`, shaped `(K + 1) × K` with the START row last.
///
/// An optional mask marks forbidden transitions, which then score `-∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    scores: Matrix,
    allowed: Option<Vec<bool>>,
}

impl TransitionMatrix {
    pub fn zeros(num_tags: usize) -> Self {
        TransitionMatrix {
            scores: Matrix::zeros(num_tags + 1, num_tags),
            allowed: None,
        }
    }

    pub fn from_matrix(scores: Matrix) -> Result<Self> {
        if scores.cols() == 0 || scores.rows() != scores.cols() + 1 {
            return Err(Error::Shape(format!(
                "transition matrix must be (K+1)xK, got {}x{}",
                scores.rows(),
                scores.cols()
            )));
        }
        Ok(TransitionMatrix {
            scores,
            allowed: None,
        })
    }

    /// Forbids every transition for which `allowed(from, to)` is false.
    /// `from == None` stands for START.
    pub fn with_mask(mut self, allowed: impl Fn(Option<usize>, usize) -> bool) -> Self {
        let k = self.num_tags();
        let mut mask = Vec::with_capacity((k + 1) * k);
        for from in 0..=k {
            let from = (from < k).then_some(from);
            for to in 0..k {
                mask.push(allowed(from, to));
            }
        }
        self.allowed = Some(mask);
        self
    }

    pub fn clear_mask(&mut self) {
        self.allowed = None;
    }

    pub fn is_masked(&self) -> bool {
        self.allowed.is_some()
    }

    pub fn num_tags(&self) -> usize {
        self.scores.cols()
    }

    pub fn start(&self) -> usize {
        self.num_tags()
    }

    /// The raw, unmasked parameters.
    pub fn params(&self) -> &Matrix {
        &self.scores
    }

    pub fn params_mut(&mut self) -> &mut Matrix {
        &mut self.scores
    }

    /// Effective score of `from → to`, `-∞` if masked.
    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        let k = self.num_tags();
        match &self.allowed {
            Some(mask) if !mask[from * k + to] => f64::NEG_INFINITY,
            _ => self.scores[(from, to)],
        }
    }
}

fn check(e: &Matrix, a: &TransitionMatrix) -> Result<()> {
    if e.rows() == 0 {
        return Err(Error::Contract("empty emission sequence".into()));
    }
    if e.cols() != a.num_tags() {
        return Err(Error::Shape(format!(
            "emissions have {} tags, transitions {}",
            e.cols(),
            a.num_tags()
        )));
    }
    Ok(())
}

fn check_tags(e: &Matrix, y: &[usize]) -> Result<()> {
    if y.len() != e.rows() {
        return Err(Error::Contract(format!(
            "tag sequence of length {} for {} positions",
            y.len(),
            e.rows()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&t| t >= e.cols()) {
        return Err(Error::Contract(format!("tag {bad} out of range 0..{}", e.cols())));
    }
    Ok(())
}

/// Unnormalized score of one tag sequence.
pub fn sequence_score(e: &Matrix, a: &TransitionMatrix, y: &[usize]) -> Result<f64> {
    check(e, a)?;
    check_tags(e, y)?;
    let mut prev = a.start();
    let mut total = 0.0;
    for (t, &tag) in y.iter().enumerate() {
        total += a.get(prev, tag) + e[(t, tag)];
        prev = tag;
    }
    Ok(total)
}

/// Forward log-messages `alpha[t][k]`.
fn forward(e: &Matrix, a: &TransitionMatrix) -> Vec<Vec<f64>> {
    let (n, k) = (e.rows(), e.cols());
    let mut alpha = Vec::with_capacity(n);
    alpha.push((0..k).map(|j| a.get(a.start(), j) + e[(0, j)]).collect::<Vec<_>>());
    let mut buf = vec![0.0; k];
    for t in 1..n {
        let prev = &alpha[t - 1];
        let row = (0..k)
            .map(|j| {
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = prev[i] + a.get(i, j);
                }
                log_sum_exp_slice(&buf) + e[(t, j)]
            })
            .collect();
        alpha.push(row);
    }
    alpha
}

/// Backward log-messages `beta[t][k]`, with `beta[T-1] = 0`.
fn backward(e: &Matrix, a: &TransitionMatrix) -> Vec<Vec<f64>> {
    let (n, k) = (e.rows(), e.cols());
    let mut beta = vec![vec![0.0; k]; n];
    let mut buf = vec![0.0; k];
    for t in (0..n - 1).rev() {
        for i in 0..k {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = a.get(i, j) + e[(t + 1, j)] + beta[t + 1][j];
            }
            beta[t][i] = log_sum_exp_slice(&buf);
        }
    }
    beta
}

/// `log Σ_y exp(score(y))`, by the forward recursion.
pub fn log_partition(e: &Matrix, a: &TransitionMatrix) -> Result<f64> {
    check(e, a)?;
    let alpha = forward(e, a);
    Ok(log_sum_exp_slice(alpha.last().unwrap()))
}

/// `log p(y | x) = score(y) - log Z`.
pub fn log_likelihood(e: &Matrix, a: &TransitionMatrix, y: &[usize]) -> Result<f64> {
    Ok(sequence_score(e, a, y)? - log_partition(e, a)?)
}

/// Gradients of the log-likelihood with respect to the emissions and the
/// raw transition parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfGradients {
    pub log_likelihood: f64,
    pub d_emissions: Matrix,
    pub d_transitions: Matrix,
}

/// Exact gradient of [`log_likelihood`]: observed counts minus expected
/// counts under the model, with marginals from forward-backward.
pub fn crf_gradients(e: &Matrix, a: &TransitionMatrix, y: &[usize]) -> Result<CrfGradients> {
    check(e, a)?;
    check_tags(e, y)?;
    let (n, k) = (e.rows(), e.cols());
    let alpha = forward(e, a);
    let beta = backward(e, a);
    let log_z = log_sum_exp_slice(&alpha[n - 1]);
    let score = sequence_score(e, a, y)?;

    let mut d_e = Matrix::zeros(n, k);
    let mut d_a = Matrix::zeros(k + 1, k);
    for t in 0..n {
        for j in 0..k {
            d_e[(t, j)] = -(alpha[t][j] + beta[t][j] - log_z).exp();
        }
    }
    // START row: the first unary marginals.
    for j in 0..k {
        d_a[(k, j)] = d_e[(0, j)];
    }
    for t in 1..n {
        for i in 0..k {
            if alpha[t - 1][i] == f64::NEG_INFINITY {
                continue;
            }
            for j in 0..k {
                let log_p = alpha[t - 1][i] + a.get(i, j) + e[(t, j)] + beta[t][j] - log_z;
                d_a[(i, j)] -= log_p.exp();
            }
        }
    }
    let mut prev = k;
    for (t, &tag) in y.iter().enumerate() {
        d_e[(t, tag)] += 1.0;
        d_a[(prev, tag)] += 1.0;
        prev = tag;
    }
    Ok(CrfGradients {
        log_likelihood: score - log_z,
        d_emissions: d_e,
        d_transitions: d_a,
    })
}

/// Highest-scoring tag sequence and its score. Ties resolve to the lowest
/// tag id, both at every backpointer and at the final position.
pub fn viterbi_decode(e: &Matrix, a: &TransitionMatrix) -> Result<(Vec<usize>, f64)> {
    check(e, a)?;
    let (n, k) = (e.rows(), e.cols());
    let mut delta: Vec<f64> = (0..k).map(|j| a.get(a.start(), j) + e[(0, j)]).collect();
    let mut backptr = vec![vec![0usize; k]; n];
    let mut next = vec![0.0; k];
    for t in 1..n {
        for j in 0..k {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (i, &d) in delta.iter().enumerate() {
                let s = d + a.get(i, j);
                if s > best {
                    best = s;
                    arg = i;
                }
            }
            backptr[t][j] = arg;
            next[j] = best + e[(t, j)];
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut last = 0;
    for j in 1..k {
        if delta[j] > delta[last] {
            last = j;
        }
    }
    let score = delta[last];
    let mut path = vec![last; n];
    for t in (1..n).rev() {
        path[t - 1] = backptr[t][path[t]];
    }
    Ok((path, score))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn zero_model_scores() {
        let e = Matrix::zeros(4, 3);
        let a = TransitionMatrix::zeros(3);
        assert_eq!(sequence_score(&e, &a, &[0, 1, 2, 0]).unwrap(), 0.0);
        let z = log_partition(&e, &a).unwrap();
        assert!((z - 4.0 * 3f64.ln()).abs() < 1e-12);
        let ll = log_likelihood(&e, &a, &[2, 2, 1, 0]).unwrap();
        assert!((ll + 4.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_position() {
        let e = mat(&[&[0.5, -1.0, 2.0]]);
        let a = TransitionMatrix::from_matrix(mat(&[
            &[0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0],
            &[1.0, 3.0, -2.0],
        ]))
        .unwrap();
        assert_eq!(sequence_score(&e, &a, &[1]).unwrap(), 2.0);
        let expect = [1.5f64, 2.0, 0.0].iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_partition(&e, &a).unwrap() - expect).abs() < 1e-12);
        let (y, s) = viterbi_decode(&e, &a).unwrap();
        assert_eq!((y, s), (vec![1], 2.0));
    }

    #[test]
    fn hand_expanded_two_by_two() {
        let e = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let a = TransitionMatrix::from_matrix(mat(&[&[0.1, 0.2], &[0.3, 0.4], &[0.5, 0.6]])).unwrap();
        // START→1 (0.6) + e[0,1] (2) + 1→0 (0.3) + e[1,0] (3)
        assert!((sequence_score(&e, &a, &[1, 0]).unwrap() - 5.9).abs() < 1e-12);
        let all = [[0, 0], [0, 1], [1, 0], [1, 1]]
            .iter()
            .map(|y| sequence_score(&e, &a, y).unwrap().exp())
            .sum::<f64>()
            .ln();
        assert!((log_partition(&e, &a).unwrap() - all).abs() < 1e-12);
    }

    #[test]
    fn single_tag_is_certain() {
        let e = mat(&[&[0.3], &[-2.0], &[5.0]]);
        let a = TransitionMatrix::from_matrix(mat(&[&[0.7], &[1.1]])).unwrap();
        assert!(log_likelihood(&e, &a, &[0, 0, 0]).unwrap().abs() < 1e-12);
        let g = crf_gradients(&e, &a, &[0, 0, 0]).unwrap();
        assert!(g.d_emissions.as_slice().iter().all(|v| v.abs() < 1e-12));
        assert!(g.d_transitions.as_slice().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn uniform_gradients() {
        let k = 4;
        let e = Matrix::zeros(3, k);
        let a = TransitionMatrix::zeros(k);
        let y = [3, 0, 2];
        let g = crf_gradients(&e, &a, &y).unwrap();
        for t in 0..3 {
            for j in 0..k {
                let expect = if j == y[t] { 1.0 - 0.25 } else { -0.25 };
                assert!((g.d_emissions[(t, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decouples_without_transitions() {
        let e = mat(&[&[0.1, 0.9, 0.3], &[2.0, -1.0, 0.0], &[0.0, 0.0, 0.5]]);
        let a = TransitionMatrix::zeros(3);
        let (y, s) = viterbi_decode(&e, &a).unwrap();
        assert_eq!(y, [1, 0, 2]);
        assert!((s - 3.4).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_lowest_tag() {
        let e = Matrix::zeros(3, 3);
        let (y, _) = viterbi_decode(&e, &TransitionMatrix::zeros(3)).unwrap();
        assert_eq!(y, [0, 0, 0]);
    }

    #[test]
    fn contract_errors() {
        let e = Matrix::zeros(2, 3);
        let a = TransitionMatrix::zeros(3);
        assert!(matches!(sequence_score(&e, &a, &[0]), Err(Error::Contract(_))));
        assert!(matches!(sequence_score(&e, &a, &[0, 3]), Err(Error::Contract(_))));
        assert!(log_partition(&Matrix::zeros(0, 3), &a).is_err());
        assert!(log_partition(&Matrix::zeros(2, 2), &a).is_err());
        assert!(TransitionMatrix::from_matrix(Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn masked_transitions_are_never_decoded() {
        let e = mat(&[&[0.0, 5.0], &[0.0, 5.0]]);
        // Forbid 1 → 1.
        let a = TransitionMatrix::zeros(2).with_mask(|from, to| !(from == Some(1) && to == 1));
        let (y, s) = viterbi_decode(&e, &a).unwrap();
        assert_eq!(y, [1, 0]);
        assert_eq!(s, 5.0);
        let z = log_partition(&e, &a).unwrap();
        let expect = [0.0f64, 5.0, 5.0].iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((z - expect).abs() < 1e-12);
        assert_eq!(log_likelihood(&e, &a, &[1, 1]).unwrap(), f64::NEG_INFINITY);
        let g = crf_gradients(&e, &a, &[0, 1]).unwrap();
        assert!(g.d_emissions.is_finite() && g.d_transitions.is_finite());
    }
}
