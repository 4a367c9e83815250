//! Character convolution with max-over-time pooling.

use rand_chacha::ChaCha8Rng;

use crate::embeddings::fill_uniform;
use crate::error::{shape_err, Error, Result};
use crate::numerics::{axpy, dot, Matrix, Vector};

/// Convolution filters over character vectors.
///
/// Each filter is `window × char_dim`; the sequence is padded with
/// `window / 2` copies of `pad_vector` on each side so every character is a
/// window center.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    pub filters: Vec<Matrix>,
    pub biases: Vector,
    pub window: usize,
    pub pad_vector: Vector,
}

impl CnnParams {
    pub fn zeros(num_filters: usize, window: usize, char_dim: usize) -> Self {
        CnnParams {
            filters: vec![Matrix::zeros(window, char_dim); num_filters],
            biases: Vector::zeros(num_filters),
            window,
            pad_vector: Vector::zeros(char_dim),
        }
    }

    /// Glorot-uniform filters, zero biases and a zero pad vector.
    pub fn init(num_filters: usize, window: usize, char_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(num_filters, window, char_dim);
        let bound = (6.0 / (window * char_dim + num_filters) as f64).sqrt();
        for f in &mut p.filters {
            fill_uniform(f.as_mut_slice(), bound, rng);
        }
        p
    }

    pub fn num_filters(&self) -> usize {
        self.filters.len()
    }

    pub fn char_dim(&self) -> usize {
        self.pad_vector.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.filters.is_empty() {
            return Err(Error::Config("a character CNN needs at least one filter".into()));
        }
        if self.window % 2 == 0 {
            return Err(Error::Config(format!(
                "convolution window must be odd, got {}",
                self.window
            )));
        }
        if self.biases.dim() != self.filters.len() {
            return Err(shape_err("one bias per filter"));
        }
        for f in &self.filters {
            if f.rows() != self.window || f.cols() != self.char_dim() {
                return Err(shape_err(format!(
                    "filters must be {}x{}",
                    self.window,
                    self.char_dim()
                )));
            }
        }
        Ok(())
    }

    fn half(&self) -> usize {
        self.window / 2
    }
}

/// Per-word forward state: the padded rows and, per filter, the winning
/// position and its activation.
#[derive(Debug, Clone)]
pub(crate) struct CnnCache {
    pub argmax: Vec<usize>,
    pub activation: Vec<f64>,
}

/// Padded character rows, pad vector at the edges.
fn padded<'a, X: AsRef<[f64]>>(p: &'a CnnParams, xs: &'a [X]) -> Vec<&'a [f64]> {
    let pad = p.pad_vector.as_slice();
    let mut rows = Vec::with_capacity(xs.len() + 2 * p.half());
    rows.extend(std::iter::repeat_n(pad, p.half()));
    rows.extend(xs.iter().map(AsRef::as_ref));
    rows.extend(std::iter::repeat_n(pad, p.half()));
    rows
}

pub(crate) fn forward_cached<X: AsRef<[f64]>>(p: &CnnParams, xs: &[X]) -> (Vec<f64>, CnnCache) {
    let rows = padded(p, xs);
    let n = xs.len();
    let mut out = Vec::with_capacity(p.num_filters());
    let mut argmax = Vec::with_capacity(p.num_filters());
    for (filter, &bias) in p.filters.iter().zip(p.biases.iter()) {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for pos in 0..n {
            let mut z = bias;
            for k in 0..p.window {
                z += dot(filter.row(k), rows[pos + k]);
            }
            let a = z.tanh();
            if a > best {
                best = a;
                arg = pos;
            }
        }
        out.push(best);
        argmax.push(arg);
    }
    let cache = CnnCache {
        argmax,
        activation: out.clone(),
    };
    (out, cache)
}

/// Routes `d_feat` through the winning positions. Accumulates filter, bias
/// and pad gradients into `grads`; returns per-character input gradients.
pub(crate) fn backward<X: AsRef<[f64]>>(
    p: &CnnParams,
    xs: &[X],
    cache: &CnnCache,
    d_feat: &[f64],
    grads: &mut CnnParams,
) -> Vec<Vec<f64>> {
    let rows = padded(p, xs);
    let half = p.half();
    let n = xs.len();
    let mut dxs = vec![vec![0.0; p.char_dim()]; n];
    for (fi, filter) in p.filters.iter().enumerate() {
        let a = cache.activation[fi];
        let dz = d_feat[fi] * (1.0 - a * a);
        if dz == 0.0 {
            continue;
        }
        let pos = cache.argmax[fi];
        grads.biases[fi] += dz;
        for k in 0..p.window {
            axpy(dz, rows[pos + k], grads.filters[fi].row_mut(k));
            let padded_idx = pos + k;
            if padded_idx < half || padded_idx >= half + n {
                axpy(dz, filter.row(k), grads.pad_vector.as_mut_slice());
            } else {
                axpy(dz, filter.row(k), &mut dxs[padded_idx - half]);
            }
        }
    }
    dxs
}

/// Max-pooled convolution features of one word; one value per filter.
pub fn char_cnn_features(p: &CnnParams, char_vectors: &[Vector]) -> Result<Vector> {
    p.validate()?;
    if char_vectors.is_empty() {
        return Err(Error::Contract("a word needs at least one character".into()));
    }
    if let Some(x) = char_vectors.iter().find(|x| x.dim() != p.char_dim()) {
        return Err(shape_err(format!(
            "character vector of dimension {}, filters expect {}",
            x.dim(),
            p.char_dim()
        )));
    }
    let xs: Vec<&[f64]> = char_vectors.iter().map(Vector::as_slice).collect();
    Ok(Vector::from(forward_cached(p, &xs).0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn scalars(xs: &[f64]) -> Vec<Vector> {
        xs.iter().map(|&x| Vector::from(vec![x])).collect()
    }

    #[test]
    fn window_one_picks_the_largest_activation() {
        let p = CnnParams {
            filters: vec![Matrix::from_vec(1, 1, vec![1.0]).unwrap()],
            biases: Vector::zeros(1),
            window: 1,
            pad_vector: Vector::zeros(1),
        };
        let f = char_cnn_features(&p, &scalars(&[2.0, -1.0, 3.0])).unwrap();
        assert_eq!(f.as_slice(), [3f64.tanh()]);
    }

    #[test]
    fn single_char_uses_one_position() {
        // Window 3 over one char sees pad, char, pad.
        let p = CnnParams {
            filters: vec![
                Matrix::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap(),
                Matrix::from_vec(3, 1, vec![-1.0, 0.5, 0.0]).unwrap(),
            ],
            biases: Vector::from(vec![0.1, -0.2]),
            window: 3,
            pad_vector: Vector::from(vec![0.25]),
        };
        let f = char_cnn_features(&p, &scalars(&[0.4])).unwrap();
        let expect0 = (0.1 + 0.25 + 2.0 * 0.4 + 3.0 * 0.25f64).tanh();
        let expect1 = (-0.2 - 0.25 + 0.5 * 0.4f64).tanh();
        assert!((f[0] - expect0).abs() < 1e-15);
        assert!((f[1] - expect1).abs() < 1e-15);
    }

    #[test]
    fn zero_filters_give_zero_features() {
        let p = CnnParams::zeros(4, 3, 2);
        let xs = vec![Vector::from(vec![5.0, -3.0]), Vector::from(vec![1.0, 1.0])];
        assert_eq!(char_cnn_features(&p, &xs).unwrap(), Vector::zeros(4));
    }

    #[test]
    fn window_multiset_permutations_preserve_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = CnnParams::init(5, 1, 3, &mut rng);
        let xs: Vec<Vector> = (0..4).map(|i| Vector::from(vec![i as f64 * 0.3, -0.2, 0.1 * i as f64])).collect();
        let mut permuted = xs.clone();
        permuted.reverse();
        assert_eq!(char_cnn_features(&p, &xs).unwrap(), char_cnn_features(&p, &permuted).unwrap());

        let p3 = CnnParams::init(5, 3, 3, &mut rng);
        assert_ne!(char_cnn_features(&p3, &xs).unwrap(), char_cnn_features(&p3, &permuted).unwrap());
    }

    #[test]
    fn rejects_bad_configuration() {
        let mut p = CnnParams::zeros(2, 2, 2);
        assert!(matches!(p.validate(), Err(Error::Config(_))));
        p = CnnParams::zeros(0, 3, 2);
        assert!(p.validate().is_err());
        let p = CnnParams::zeros(2, 3, 2);
        assert!(char_cnn_features(&p, &[]).is_err());
        assert!(char_cnn_features(&p, &[Vector::zeros(3)]).is_err());
    }
}
