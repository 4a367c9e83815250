//! Dense vector and matrix primitives shared by every layer.
//!
//! Everything here works at double precision over row-major storage. The
//! public operations check shapes and return [`Error::Shape`]; the
//! `*_acc` kernels are the unchecked inner loops used by the layers once
//! shapes have been validated at construction time.

use std::ops::{Index, IndexMut};

use crate::error::{shape_err, Error, Result};

/// A dense column vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn ones(dim: usize) -> Self {
        Vector(vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        check_same_dim(self, other, "add")?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, c: f64) -> Vector {
        self.0.iter().map(|a| a * c).collect()
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_same_dim(self, other, "dot")?;
        Ok(dot(&self.0, &other.0))
    }

    /// Concatenates `self` and `other` into a new vector.
    pub fn concat(&self, other: &Vector) -> Vector {
        let mut out = Vec::with_capacity(self.dim() + other.dim());
        out.extend_from_slice(&self.0);
        out.extend_from_slice(&other.0);
        Vector(out)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Vector(iter.into_iter().collect())
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// A dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape_err(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(shape_err(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Appends a row, growing the matrix by one.
    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(shape_err(format!(
                "pushed row has {} columns, expected {}",
                row.len(),
                self.cols
            )));
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

fn check_same_dim(a: &Vector, b: &Vector, op: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(shape_err(format!(
            "{op}: dimensions {} and {} differ",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Matrix-vector product `m · v`.
pub fn matvec(m: &Matrix, v: &Vector) -> Result<Vector> {
    if m.cols != v.dim() {
        return Err(shape_err(format!(
            "matvec: {}x{} matrix times {}-vector",
            m.rows,
            m.cols,
            v.dim()
        )));
    }
    let mut out = vec![0.0; m.rows];
    matvec_acc(m, v.as_slice(), &mut out);
    Ok(Vector(out))
}

/// Elementwise logistic function.
pub fn sigmoid(v: &Vector) -> Vector {
    v.iter().map(|&z| sigmoid_scalar(z)).collect()
}

/// Elementwise hyperbolic tangent.
pub fn tanh_vec(v: &Vector) -> Vector {
    v.iter().map(|z| z.tanh()).collect()
}

/// Componentwise product.
pub fn hadamard(a: &Vector, b: &Vector) -> Result<Vector> {
    check_same_dim(a, b, "hadamard")?;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x * y).collect())
}

/// `log Σ exp(v_i)`, shifted by the maximum so large inputs do not overflow.
pub fn log_sum_exp(v: &Vector) -> Result<f64> {
    if v.dim() == 0 {
        return Err(Error::Domain("log_sum_exp of an empty vector".into()));
    }
    Ok(log_sum_exp_slice(v.as_slice()))
}

/// Central-difference gradient check.
///
/// Returns `max_i |fd_i - analytic_i| / max(1, |analytic_i|)` where `fd_i` is
/// the central difference of `f` along coordinate `i` with step `eps`.
pub fn grad_check<F>(mut f: F, p: &Vector, analytic_grad: &Vector, eps: f64) -> Result<f64>
where
    F: FnMut(&Vector) -> f64,
{
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("grad_check step must be positive, got {eps}")));
    }
    check_same_dim(p, analytic_grad, "grad_check")?;
    let mut probe = p.clone();
    let mut worst = 0.0f64;
    for i in 0..p.dim() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let plus = f(&probe);
        probe[i] = orig - eps;
        let minus = f(&probe);
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "objective is not finite around coordinate {i}"
            )));
        }
        let fd = (plus - minus) / (2.0 * eps);
        let a = analytic_grad[i];
        worst = worst.max((fd - a).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Unchecked kernels.

#[inline]
pub(crate) fn sigmoid_scalar(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

// Each kernel is compiled twice: once portable, once with AVX2 and FMA
// enabled, picked at run time. The loops live inside the dispatched
// functions so the inner `dot`/`axpy` calls inline.
macro_rules! kernels {
    ($($attr:meta)?) => {
        $(#[$attr])?
        #[inline]
        pub unsafe fn matvec_acc(m: &Matrix, v: &[f64], out: &mut [f64]) {
            let full = m.rows / 4 * 4;
            for r in (0..full).step_by(4) {
                let d = unsafe { dot4([m.row(r), m.row(r + 1), m.row(r + 2), m.row(r + 3)], v) };
                for k in 0..4 {
                    out[r + k] += d[k];
                }
            }
            for r in full..m.rows {
                out[r] += unsafe { dot(m.row(r), v) };
            }
        }

        $(#[$attr])?
        #[inline]
        pub unsafe fn matvec_t_acc(m: &Matrix, v: &[f64], out: &mut [f64]) {
            let full = m.rows / 4 * 4;
            for r in (0..full).step_by(4) {
                let s = [v[r], v[r + 1], v[r + 2], v[r + 3]];
                unsafe { axpy4(s, [m.row(r), m.row(r + 1), m.row(r + 2), m.row(r + 3)], out) };
            }
            for r in full..m.rows {
                unsafe { axpy(v[r], m.row(r), out) };
            }
        }

        $(#[$attr])?
        #[inline]
        pub unsafe fn outer_acc(m: &mut Matrix, a: &[f64], b: &[f64]) {
            for (r, &s) in a.iter().enumerate() {
                if s != 0.0 {
                    unsafe { axpy(s, b, m.row_mut(r)) };
                }
            }
        }

        $(#[$attr])?
        pub unsafe fn matvec_batch_acc<V: AsRef<[f64]>>(m: &Matrix, vs: &[V], outs: &mut [Vec<f64>]) {
            let full = vs.len() / 4 * 4;
            for r in 0..m.rows {
                let row = m.row(r);
                for t in (0..full).step_by(4) {
                    let quad = [vs[t].as_ref(), vs[t + 1].as_ref(), vs[t + 2].as_ref(), vs[t + 3].as_ref()];
                    let d = unsafe { dot4(quad, row) };
                    for k in 0..4 {
                        outs[t + k][r] += d[k];
                    }
                }
                for t in full..vs.len() {
                    outs[t][r] += unsafe { dot(row, vs[t].as_ref()) };
                }
            }
        }

        $(#[$attr])?
        pub unsafe fn matvec_t_batch_acc<V: AsRef<[f64]>>(m: &Matrix, vs: &[V], outs: &mut [Vec<f64>]) {
            let full = m.rows / 4 * 4;
            for r in (0..full).step_by(4) {
                let rows = [m.row(r), m.row(r + 1), m.row(r + 2), m.row(r + 3)];
                for (v, o) in vs.iter().zip(outs.iter_mut()) {
                    let v = v.as_ref();
                    unsafe { axpy4([v[r], v[r + 1], v[r + 2], v[r + 3]], rows, o) };
                }
            }
            for r in full..m.rows {
                for (v, o) in vs.iter().zip(outs.iter_mut()) {
                    unsafe { axpy(v.as_ref()[r], m.row(r), o) };
                }
            }
        }

        $(#[$attr])?
        pub unsafe fn outer_batch_acc<A: AsRef<[f64]>, B: AsRef<[f64]>>(m: &mut Matrix, a: &[A], b: &[B]) {
            let full = a.len() / 4 * 4;
            for r in 0..m.rows {
                let row = m.row_mut(r);
                for t in (0..full).step_by(4) {
                    let s = [a[t].as_ref()[r], a[t + 1].as_ref()[r], a[t + 2].as_ref()[r], a[t + 3].as_ref()[r]];
                    let quad = [b[t].as_ref(), b[t + 1].as_ref(), b[t + 2].as_ref(), b[t + 3].as_ref()];
                    unsafe { axpy4(s, quad, row) };
                }
                for t in full..a.len() {
                    unsafe { axpy(a[t].as_ref()[r], b[t].as_ref(), row) };
                }
            }
        }
    };
}

mod portable {
    use super::Matrix;

    #[inline]
    pub unsafe fn dot(a: &[f64], b: &[f64]) -> f64 {
        let mut acc = [0.0f64; 4];
        let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
        let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
        for (x, y) in ca.zip(cb) {
            for k in 0..4 {
                acc[k] += x[k] * y[k];
            }
        }
        (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
    }

    #[inline]
    pub unsafe fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += a * xi;
        }
    }

    /// Dot products of four vectors with `v`.
    #[inline]
    pub unsafe fn dot4(xs: [&[f64]; 4], v: &[f64]) -> [f64; 4] {
        xs.map(|x| unsafe { dot(x, v) })
    }

    /// `y += Σ_k s[k] · xs[k]`
    #[inline]
    pub unsafe fn axpy4(s: [f64; 4], xs: [&[f64]; 4], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += s[0] * xs[0][i] + s[1] * xs[1][i] + s[2] * xs[2][i] + s[3] * xs[3][i];
        }
    }

    kernels!();
}

#[cfg(target_arch = "x86_64")]
mod avx2 {
    use super::Matrix;
    use std::arch::x86_64::*;

    pub fn available() -> bool {
        is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma")
    }

    #[target_feature(enable = "avx2,fma")]
    #[inline]
    pub unsafe fn dot(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len().min(b.len());
        let (pa, pb) = (a.as_ptr(), b.as_ptr());
        let mut acc0 = _mm256_setzero_pd();
        let mut acc1 = _mm256_setzero_pd();
        let mut i = 0;
        // SAFETY: every load reads `i..i + 4` with `i + 4 <= n`.
        unsafe {
            while i + 8 <= n {
                acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(pa.add(i)), _mm256_loadu_pd(pb.add(i)), acc0);
                acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(pa.add(i + 4)), _mm256_loadu_pd(pb.add(i + 4)), acc1);
                i += 8;
            }
            if i + 4 <= n {
                acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(pa.add(i)), _mm256_loadu_pd(pb.add(i)), acc0);
                i += 4;
            }
        }
        let mut lanes = [0.0f64; 4];
        // SAFETY: `lanes` holds four f64.
        unsafe { _mm256_storeu_pd(lanes.as_mut_ptr(), _mm256_add_pd(acc0, acc1)) };
        let mut s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
        while i < n {
            s += a[i] * b[i];
            i += 1;
        }
        s
    }

    #[target_feature(enable = "avx2,fma")]
    #[inline]
    pub unsafe fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
        let n = x.len().min(y.len());
        let (px, py) = (x.as_ptr(), y.as_mut_ptr());
        let va = _mm256_set1_pd(alpha);
        let mut i = 0;
        // SAFETY: every access covers `i..i + 4` with `i + 4 <= n`.
        unsafe {
            while i + 4 <= n {
                let v = _mm256_fmadd_pd(va, _mm256_loadu_pd(px.add(i)), _mm256_loadu_pd(py.add(i)));
                _mm256_storeu_pd(py.add(i), v);
                i += 4;
            }
        }
        while i < n {
            y[i] += alpha * x[i];
            i += 1;
        }
    }

    #[target_feature(enable = "avx2,fma")]
    #[inline]
    pub unsafe fn dot4(xs: [&[f64]; 4], v: &[f64]) -> [f64; 4] {
        let n = v.len();
        debug_assert!(xs.iter().all(|x| x.len() >= n));
        let p = xs.map(<[f64]>::as_ptr);
        let pv = v.as_ptr();
        let mut acc = [_mm256_setzero_pd(); 4];
        let mut i = 0;
        // SAFETY: every load reads `i..i + 4` with `i + 4 <= n`.
        unsafe {
            while i + 4 <= n {
                let vv = _mm256_loadu_pd(pv.add(i));
                for k in 0..4 {
                    acc[k] = _mm256_fmadd_pd(_mm256_loadu_pd(p[k].add(i)), vv, acc[k]);
                }
                i += 4;
            }
        }
        let mut out = [0.0; 4];
        for k in 0..4 {
            let mut lanes = [0.0f64; 4];
            // SAFETY: `lanes` holds four f64.
            unsafe { _mm256_storeu_pd(lanes.as_mut_ptr(), acc[k]) };
            out[k] = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
            for j in i..n {
                out[k] += xs[k][j] * v[j];
            }
        }
        out
    }

    #[target_feature(enable = "avx2,fma")]
    #[inline]
    pub unsafe fn axpy4(s: [f64; 4], xs: [&[f64]; 4], y: &mut [f64]) {
        let n = y.len();
        debug_assert!(xs.iter().all(|x| x.len() >= n));
        let p = xs.map(<[f64]>::as_ptr);
        let py = y.as_mut_ptr();
        let vs = s.map(|v| _mm256_set1_pd(v));
        let mut i = 0;
        // SAFETY: every access covers `i..i + 4` with `i + 4 <= n`.
        unsafe {
            while i + 4 <= n {
                let mut acc = _mm256_loadu_pd(py.add(i));
                for k in 0..4 {
                    acc = _mm256_fmadd_pd(vs[k], _mm256_loadu_pd(p[k].add(i)), acc);
                }
                _mm256_storeu_pd(py.add(i), acc);
                i += 4;
            }
        }
        while i < n {
            y[i] += s[0] * xs[0][i] + s[1] * xs[1][i] + s[2] * xs[2][i] + s[3] * xs[3][i];
            i += 1;
        }
    }

    kernels!(target_feature(enable = "avx2,fma"));
}

macro_rules! dispatch {
    ($name:ident($($arg:expr),*)) => {{
        #[cfg(target_arch = "x86_64")]
        {
            if avx2::available() {
                // SAFETY: the CPU supports AVX2 and FMA.
                return unsafe { avx2::$name($($arg),*) };
            }
        }
        // SAFETY: the portable kernels have no preconditions.
        unsafe { portable::$name($($arg),*) }
    }};
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    dispatch!(dot(a, b))
}

/// `y += a · x`
#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    dispatch!(axpy(a, x, y))
}

/// `out += m · v`
pub(crate) fn matvec_acc(m: &Matrix, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.cols, v.len());
    debug_assert_eq!(m.rows, out.len());
    dispatch!(matvec_acc(m, v, out))
}

/// `out += mᵀ · v`
pub(crate) fn matvec_t_acc(m: &Matrix, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.rows, v.len());
    debug_assert_eq!(m.cols, out.len());
    dispatch!(matvec_t_acc(m, v, out))
}

/// `m += a ⊗ b` (rank-one update).
pub(crate) fn outer_acc(m: &mut Matrix, a: &[f64], b: &[f64]) {
    debug_assert_eq!(m.rows, a.len());
    debug_assert_eq!(m.cols, b.len());
    dispatch!(outer_acc(m, a, b))
}

/// `outs[t] += m · vs[t]` for every `t`, reading each row of `m` once.
pub(crate) fn matvec_batch_acc<V: AsRef<[f64]>>(m: &Matrix, vs: &[V], outs: &mut [Vec<f64>]) {
    debug_assert_eq!(vs.len(), outs.len());
    dispatch!(matvec_batch_acc(m, vs, outs))
}

/// `outs[t] += mᵀ · vs[t]` for every `t`, reading each row of `m` once.
pub(crate) fn matvec_t_batch_acc<V: AsRef<[f64]>>(m: &Matrix, vs: &[V], outs: &mut [Vec<f64>]) {
    debug_assert_eq!(vs.len(), outs.len());
    dispatch!(matvec_t_batch_acc(m, vs, outs))
}

/// `m += Σ_t a[t] ⊗ b[t]`, writing each row of `m` once.
pub(crate) fn outer_batch_acc<A: AsRef<[f64]>, B: AsRef<[f64]>>(m: &mut Matrix, a: &[A], b: &[B]) {
    debug_assert_eq!(a.len(), b.len());
    dispatch!(outer_batch_acc(m, a, b))
}

/// Max-shifted log-sum-exp. Returns `-inf` when every entry is `-inf`.
pub(crate) fn log_sum_exp_slice(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = v.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}
