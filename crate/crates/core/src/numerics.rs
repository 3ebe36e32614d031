//! Dense linear algebra, activations, seeded randomness and a
//! finite-difference gradient oracle.
//!
//! Everything runs in `f64`. The matrices here are small (tens of rows), so
//! the hot-path helpers (`gemv_acc`, `gemv_t_acc`, `outer_acc`) work on plain
//! slices and accumulate into caller-owned buffers to avoid per-step
//! allocation.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
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
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                "Matrix::from_vec",
                format!("{} values for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("Matrix::from_vec ({bad})")));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Contract("ragged rows".into()));
        }
        Matrix::from_vec(rows.len(), cols, rows.concat())
    }

    /// Glorot-uniform initialization: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
    pub fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.uniform_unchecked(-limit, limit)).collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dims(
                "matmul",
                format!("lhs cols = rhs rows ({})", self.cols),
                format!("{}x{} * {}x{}", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `out += self * x`. Lengths are the caller's responsibility (debug-asserted).
    #[inline]
    pub fn gemv_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        if self.cols == 0 {
            return;
        }
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o += dot(row, x);
        }
    }

    /// `out += self^T * v`.
    #[inline]
    pub fn gemv_t_acc(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        if self.cols == 0 {
            return;
        }
        for (&vi, row) in v.iter().zip(self.data.chunks_exact(self.cols)) {
            if vi == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(row) {
                *o += vi * w;
            }
        }
    }

    /// `self += a * b^T`.
    #[inline]
    pub fn outer_acc(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        if self.cols == 0 {
            return;
        }
        for (&ai, row) in a.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if ai == 0.0 {
                continue;
            }
            for (w, &bj) in row.iter_mut().zip(b) {
                *w += ai * bj;
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

/// Seeded pseudo-random source.
///
/// Backed by ChaCha8 (via `rand_chacha`), whose output is value-stable across
/// crate versions. Independent sub-streams for one experiment seed are
/// obtained with [`Rng::derive`], which selects a distinct ChaCha stream id,
/// so weight initialization, training data and test data never share draws.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Contract(format!("uniform requires lo < hi, got [{lo}, {hi})")));
        }
        Ok(self.uniform_unchecked(lo, hi))
    }

    pub(crate) fn uniform_unchecked(&mut self, lo: f64, hi: f64) -> f64 {
        let u: f64 = self.inner.gen();
        let v = lo + (hi - lo) * u;
        // lo + (hi-lo)*u can round up to hi when u is close to 1
        if v >= hi {
            lo.max(hi - (hi - lo) * f64::EPSILON)
        } else {
            v
        }
    }

    /// Uniform integer in the inclusive range `[lo, hi]`.
    pub fn uniform_int(&mut self, lo: usize, hi: usize) -> usize {
        assert!(lo <= hi, "uniform_int requires lo <= hi");
        self.inner.gen_range(lo..=hi)
    }
}

/// Central finite-difference gradient of `f` at `p`.
pub fn finite_diff_grad<F>(mut f: F, p: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Contract(format!("finite_diff_grad requires eps > 0, got {eps}")));
    }
    let mut work = p.to_vec();
    let mut grad = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        work[i] = p[i] + eps;
        let plus = f(&work);
        work[i] = p[i] - eps;
        let minus = f(&work);
        work[i] = p[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("finite_diff_grad coordinate {i}")));
        }
        grad.push((plus - minus) / (2.0 * eps));
    }
    Ok(grad)
}

/// Mean and sample standard deviation (n - 1 denominator; 0 for n < 2).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn identity_times_m_is_m() {
        let m = Matrix::from_rows(&[&[1.0, -2.0, 0.5], &[3.0, 4.0, 7.0]]).unwrap();
        assert_eq!(Matrix::identity(2).matmul(&m).unwrap(), m);
    }

    #[test]
    fn zeros_absorb() {
        let m = Matrix::from_rows(&[&[1.0], &[2.0], &[3.0]]).unwrap();
        assert_eq!(Matrix::zeros(2, 3).matmul(&m).unwrap(), Matrix::zeros(2, 1));
    }

    #[test]
    fn small_product_by_hand() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[&[1.0], &[1.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_rejects_bad_dims() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(a.matmul(&Matrix::zeros(2, 1)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn from_vec_rejects_non_finite() {
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn gemv_helpers_match_matmul() {
        let mut rng = Rng::new(3);
        let m = Matrix::glorot(4, 3, &mut rng);
        let x: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0).unwrap()).collect();
        let v: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0).unwrap()).collect();
        let mut out = vec![0.0; 4];
        m.gemv_acc(&x, &mut out);
        let reference = m.matmul(&Matrix::from_vec(3, 1, x.clone()).unwrap()).unwrap();
        for (a, b) in out.iter().zip(reference.as_slice()) {
            assert!(close(*a, *b, 1e-14));
        }
        let mut back = vec![0.0; 3];
        m.gemv_t_acc(&v, &mut back);
        for j in 0..3 {
            let expect: f64 = (0..4).map(|i| m.get(i, j) * v[i]).sum();
            assert!(close(back[j], expect, 1e-14));
        }
        let mut acc = Matrix::zeros(4, 3);
        acc.outer_acc(&v, &x);
        assert!(close(acc.get(2, 1), v[2] * x[1], 0.0));
    }

    #[test]
    fn activations() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(tanh(0.0), 0.0);
        let mut rng = Rng::new(11);
        for _ in 0..1000 {
            let x = rng.uniform(-30.0, 30.0).unwrap();
            assert!(close(sigmoid(x) + sigmoid(-x), 1.0, 1e-15));
            assert!(sigmoid(x) > 0.0 && sigmoid(x) < 1.0 || x.abs() > 30.0);
        }
        assert!(sigmoid(1.0) < sigmoid(1.1));
        assert!(tanh(0.3) < tanh(0.31));
        assert!(sigmoid(800.0).is_finite() && sigmoid(-800.0) == 0.0);
    }

    #[test]
    fn rng_determinism_and_range() {
        let a: Vec<f64> = {
            let mut r = Rng::new(7);
            (0..5).map(|_| r.uniform(-1.0, 1.0).unwrap()).collect()
        };
        let b: Vec<f64> = {
            let mut r = Rng::new(7);
            (0..5).map(|_| r.uniform(-1.0, 1.0).unwrap()).collect()
        };
        assert_eq!(a, b);

        let mut r = Rng::new(12345);
        let draws: Vec<f64> = (0..100_000).map(|_| r.uniform(-1.0, 1.0).unwrap()).collect();
        assert!(draws.iter().all(|v| (-1.0..1.0).contains(v)));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn derived_streams_differ() {
        let mut a = Rng::derive(5, 1);
        let mut b = Rng::derive(5, 2);
        assert_ne!(a.uniform(0.0, 1.0).unwrap(), b.uniform(0.0, 1.0).unwrap());
    }

    #[test]
    fn uniform_rejects_empty_interval() {
        let mut r = Rng::new(1);
        assert!(r.uniform(1.0, 1.0).is_err());
        assert!(r.uniform(2.0, 1.0).is_err());
    }

    #[test]
    fn finite_diff_examples() {
        let g = finite_diff_grad(|p| p[0] * p[0], &[3.0], 1e-5).unwrap();
        assert!(close(g[0], 6.0, 1e-6));

        let g = finite_diff_grad(|_| 4.2, &[1.0, -2.0], 1e-5).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);

        let sech2 = 1.0 / 0.5f64.cosh().powi(2);
        let g = finite_diff_grad(|p| p[0].tanh(), &[0.5], 1e-5).unwrap();
        assert!(close(g[0], sech2, 1e-6));
        assert!(close(sech2, 0.7864, 1e-4));
    }

    #[test]
    fn finite_diff_errors() {
        assert!(finite_diff_grad(|p| p[0], &[1.0], 0.0).is_err());
        assert!(matches!(
            finite_diff_grad(|p| if p[0] > 1.0 { f64::NAN } else { p[0] }, &[1.0], 1e-5),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn stats_helpers() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert!(close(m, 2.5, 1e-15));
        assert!(close(s, (5.0f64 / 3.0).sqrt(), 1e-15));
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
