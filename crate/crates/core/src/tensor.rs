//! Dense row-major f64 matrix kernels and the finite-difference gradient
//! checker. Accumulation order is fixed (ascending index) everywhere so
//! results are bit-identical across runs and thread counts; large products
//! parallelize over independent output rows only.

use crate::error::{Error, Result};
use rayon::prelude::*;

/// Work threshold (multiply-adds) above which matmul rows run in parallel.
const PAR_THRESHOLD: usize = 1 << 21;

/// Dense row-major matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from row-major data; length must be rows x cols.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "data length {} does not match {rows}x{cols}",
            data.len()
        );
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for x in &mut self.data {
            *x *= s;
        }
    }

    /// self += alpha * other
    pub fn axpy(&mut self, alpha: f64, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "axpy shape");
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += alpha * y;
        }
    }

    pub fn hadamard(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "hadamard shape");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        }
    }

    /// Adds `v` to every row (bias broadcast).
    pub fn add_row_vector(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.cols, "bias width");
        for r in 0..self.rows {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (x, b) in row.iter_mut().zip(v) {
                *x += b;
            }
        }
    }

    /// Column sums (ascending row order).
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        out
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

fn matmul_row(out_row: &mut [f64], a_row: &[f64], b: &Matrix) {
    let n = b.cols;
    for (k, &aik) in a_row.iter().enumerate() {
        if aik == 0.0 {
            continue;
        }
        let b_row = &b.data[k * n..(k + 1) * n];
        for (o, &bkj) in out_row.iter_mut().zip(b_row) {
            *o += aik * bkj;
        }
    }
}

/// Standard product a * b. Panics on dimension mismatch, naming both shapes.
pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(
        a.cols, b.rows,
        "matmul dimension mismatch: {}x{} * {}x{}",
        a.rows, a.cols, b.rows, b.cols
    );
    let mut out = Matrix::zeros(a.rows, b.cols);
    let work = a.rows * a.cols * b.cols;
    if work >= PAR_THRESHOLD && a.rows > 1 {
        out.data
            .par_chunks_mut(b.cols)
            .enumerate()
            .for_each(|(i, out_row)| matmul_row(out_row, a.row(i), b));
    } else {
        for i in 0..a.rows {
            let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
            matmul_row(out_row, a.row(i), b);
        }
    }
    out
}

fn at_b_accumulate(out: &mut Matrix, a: &Matrix, b: &Matrix, lo: usize, hi: usize) {
    let p = b.cols;
    for i in lo..hi {
        let a_row = a.row(i);
        let b_row = b.row(i);
        for (k, &aik) in a_row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let out_row = &mut out.data[k * p..(k + 1) * p];
            for (o, &bij) in out_row.iter_mut().zip(b_row) {
                *o += aik * bij;
            }
        }
    }
}

/// a^T * b without materializing the transpose (a: n x m, b: n x p -> m x p).
/// Large inputs accumulate over a fixed number of row chunks reduced in
/// chunk order, so the result does not depend on thread count.
pub fn matmul_at_b(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(
        a.rows, b.rows,
        "matmul_at_b dimension mismatch: {}x{} ^T * {}x{}",
        a.rows, a.cols, b.rows, b.cols
    );
    let work = a.rows * a.cols * b.cols;
    if work >= PAR_THRESHOLD && a.rows >= 32 {
        const CHUNKS: usize = 16;
        let per = a.rows.div_ceil(CHUNKS);
        let partials: Vec<Matrix> = (0..CHUNKS)
            .into_par_iter()
            .map(|ci| {
                let lo = ci * per;
                let hi = ((ci + 1) * per).min(a.rows);
                let mut out = Matrix::zeros(a.cols, b.cols);
                if lo < hi {
                    at_b_accumulate(&mut out, a, b, lo, hi);
                }
                out
            })
            .collect();
        let mut iter = partials.into_iter();
        let mut out = iter.next().unwrap();
        for partial in iter {
            out.axpy(1.0, &partial);
        }
        out
    } else {
        let mut out = Matrix::zeros(a.cols, b.cols);
        at_b_accumulate(&mut out, a, b, 0, a.rows);
        out
    }
}

/// a * b^T (a: n x m, b: p x m -> n x p).
pub fn matmul_a_bt(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(
        a.cols, b.cols,
        "matmul_a_bt dimension mismatch: {}x{} * {}x{} ^T",
        a.rows, a.cols, b.rows, b.cols
    );
    let mut out = Matrix::zeros(a.rows, b.rows);
    let work = a.rows * a.cols * b.rows;
    let p = b.rows;
    let do_row = |i: usize, out_row: &mut [f64], a_: &Matrix, b_: &Matrix| {
        let a_row = a_.row(i);
        for (j, slot) in out_row.iter_mut().enumerate() {
            let b_row = b_.row(j);
            let mut acc = 0.0;
            for (x, y) in a_row.iter().zip(b_row) {
                acc += x * y;
            }
            *slot = acc;
        }
    };
    if work >= PAR_THRESHOLD && a.rows > 1 {
        out.data
            .par_chunks_mut(p)
            .enumerate()
            .for_each(|(i, out_row)| do_row(i, out_row, a, b));
    } else {
        for i in 0..a.rows {
            let out_row = &mut out.data[i * p..(i + 1) * p];
            do_row(i, out_row, a, b);
        }
    }
    out
}

/// Row-wise softmax, stabilized by per-row max subtraction.
pub fn row_softmax(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    out
}

/// Central-difference check of an analytic gradient.
///
/// Returns the max over entries of |analytic - cd| / (|analytic| + |cd| + 1e-12).
/// Errors if `eps <= 0` or the function is non-finite at any perturbation.
pub fn grad_check(
    mut f: impl FnMut(&Matrix) -> f64,
    x: &Matrix,
    analytic: &Matrix,
    eps: f64,
) -> Result<f64> {
    if eps <= 0.0 {
        return Err(Error::InvalidArg(format!("grad_check eps must be > 0, got {eps}")));
    }
    assert_eq!(
        (x.rows, x.cols),
        (analytic.rows, analytic.cols),
        "analytic gradient shape must match x"
    );
    if !f(x).is_finite() {
        return Err(Error::NonFinite("grad_check: f(x)".into()));
    }
    let mut worst = 0.0f64;
    let mut xp = x.clone();
    for i in 0..x.data.len() {
        let orig = x.data[i];
        xp.data[i] = orig + eps;
        let fp = f(&xp);
        xp.data[i] = orig - eps;
        let fm = f(&xp);
        xp.data[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite("grad_check: f at perturbation".into()));
        }
        let cd = (fp - fm) / (2.0 * eps);
        let a = analytic.data[i];
        let rel = (a - cd).abs() / (a.abs() + cd.abs() + 1e-12);
        worst = worst.max(rel);
    }
    Ok(worst)
}
