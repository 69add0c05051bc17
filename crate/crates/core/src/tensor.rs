//! Dense row-major f32 matrices and the numeric kernels the forward pass uses.
//!
//! Every output element of [`linear`] is produced by the same fixed-order
//! reduction regardless of how many rows are processed together, so
//! chunked (KV-cached) and whole-sequence evaluation agree bit for bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.rows).map(|i| l2_norm(self.row(i))).collect()
    }

    /// Copy of rows `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Matrix {
        Matrix::from_vec(
            end - start,
            self.cols,
            self.data[start * self.cols..end * self.cols].to_vec(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn row_is_zero(&self, i: usize) -> bool {
        self.row(i).iter().all(|&v| v == 0.0)
    }
}

pub fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

const LANES: usize = 8;

/// Fixed-order dot product: eight strided partial sums, combined pairwise,
/// then the tail.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; LANES];
    let chunks = a.len() / LANES;
    for c in 0..chunks {
        let (xa, xb) = (&a[c * LANES..c * LANES + LANES], &b[c * LANES..c * LANES + LANES]);
        for l in 0..LANES {
            acc[l] += xa[l] * xb[l];
        }
    }
    let mut sum = combine(&acc);
    for i in chunks * LANES..a.len() {
        sum += a[i] * b[i];
    }
    sum
}

#[inline]
fn combine(acc: &[f32; LANES]) -> f32 {
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]))
}

/// Four dot products against one shared right-hand side; each result is
/// bit-identical to [`dot`] on the same pair.
#[inline]
fn dot4(a: [&[f32]; 4], b: &[f32]) -> [f32; 4] {
    let mut acc = [[0.0f32; LANES]; 4];
    let chunks = b.len() / LANES;
    for c in 0..chunks {
        let xb = &b[c * LANES..c * LANES + LANES];
        for (r, row) in a.iter().enumerate() {
            let xa = &row[c * LANES..c * LANES + LANES];
            for l in 0..LANES {
                acc[r][l] += xa[l] * xb[l];
            }
        }
    }
    let mut out = [0.0f32; 4];
    for r in 0..4 {
        let mut sum = combine(&acc[r]);
        for i in chunks * LANES..b.len() {
            sum += a[r][i] * b[i];
        }
        out[r] = sum;
    }
    out
}

/// `y = x Wᵀ + b` with `W` stored `out × in` row-major.
pub fn linear(x: &Matrix, weight: &[f32], bias: Option<&[f32]>, out_features: usize) -> Matrix {
    let in_features = x.cols;
    debug_assert_eq!(weight.len(), out_features * in_features);
    let rows = x.rows;
    let mut out = Matrix::zeros(rows, out_features);
    if rows == 0 || out_features == 0 {
        return out;
    }

    // Split work over output features so single-row decoding also parallelizes.
    let work = rows * out_features * in_features;
    let chunk = if work < 1 << 16 {
        out_features
    } else {
        (out_features / (rayon::current_num_threads() * 4)).max(16)
    };
    let cols: Vec<(usize, Vec<f32>)> = (0..out_features)
        .step_by(chunk)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|o0| {
            let o1 = (o0 + chunk).min(out_features);
            let width = o1 - o0;
            let mut block = vec![0.0f32; rows * width];
            let mut r = 0;
            while r + 4 <= rows {
                let xs = [x.row(r), x.row(r + 1), x.row(r + 2), x.row(r + 3)];
                for o in o0..o1 {
                    let w = &weight[o * in_features..(o + 1) * in_features];
                    let d = dot4(xs, w);
                    for k in 0..4 {
                        block[(r + k) * width + (o - o0)] = d[k];
                    }
                }
                r += 4;
            }
            while r < rows {
                let xr = x.row(r);
                for o in o0..o1 {
                    block[r * width + (o - o0)] = dot(xr, &weight[o * in_features..(o + 1) * in_features]);
                }
                r += 1;
            }
            (o0, block)
        })
        .collect();

    for (o0, block) in cols {
        let width = block.len() / rows;
        for r in 0..rows {
            out.row_mut(r)[o0..o0 + width].copy_from_slice(&block[r * width..(r + 1) * width]);
        }
    }
    if let Some(b) = bias {
        for r in 0..rows {
            for (y, bb) in out.row_mut(r).iter_mut().zip(b) {
                *y += bb;
            }
        }
    }
    out
}

/// Normalize a row to zero mean and unit variance (no gain/bias).
pub fn normalize_row(row: &[f32], eps: f32, out: &mut [f32]) {
    let n = row.len() as f32;
    let mean = row.iter().sum::<f32>() / n;
    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f32>() / n;
    let inv = 1.0 / (var + eps).sqrt();
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - mean) * inv;
    }
}

/// Row-wise layer normalization with gain and bias.
pub fn layer_norm(x: &Matrix, gain: &[f32], bias: &[f32], eps: f32) -> Matrix {
    let mut out = Matrix::zeros(x.rows, x.cols);
    for r in 0..x.rows {
        let o = out.row_mut(r);
        normalize_row(x.row(r), eps, o);
        for ((v, g), b) in o.iter_mut().zip(gain).zip(bias) {
            *v = *v * g + b;
        }
    }
    out
}

/// GELU, tanh approximation.
#[inline]
pub fn gelu(x: f32) -> f32 {
    const SQRT_2_OVER_PI: f32 = 0.797_884_6;
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + 0.044_715 * x * x * x)).tanh())
}

/// Numerically stable log-softmax of one row, in f64.
pub fn log_softmax(row: &[f32]) -> Vec<f64> {
    let max = row.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64;
    let lse = row.iter().map(|&v| (f64::from(v) - max).exp()).sum::<f64>().ln() + max;
    row.iter().map(|&v| f64::from(v) - lse).collect()
}

pub fn softmax(row: &[f32]) -> Vec<f64> {
    log_softmax(row).into_iter().map(f64::exp).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dot4_matches_dot() {
        let a: Vec<Vec<f32>> = (0..4)
            .map(|r| (0..37).map(|i| ((i * 7 + r * 13) % 11) as f32 * 0.37 - 1.2).collect())
            .collect();
        let b: Vec<f32> = (0..37).map(|i| (i as f32 * 0.11).sin()).collect();
        let d4 = dot4([&a[0], &a[1], &a[2], &a[3]], &b);
        for r in 0..4 {
            assert_eq!(d4[r].to_bits(), dot(&a[r], &b).to_bits());
        }
    }

    #[test]
    fn linear_is_row_chunk_invariant() {
        let rows = 9;
        let (inp, out) = (40, 300);
        let x = Matrix::from_vec(rows, inp, (0..rows * inp).map(|i| ((i % 17) as f32 - 8.0) * 0.1).collect());
        let w: Vec<f32> = (0..inp * out).map(|i| ((i % 23) as f32 - 11.0) * 0.01).collect();
        let full = linear(&x, &w, None, out);
        for r in 0..rows {
            let single = linear(&x.slice_rows(r, r + 1), &w, None, out);
            assert_eq!(single.row(0), full.row(r));
        }
    }

    #[test]
    fn uniform_row_log_softmax() {
        let lp = log_softmax(&[0.25f32; 32]);
        for v in lp {
            assert!((v + (32f64).ln()).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(row in proptest::collection::vec(-30.0f32..30.0, 1..200)) {
            let s: f64 = softmax(&row).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-5);
        }

        #[test]
        fn normalized_rows_have_zero_mean_unit_variance(
            row in proptest::collection::vec(-50.0f32..50.0, 8..128),
        ) {
            // eps shrinks the output variance by var / (var + eps).
            let m0 = row.iter().map(|&v| f64::from(v)).sum::<f64>() / row.len() as f64;
            let v0 = row.iter().map(|&v| (f64::from(v) - m0).powi(2)).sum::<f64>() / row.len() as f64;
            prop_assume!(v0 > 0.5);
            let mut out = vec![0.0; row.len()];
            normalize_row(&row, 1e-5, &mut out);
            let n = out.len() as f64;
            let mean = out.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
            let var = out.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-5, "mean {}", mean);
            prop_assert!((var - 1.0).abs() < 1e-4, "var {}", var);
        }
    }
}
