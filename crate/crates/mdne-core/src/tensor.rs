//! Dense row-major `f64` matrices and the handful of operations the model is
//! built from.
//!
//! Everything here is deterministic: each output element is accumulated in a
//! fixed order that does not depend on thread count, so repeated runs produce
//! bitwise-identical results. Row-parallel execution (see [`set_threads`])
//! splits work by output row and never changes the per-element order.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Set the number of worker threads used for row-parallel matrix products.
/// Results are bitwise-independent of this setting.
pub fn set_threads(n: usize) {
    THREADS.store(n.max(1), Ordering::Relaxed);
}

pub fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

/// Dense row-major matrix of 64-bit floats.
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "from_vec",
                left: format!("{rows}x{cols}"),
                right: format!("len {}", data.len()),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Shape {
                    op: "from_rows",
                    left: format!("row len {c}"),
                    right: format!("row len {}", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
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

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// self += scale * other
    pub fn add_scaled(&mut self, other: &Matrix, scale: f64) -> Result<()> {
        self.check_same_shape("add_scaled", other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    fn check_same_shape(&self, op: &'static str, other: &Matrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape {
                op,
                left: format!("{}x{}", self.rows, self.cols),
                right: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(())
    }
}

/// y[j] += a * x[j]; used by the sparse-input layer products.
#[inline(always)]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    if cfg!(target_feature = "fma") {
        for (yj, xj) in y.iter_mut().zip(x) {
            *yj = a.mul_add(*xj, *yj);
        }
    } else {
        for (yj, xj) in y.iter_mut().zip(x) {
            *yj += a * xj;
        }
    }
}

/// Micro-kernel block size: MR output rows × NR output columns are held in
/// registers across the entire reduction loop.
const MR: usize = 4;
const NR: usize = 16;

/// One fused multiply-add lane-vector step.
#[inline(always)]
fn fma8(c: &mut [f64; 8], a: f64, b: &[f64; 8]) {
    if cfg!(target_feature = "fma") {
        for lane in 0..8 {
            c[lane] = a.mul_add(b[lane], c[lane]);
        }
    } else {
        for lane in 0..8 {
            c[lane] += a * b[lane];
        }
    }
}

/// Scalar accumulate matching the vector path op-for-op, so an element
/// computed by either path gets the same bits.
#[inline(always)]
fn fma1(c: f64, a: f64, b: f64) -> f64 {
    if cfg!(target_feature = "fma") {
        a.mul_add(b, c)
    } else {
        c + a * b
    }
}

/// a · b into a contiguous block of output rows starting at `row0`.
///
/// Register-blocked: each MR×NR output block is accumulated in registers
/// over the full k loop and stored once. Row and column tails fall back to
/// a scalar loop that performs the identical per-element operation
/// sequence (ascending k, one fused multiply-add per term), so results do
/// not depend on which path computes an element.
fn matmul_block(out_block: &mut [f64], row0: usize, a: &Matrix, b: &Matrix) {
    let cols = b.cols;
    let n_rows = out_block.len() / cols.max(1);
    let depth = a.cols;
    let ad = &a.data;
    let bd = &b.data;

    let mut jt = 0;
    while jt + NR <= cols {
        let mut r = 0;
        while r + MR <= n_rows {
            let mut acc = [[0.0f64; 8]; 2 * MR];
            for k in 0..depth {
                let bv0: &[f64; 8] = bd[k * cols + jt..][..8].try_into().unwrap();
                let bv1: &[f64; 8] = bd[k * cols + jt + 8..][..8].try_into().unwrap();
                for row in 0..MR {
                    let ar = ad[(row0 + r + row) * depth + k];
                    fma8(&mut acc[2 * row], ar, bv0);
                    fma8(&mut acc[2 * row + 1], ar, bv1);
                }
            }
            for row in 0..MR {
                let o = &mut out_block[(r + row) * cols + jt..(r + row) * cols + jt + NR];
                o[..8].copy_from_slice(&acc[2 * row]);
                o[8..].copy_from_slice(&acc[2 * row + 1]);
            }
            r += MR;
        }
        while r < n_rows {
            for j in jt..jt + NR {
                let mut s = 0.0;
                for k in 0..depth {
                    s = fma1(s, ad[(row0 + r) * depth + k], bd[k * cols + j]);
                }
                out_block[r * cols + j] = s;
            }
            r += 1;
        }
        jt += NR;
    }
    while jt < cols {
        for r in 0..n_rows {
            let mut s = 0.0;
            for k in 0..depth {
                s = fma1(s, ad[(row0 + r) * depth + k], bd[k * cols + jt]);
            }
            out_block[r * cols + jt] = s;
        }
        jt += 1;
    }
}

/// Standard matrix product a · b.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Shape {
            op: "matmul",
            left: format!("{}x{}", a.rows, a.cols),
            right: format!("{}x{}", b.rows, b.cols),
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    let cols = b.cols;
    let threads = threads();
    if threads <= 1 || a.rows < 2 * threads {
        matmul_block(&mut out.data, 0, a, b);
        return Ok(out);
    }
    let chunk_rows = a.rows.div_ceil(threads);
    std::thread::scope(|scope| {
        for (t, block) in out.data.chunks_mut(chunk_rows * cols).enumerate() {
            scope.spawn(move || matmul_block(block, t * chunk_rows, a, b));
        }
    });
    Ok(out)
}

/// aᵀ · b. The transpose is materialized (a is the small operand at every
/// call site) and the product runs through the blocked kernel.
pub fn matmul_at_b(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(Error::Shape {
            op: "matmul_at_b",
            left: format!("{}x{}", a.rows, a.cols),
            right: format!("{}x{}", b.rows, b.cols),
        });
    }
    matmul(&a.transpose(), b)
}

/// a · bᵀ. b is transposed once (it is the small operand in every call
/// site) and the product runs through the tiled kernel.
pub fn matmul_a_bt(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.cols {
        return Err(Error::Shape {
            op: "matmul_a_bt",
            left: format!("{}x{}", a.rows, a.cols),
            right: format!("{}x{}", b.rows, b.cols),
        });
    }
    matmul(a, &b.transpose())
}

/// Dot product with four independent lanes, combined in a fixed order.
#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = [0.0f64; 4];
    let chunks = x.len() / 4;
    for c in 0..chunks {
        let xb = &x[c * 4..c * 4 + 4];
        let yb = &y[c * 4..c * 4 + 4];
        if cfg!(target_feature = "fma") {
            acc[0] = xb[0].mul_add(yb[0], acc[0]);
            acc[1] = xb[1].mul_add(yb[1], acc[1]);
            acc[2] = xb[2].mul_add(yb[2], acc[2]);
            acc[3] = xb[3].mul_add(yb[3], acc[3]);
        } else {
            acc[0] += xb[0] * yb[0];
            acc[1] += xb[1] * yb[1];
            acc[2] += xb[2] * yb[2];
            acc[3] += xb[3] * yb[3];
        }
    }
    let mut tail = 0.0;
    for k in chunks * 4..x.len() {
        tail += x[k] * y[k];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

/// Element-wise logistic function 1 / (1 + e^(−x)).
pub fn sigmoid(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    sigmoid_in_place(&mut out);
    out
}

pub fn sigmoid_in_place(x: &mut Matrix) {
    for v in &mut x.data {
        *v = sigmoid_scalar(*v);
    }
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    // Split on sign so the exponential never overflows.
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Element-wise (Hadamard) product.
pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.check_same_shape("hadamard", b)?;
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| x * y)
        .collect::<Vec<_>>();
    Ok(Matrix {
        rows: a.rows,
        cols: a.cols,
        data,
    })
}

/// Squared Frobenius norm: sum of squared entries.
pub fn frobenius_sq(a: &Matrix) -> f64 {
    a.data.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        let data = (0..r * c).map(|_| rng.gen_range(-2.0..2.0)).collect();
        Matrix::from_vec(r, c, data).unwrap()
    }

    /// Naive triple-loop product, the oracle for everything fancier.
    fn matmul_oracle(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn matmul_identity_left() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_matrix(&mut rng, 3, 5);
        let out = matmul(&Matrix::identity(3), &m).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn matmul_identity_right() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let out = matmul(&a, &Matrix::identity(2)).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(&mut rng, 5, 4);
        let b = random_matrix(&mut rng, 4, 3);
        let got = matmul(&a, &b).unwrap();
        let want = matmul_oracle(&a, &b);
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0), "{g} vs {w}");
        }
    }

    #[test]
    fn matmul_dimension_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(matches!(matmul(&a, &b), Err(Error::Shape { .. })));
    }

    #[test]
    fn matmul_associative_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let a = random_matrix(&mut rng, 4, 3);
            let b = random_matrix(&mut rng, 3, 5);
            let c = random_matrix(&mut rng, 5, 2);
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            for (l, r) in left.data().iter().zip(right.data()) {
                assert!((l - r).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matmul_transposed_variants_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_matrix(&mut rng, 6, 4);
        let b = random_matrix(&mut rng, 6, 5);
        let got = matmul_at_b(&a, &b).unwrap();
        let want = matmul_oracle(&a.transpose(), &b);
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() < 1e-12);
        }

        let c = random_matrix(&mut rng, 3, 4);
        let d = random_matrix(&mut rng, 7, 4);
        let got = matmul_a_bt(&c, &d).unwrap();
        let want = matmul_oracle(&c, &d.transpose());
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_independent_of_thread_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 33, 17);
        let b = random_matrix(&mut rng, 17, 29);
        let one = matmul(&a, &b).unwrap();
        set_threads(4);
        let four = matmul(&a, &b).unwrap();
        set_threads(1);
        assert_eq!(one, four, "row-parallel result must be bit-identical");
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        let m = Matrix::from_vec(1, 1, vec![0.0]).unwrap();
        assert_eq!(sigmoid(&m).get(0, 0), 0.5);
    }

    #[test]
    fn sigmoid_saturates_without_nan() {
        let m = Matrix::from_vec(1, 2, vec![1e6, -1e6]).unwrap();
        let s = sigmoid(&m);
        assert!((s.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(s.get(0, 1) >= 0.0 && s.get(0, 1) < 1e-12);
        assert!(s.is_finite());
    }

    /// High-precision scalar oracle: e^{-x} by Taylor series, then 1/(1+e^{-x}).
    fn sigmoid_oracle(x: f64) -> f64 {
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut k = 1.0f64;
        while term.abs() > 1e-300 {
            term *= -x / k;
            sum += term;
            k += 1.0;
        }
        1.0 / (1.0 + sum)
    }

    #[test]
    fn sigmoid_matches_series_oracle() {
        let m = Matrix::from_vec(1, 1, vec![2.0]).unwrap();
        let got = sigmoid(&m).get(0, 0);
        let want = sigmoid_oracle(2.0);
        assert!((want - 0.880797).abs() < 1e-6);
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
    }

    #[test]
    fn sigmoid_monotonic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let x: f64 = rng.gen_range(-40.0..40.0);
            let y: f64 = rng.gen_range(-40.0..40.0);
            let (lo, hi) = if x < y { (x, y) } else { (y, x) };
            assert!(sigmoid_scalar(lo) <= sigmoid_scalar(hi));
        }
    }

    #[test]
    fn hadamard_identity_and_absorbing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 3, 4);
        let ones = Matrix::from_vec(3, 4, vec![1.0; 12]).unwrap();
        let zeros = Matrix::zeros(3, 4);
        assert_eq!(hadamard(&a, &ones).unwrap(), a);
        assert_eq!(hadamard(&a, &zeros).unwrap(), zeros);
    }

    #[test]
    fn hadamard_by_definition() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_vec(2, 2, vec![2.0; 4]).unwrap();
        let want = Matrix::from_rows(&[vec![2.0, 4.0], vec![6.0, 8.0]]).unwrap();
        assert_eq!(hadamard(&a, &b).unwrap(), want);
    }

    #[test]
    fn hadamard_shape_mismatch() {
        let a = Matrix::zeros(2, 2);
        let b = Matrix::zeros(2, 3);
        assert!(matches!(hadamard(&a, &b), Err(Error::Shape { .. })));
    }

    #[test]
    fn frobenius_sq_basics() {
        assert_eq!(frobenius_sq(&Matrix::zeros(4, 4)), 0.0);
        let m = Matrix::from_vec(1, 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(frobenius_sq(&m), 25.0);
    }

    #[test]
    fn frobenius_sq_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_matrix(&mut rng, 4, 4);
        let mut want = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                want += m.get(i, j) * m.get(i, j);
            }
        }
        assert!((frobenius_sq(&m) - want).abs() < 1e-12);
    }

    #[test]
    fn frobenius_equals_hadamard_sum_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_matrix(&mut rng, 5, 3);
        let had = hadamard(&m, &m).unwrap();
        let summed: f64 = had.data().iter().sum();
        assert_eq!(frobenius_sq(&m), summed);
    }
}
