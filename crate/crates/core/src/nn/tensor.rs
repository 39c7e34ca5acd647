//! Flat row-major matrices and the scalar abstraction over f32/f64.
//!
//! Training and serving run in f32. The f64 instantiation exists solely so
//! the finite-difference checker can measure gradients without f32 rounding
//! drowning the signal.

use num_traits::Float;

/// Element type of the numeric kernel.
pub trait Scalar:
    Float + std::fmt::Debug + std::fmt::Display + std::iter::Sum + Send + Sync + 'static
{
    fn from_f32(v: f32) -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f32(self) -> f32;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f32(v: f32) -> Self {
        v
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f32(self) -> f32 {
        self
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f32(v: f32) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f32(self) -> f32 {
        self as f32
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Dense row-major matrix. Vectors are `1 x n` rows, scalars `1 x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Mat { rows, cols, data }
    }

    pub fn scalar(v: T) -> Self {
        Mat {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    pub fn row_vec(data: Vec<T>) -> Self {
        Mat {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    pub fn numel(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self[1 x 1]` as a plain scalar.
    pub fn item(&self) -> T {
        assert_eq!(self.numel(), 1, "item() on non-scalar {}x{}", self.rows, self.cols);
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// c += a * b, where a is m x k and b is k x n. Plain ikj loop; rows are
/// contiguous so the inner loop vectorizes.
pub fn matmul_acc<T: Scalar>(c: &mut Mat<T>, a: &Mat<T>, b: &Mat<T>) {
    assert_eq!(a.cols, b.rows, "matmul inner dim {} vs {}", a.cols, b.rows);
    assert!(c.rows == a.rows && c.cols == b.cols, "matmul output shape");
    let n = b.cols;
    for i in 0..a.rows {
        let crow = &mut c.data[i * n..(i + 1) * n];
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik == T::zero() {
                continue;
            }
            let brow = &b.data[k * n..(k + 1) * n];
            for j in 0..n {
                crow[j] = crow[j] + aik * brow[j];
            }
        }
    }
}

/// c += a * b^T, where a is m x k and b is n x k.
pub fn matmul_bt_acc<T: Scalar>(c: &mut Mat<T>, a: &Mat<T>, b: &Mat<T>) {
    assert_eq!(a.cols, b.cols, "matmul_bt inner dim {} vs {}", a.cols, b.cols);
    assert!(c.rows == a.rows && c.cols == b.rows, "matmul_bt output shape");
    for i in 0..a.rows {
        let arow = a.row(i);
        for j in 0..b.rows {
            let brow = b.row(j);
            let mut acc = T::zero();
            for k in 0..a.cols {
                acc = acc + arow[k] * brow[k];
            }
            let idx = i * b.rows + j;
            c.data[idx] = c.data[idx] + acc;
        }
    }
}

/// c += a^T * b, where a is m x k and b is m x n (output k x n).
pub fn matmul_at_acc<T: Scalar>(c: &mut Mat<T>, a: &Mat<T>, b: &Mat<T>) {
    assert_eq!(a.rows, b.rows, "matmul_at inner dim {} vs {}", a.rows, b.rows);
    assert!(c.rows == a.cols && c.cols == b.cols, "matmul_at output shape");
    let n = b.cols;
    for m in 0..a.rows {
        let arow = a.row(m);
        let brow = b.row(m);
        for k in 0..a.cols {
            let amk = arow[k];
            if amk == T::zero() {
                continue;
            }
            let crow = &mut c.data[k * n..(k + 1) * n];
            for j in 0..n {
                crow[j] = crow[j] + amk * brow[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
        let mut c = Mat::zeros(a.rows, b.cols);
        for i in 0..a.rows {
            for j in 0..b.cols {
                let mut s = 0.0;
                for k in 0..a.cols {
                    s += a.at(i, k) * b.at(k, j);
                }
                c.data[i * b.cols + j] = s;
            }
        }
        c
    }

    #[test]
    fn matmul_matches_naive_triple_loop() {
        let a = Mat::from_vec(3, 4, (0..12).map(|i| (i as f64) * 0.37 - 1.1).collect());
        let b = Mat::from_vec(4, 2, (0..8).map(|i| (i as f64) * -0.21 + 0.4).collect());
        let mut c = Mat::zeros(3, 2);
        matmul_acc(&mut c, &a, &b);
        let expect = naive_matmul(&a, &b);
        for (x, y) in c.data.iter().zip(expect.data.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_bt_and_at_agree_with_explicit_transpose() {
        let a = Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.5, 2.0]);
        let b = Mat::from_vec(4, 3, (0..12).map(|i| i as f64 * 0.1).collect());
        let mut c = Mat::zeros(2, 4);
        matmul_bt_acc(&mut c, &a, &b);
        // transpose b by hand
        let mut bt = Mat::zeros(3, 4);
        for r in 0..4 {
            for k in 0..3 {
                bt.data[k * 4 + r] = b.at(r, k);
            }
        }
        let expect = naive_matmul(&a, &bt);
        assert_eq!(c.data, expect.data);

        let x = Mat::from_vec(2, 3, vec![0.3, -0.4, 1.0, 2.0, 0.0, -1.5]);
        let mut d = Mat::zeros(3, 4);
        matmul_at_acc(&mut d, &x, &c);
        let mut xt = Mat::zeros(3, 2);
        for r in 0..2 {
            for k in 0..3 {
                xt.data[k * 2 + r] = x.at(r, k);
            }
        }
        let expect2 = naive_matmul(&xt, &c);
        for (p, q) in d.data.iter().zip(expect2.data.iter()) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
