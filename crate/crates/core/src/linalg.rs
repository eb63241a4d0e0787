//! Small dense linear algebra helpers: row-major matrices, Cholesky and LU
//! solves. Desk-scale only; nothing here is tuned for large dimensions.

use crate::error::{Error, Result};
use crate::problem::DenseVector;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_rows(rows_data: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows_data.len();
        let cols = rows_data.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows * cols);
        for r in &rows_data {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    left: cols,
                    right: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
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

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect()
    }

    /// y = A^T x
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "matvec_transpose dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate() {
                *o += self.get(r, c) * xr;
            }
        }
        out
    }

    /// A A^T (used for gram matrices of constraint rows).
    pub fn gram_rows(&self) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..=i {
                let v: f64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j).iter())
                    .map(|(a, b)| a * b)
                    .sum();
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }

    pub fn matvec_dense(&self, x: &DenseVector) -> DenseVector {
        DenseVector::from_raw(self.matvec(x.as_slice()))
    }

    pub fn matvec_transpose_dense(&self, x: &DenseVector) -> DenseVector {
        DenseVector::from_raw(self.matvec_transpose(x.as_slice()))
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>, // row-major lower triangle, full n x n storage
    pub jittered: bool,
}

impl Cholesky {
    /// Factor `a`; on a small nonpositive pivot retries once with diagonal
    /// jitter `1e-12 * max_diag` and flags it. A pivot that stays nonpositive
    /// signals rank deficiency.
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        assert_eq!(a.rows(), a.cols());
        let max_diag = (0..a.rows()).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        match Self::try_factor(a, 0.0) {
            Ok(l) => Ok(Self {
                n: a.rows(),
                l,
                jittered: false,
            }),
            Err(_) => {
                let jitter = 1e-12 * max_diag.max(1.0);
                let l = Self::try_factor(a, jitter)?;
                Ok(Self {
                    n: a.rows(),
                    l,
                    jittered: true,
                })
            }
        }
    }

    fn try_factor(a: &DenseMatrix, jitter: f64) -> Result<Vec<f64>> {
        let n = a.rows();
        let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        // pivots this far below the diagonal scale mean dependent rows, not
        // rounding noise; jitter (1e-12 relative) cannot lift them past it
        let pivot_floor = 1e-10 * max_diag.max(1.0);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a.get(i, j);
                if i == j {
                    s += jitter;
                }
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= pivot_floor {
                        return Err(Error::RankDeficient { row: i, pivot: s });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(l)
    }

    /// Solve A x = b via the factor.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y = b.to_vec();
        // forward: L y = b
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }
}

/// Solve a general square system by Gaussian elimination with partial
/// pivoting. Returns `None` when the matrix is numerically singular.
pub fn lu_solve(a: &DenseMatrix, b: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(a.rows(), a.cols());
    assert_eq!(b.len(), a.rows());
    let n = a.rows();
    let mut m = a.data.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let (piv, piv_val) = (col..n)
            .map(|r| (r, m[r * n + col].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if piv_val < 1e-12 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            x.swap(col, piv);
        }
        for r in (col + 1)..n {
            let factor = m[r * n + col] / m[col * n + col];
            m[r * n + col] = 0.0;
            for c in (col + 1)..n {
                m[r * n + c] -= factor * m[col * n + c];
            }
            x[r] -= factor * x[col];
        }
    }
    for r in (0..n).rev() {
        for c in (r + 1)..n {
            x[r] -= m[r * n + c] * x[c];
        }
        x[r] /= m[r * n + r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = DenseMatrix::from_rows(vec![vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let chol = Cholesky::new(&a).unwrap();
        assert!(!chol.jittered);
        let x = chol.solve(&[1.0, 2.0]);
        // residual check
        let r = a.matvec(&x);
        assert!((r[0] - 1.0).abs() < 1e-12);
        assert!((r[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_rank_deficient() {
        let a = DenseMatrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            Cholesky::new(&a),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn lu_solve_general() {
        let a = DenseMatrix::from_rows(vec![vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let x = lu_solve(&a, &[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matvec_and_transpose_agree_with_hand_computation() {
        let a = DenseMatrix::from_rows(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]), vec![6.0, 15.0]);
        assert_eq!(a.matvec_transpose(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
    }
}
