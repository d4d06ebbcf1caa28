use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative jitter added to the diagonal when a pivot fails: `JITTER * trace(K) / n`.
const JITTER: f64 = 1e-10;

/// Lower-triangular factor `L` of `K + lambda * I`, grown one row at a time.
///
/// Rows are stored packed: row `i` holds `L[i, 0..=i]`. Appending a point only
/// adds a row, so earlier rows never change.
#[derive(Clone, Debug)]
pub struct CholeskyState {
    packed: Vec<f64>,
    n: usize,
    lambda: f64,
    gram_trace: f64,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl CholeskyState {
    pub fn empty(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "regularizer lambda must be positive (got {lambda})"
            )));
        }
        Ok(CholeskyState {
            packed: Vec::new(),
            n: 0,
            lambda,
            gram_trace: 0.0,
        })
    }

    /// Factorizes `gram + lambda * I` from scratch.
    pub fn from_gram(gram: &DMatrix<f64>, lambda: f64) -> Result<Self> {
        let mut state = Self::empty(lambda)?;
        let n = gram.nrows();
        if gram.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: gram.ncols(),
            });
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gram matrix"));
        }
        if n == 0 {
            return Ok(state);
        }
        state.gram_trace = gram.trace();
        let packed = match factorize(gram, lambda, 0.0) {
            Some(p) => p,
            None => {
                let jitter = JITTER * state.gram_trace.abs() / n as f64;
                factorize(gram, lambda, jitter).ok_or_else(|| {
                    let sym = (gram + gram.transpose()) * 0.5;
                    let min_eigenvalue = SymmetricEigen::new(sym).eigenvalues.min();
                    Error::NotPositiveDefinite { min_eigenvalue }
                })?
            }
        };
        state.packed = packed;
        state.n = n;
        Ok(state)
    }

    /// Grows the factor by one point with kernel column `cross` (against the
    /// existing points) and diagonal entry `self_k`. Costs O(n^2).
    pub fn append(&mut self, cross: &[f64], self_k: f64) -> Result<()> {
        if cross.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: cross.len(),
            });
        }
        if !self_k.is_finite() || cross.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("appended kernel column"));
        }
        let row = self.forward_solve(cross);
        let sq: f64 = row.iter().map(|v| v * v).sum();
        let mut pivot = self_k + self.lambda - sq;
        let trace = self.gram_trace + self_k;
        if !(pivot > 0.0) {
            pivot += JITTER * trace.abs() / (self.n + 1) as f64;
            if !(pivot > 0.0) {
                return Err(Error::PivotFailure {
                    index: self.n,
                    pivot,
                });
            }
        }
        self.packed.extend_from_slice(&row);
        self.packed.push(pivot.sqrt());
        self.gram_trace = trace;
        self.n += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `L[i, 0..=i]`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.packed[row_start(i)..row_start(i + 1)]
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.packed[row_start(i + 1) - 1]
    }

    pub fn lower(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i).iter().enumerate() {
                l[(i, j)] = *v;
            }
        }
        l
    }

    /// Solves `L y = b`.
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = Vec::with_capacity(b.len());
        self.extend_forward(&mut y, |i| b[i]);
        y
    }

    /// Continues a partial forward solve: `y` holds the first `y.len()` entries of
    /// `L^{-1} b`, and `rhs(i)` supplies `b_i` for the missing ones. Used to keep
    /// cached projections current as the factor grows.
    pub fn extend_forward(&self, y: &mut Vec<f64>, mut rhs: impl FnMut(usize) -> f64) {
        for i in y.len()..self.n {
            let row = self.row(i);
            let dot: f64 = row[..i].iter().zip(y.iter()).map(|(l, v)| l * v).sum();
            y.push((rhs(i) - dot) / row[i]);
        }
    }

    /// Solves `L^T x = y`.
    pub fn backward_solve(&self, y: &[f64]) -> Vec<f64> {
        let mut x = y.to_vec();
        for i in (0..self.n).rev() {
            x[i] /= self.diag(i);
            let xi = x[i];
            for (j, l) in self.row(i)[..i].iter().enumerate() {
                x[j] -= l * xi;
            }
        }
        x
    }

    /// Solves `(K + lambda I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward_solve(&self.forward_solve(b))
    }

    /// `log det(K + lambda I)`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.diag(i).ln()).sum::<f64>()
    }
}

fn factorize(gram: &DMatrix<f64>, lambda: f64, jitter: f64) -> Option<Vec<f64>> {
    let n = gram.nrows();
    let mut packed = vec![0.0; row_start(n)];
    for i in 0..n {
        let ri = row_start(i);
        for j in 0..=i {
            let rj = row_start(j);
            let mut s = gram[(i, j)];
            for k in 0..j {
                s -= packed[ri + k] * packed[rj + k];
            }
            if i == j {
                let pivot = s + lambda + jitter;
                if !(pivot > 0.0) {
                    return None;
                }
                packed[ri + i] = pivot.sqrt();
            } else {
                packed[ri + j] = s / packed[rj + j];
            }
        }
    }
    Some(packed)
}
