//! Dense row-major matrices, Gram matrices, and the cached eigendecomposition
//! used for every ridge solve `(H + rho I)^{-1} B`.
//!
//! Matrix products go through `matrixmultiply` with explicit strides, so
//! transposed operands are never materialised. The symmetric eigensolver is
//! nalgebra's; everything downstream of it (ridge solves, rotations, the
//! reconstruction metric) lives here.

use std::fmt;

use crate::error::{PruneError, Result};

/// A dense `rows x cols` matrix of `f64`, stored row-major.
///
/// Constructors reject empty shapes and non-finite entries.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            writeln!(f, "  {:?}", &row[..row.len().min(8)])?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    /// Builds a matrix from row-major data.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(PruneError::invalid(format!("matrix shape must be positive, got {rows}x{cols}")));
        }
        let expected = rows
            .checked_mul(cols)
            .ok_or_else(|| PruneError::invalid("matrix shape overflows usize"))?;
        if data.len() != expected {
            return Err(PruneError::invalid(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(PruneError::invalid(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(PruneError::invalid("rows have inconsistent lengths"));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    /// Panics if either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix shape must be positive");
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = d;
        }
        Self::new(n, n, data)
    }

    /// Panics if `f` produces a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data).expect("from_fn produced an invalid matrix")
    }

    /// Internal constructor for results of finite arithmetic.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix::from_raw(self.cols, self.rows, out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = vec![0.0; self.rows * rhs.cols];
        gemm(
            self.rows,
            self.cols,
            rhs.cols,
            1.0,
            (&self.data, self.cols as isize, 1),
            (&rhs.data, rhs.cols as isize, 1),
            0.0,
            &mut out,
        );
        Matrix::from_raw(self.rows, rhs.cols, out)
    }

    /// `self^T * rhs` without forming the transpose.
    pub fn t_matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.rows, rhs.rows, "t_matmul shape mismatch");
        let mut out = vec![0.0; self.cols * rhs.cols];
        gemm(
            self.cols,
            self.rows,
            rhs.cols,
            1.0,
            (&self.data, 1, self.cols as isize),
            (&rhs.data, rhs.cols as isize, 1),
            0.0,
            &mut out,
        );
        Matrix::from_raw(self.cols, rhs.cols, out)
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Matrix::from_raw(self.rows, self.cols, data)
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Matrix::from_raw(self.rows, self.cols, data)
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix::from_raw(self.rows, self.cols, self.data.iter().map(|v| alpha * v).collect())
    }

    /// Frobenius inner product `tr(self^T rhs)`.
    pub fn dot(&self, rhs: &Matrix) -> f64 {
        assert_eq!(self.shape(), rhs.shape(), "dot shape mismatch");
        self.data.iter().zip(&rhs.data).map(|(a, b)| a * b).sum()
    }

    /// Frobenius distance `||self - rhs||_F`.
    pub fn distance(&self, rhs: &Matrix) -> f64 {
        assert_eq!(self.shape(), rhs.shape(), "distance shape mismatch");
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Multiplies row `i` by `factors[i]`, i.e. `Diag(factors) * self`.
    pub fn scale_rows(&self, factors: &[f64]) -> Matrix {
        assert_eq!(factors.len(), self.rows, "scale_rows length mismatch");
        let mut out = self.clone();
        for (row, &f) in out.data.chunks_exact_mut(self.cols).zip(factors) {
            row.iter_mut().for_each(|v| *v *= f);
        }
        out
    }

    /// Permutes columns: output column `j` is input column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Matrix {
        assert_eq!(perm.len(), self.cols, "permutation length mismatch");
        Matrix::from_fn(self.rows, self.cols, |i, j| self.get(i, perm[j]))
    }
}

/// `C = alpha * A * B + beta * C` with `C` row-major `m x n`.
/// Operands are `(data, row_stride, col_stride)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: (&[f64], isize, isize),
    b: (&[f64], isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(c.len() >= m * n);
    assert!(a.0.len() >= m * k && b.0.len() >= k * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts above bound every index reachable through the
    // given strides; the strides describe dense row- or column-major layouts.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.0.as_ptr(),
            a.1,
            a.2,
            b.0.as_ptr(),
            b.1,
            b.2,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Symmetric positive semidefinite `H = X^T X`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    inner: Matrix,
}

impl GramMatrix {
    /// Accepts a square matrix that is symmetric within `1e-9 * max|entry|`
    /// and stores its exact symmetrisation `(A + A^T) / 2`.
    ///
    /// Semidefiniteness is verified by [`eigendecompose`].
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(PruneError::invalid(format!("gram matrix must be square, got {}x{}", m.rows, m.cols)));
        }
        let n = m.rows;
        let tol = 1e-9 * m.max_abs();
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (m.get(i, j), m.get(j, i));
                if (a - b).abs() > tol {
                    return Err(PruneError::invalid(format!(
                        "gram matrix not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self { inner: symmetrize(m) })
    }

    pub fn identity(n: usize) -> Self {
        Self { inner: Matrix::identity(n) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diagonal(diag)?)
    }

    pub fn dim(&self) -> usize {
        self.inner.rows
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix {
        self.inner
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner.get(i, j)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.inner.get(i, i)).collect()
    }

    /// `H * B`.
    pub fn apply(&self, b: &Matrix) -> Matrix {
        self.inner.matmul(b)
    }
}

fn symmetrize(mut m: Matrix) -> Matrix {
    let n = m.rows;
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m.get(i, j) + m.get(j, i));
            m.set(i, j, avg);
            m.set(j, i, avg);
        }
    }
    m
}

/// Streams activation rows into `X^T X` one block at a time.
#[derive(Debug, Clone)]
pub struct GramAccumulator {
    dim: usize,
    acc: Vec<f64>,
    rows_seen: usize,
}

impl GramAccumulator {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(PruneError::invalid("activation dimension must be positive"));
        }
        Ok(Self { dim, acc: vec![0.0; dim * dim], rows_seen: 0 })
    }

    pub fn push(&mut self, block: &Matrix) -> Result<()> {
        if block.cols != self.dim {
            return Err(PruneError::invalid(format!(
                "activation block has {} columns, expected {}",
                block.cols, self.dim
            )));
        }
        gemm(
            self.dim,
            block.rows,
            self.dim,
            1.0,
            (&block.data, 1, self.dim as isize),
            (&block.data, self.dim as isize, 1),
            1.0,
            &mut self.acc,
        );
        self.rows_seen += block.rows;
        Ok(())
    }

    pub fn rows_seen(&self) -> usize {
        self.rows_seen
    }

    pub fn finish(self) -> Result<GramMatrix> {
        if self.rows_seen == 0 {
            return Err(PruneError::invalid("no activation rows were accumulated"));
        }
        let m = Matrix::new(self.dim, self.dim, self.acc)?;
        Ok(GramMatrix { inner: symmetrize(m) })
    }
}

/// `X^T X` for an `NL x N_in` activation matrix.
pub fn gram_from_activations(x: &Matrix) -> Result<GramMatrix> {
    let mut acc = GramAccumulator::new(x.cols)?;
    acc.push(x)?;
    acc.finish()
}

/// Orthonormal eigenvectors `Q` (as columns) and ascending nonnegative
/// eigenvalues `M` with `H = Q Diag(M) Q^T`.
#[derive(Clone, Debug)]
pub struct EigenCache {
    eigenvectors: Matrix,
    eigenvalues: Vec<f64>,
}

/// Smallest admissible eigenvalue relative to the largest one.
pub const PSD_TOLERANCE: f64 = 1e-8;

pub fn eigendecompose(h: &GramMatrix) -> Result<EigenCache> {
    let n = h.dim();
    let dm = nalgebra::DMatrix::from_row_slice(n, n, h.inner.as_slice());
    let eig = nalgebra::SymmetricEigen::new(dm);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let largest = eig.eigenvalues[order[n - 1]];
    let smallest = eig.eigenvalues[order[0]];
    let tol = PSD_TOLERANCE * largest.max(0.0);
    if smallest < -tol || largest < 0.0 {
        return Err(PruneError::invalid(format!(
            "gram matrix is not positive semidefinite: eigenvalue {smallest:e} (largest {largest:e})"
        )));
    }

    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let mut q = vec![0.0; n * n];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            q[row * n + col] = eig.eigenvectors[(row, src)];
        }
    }
    if q.iter().any(|v| !v.is_finite()) || eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(PruneError::Degenerate("eigendecomposition produced non-finite values".into()));
    }
    Ok(EigenCache { eigenvectors: Matrix::from_raw(n, n, q), eigenvalues })
}

impl EigenCache {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `Q`, one eigenvector per column.
    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }

    /// `||H||_2`, the largest eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `Q^T B`.
    pub fn rotate_in(&self, b: &Matrix) -> Matrix {
        self.eigenvectors.t_matmul(b)
    }

    /// `Q B`.
    pub fn rotate_out(&self, b: &Matrix) -> Matrix {
        self.eigenvectors.matmul(b)
    }

    /// `Q Diag(M) Q^T`.
    pub fn reconstruct(&self) -> Matrix {
        let scaled = self.eigenvectors.transpose().scale_rows(&self.eigenvalues);
        self.eigenvectors.matmul(&scaled)
    }
}

/// `(H + rho I)^{-1} B` evaluated as `Q Diag(1 / (M + rho)) Q^T B`.
pub fn ridge_solve(cache: &EigenCache, rho: f64, b: &Matrix) -> Result<Matrix> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(PruneError::invalid(format!("ridge penalty must be positive and finite, got {rho}")));
    }
    if b.rows != cache.dim() {
        return Err(PruneError::invalid(format!(
            "right-hand side has {} rows, expected {}",
            b.rows,
            cache.dim()
        )));
    }
    let inv: Vec<f64> = cache.eigenvalues.iter().map(|m| 1.0 / (m + rho)).collect();
    let rotated = cache.rotate_in(b).scale_rows(&inv);
    Ok(cache.rotate_out(&rotated))
}

/// `tr(A^T H A)`, clamped at zero against rounding.
pub fn trace_quadratic(h: &GramMatrix, a: &Matrix) -> f64 {
    assert_eq!(a.rows, h.dim(), "trace_quadratic shape mismatch");
    h.apply(a).dot(a).max(0.0)
}

/// Layer reconstruction objective `||X W_hat - X W||_F^2 = tr((W_hat - W)^T H (W_hat - W))`.
pub fn objective(h: &GramMatrix, w_hat: &Matrix, w: &Matrix) -> Result<f64> {
    check_conformant(h, w_hat, w)?;
    Ok(trace_quadratic(h, &w_hat.sub(w)))
}

/// `||X W_hat - X W||_F^2 / ||X W_hat||_F^2`.
pub fn relative_error(h: &GramMatrix, w_hat: &Matrix, w: &Matrix) -> Result<f64> {
    check_conformant(h, w_hat, w)?;
    let denom = trace_quadratic(h, w_hat);
    if denom <= 0.0 {
        return Err(PruneError::Degenerate("dense layer output is zero (tr(W^T H W) = 0)".into()));
    }
    Ok(trace_quadratic(h, &w_hat.sub(w)) / denom)
}

fn check_conformant(h: &GramMatrix, w_hat: &Matrix, w: &Matrix) -> Result<()> {
    if w_hat.shape() != w.shape() {
        return Err(PruneError::invalid(format!(
            "weight shapes differ: {:?} vs {:?}",
            w_hat.shape(),
            w.shape()
        )));
    }
    if w_hat.rows != h.dim() {
        return Err(PruneError::invalid(format!(
            "weights have {} input rows but gram matrix is {}x{}",
            w_hat.rows,
            h.dim(),
            h.dim()
        )));
    }
    Ok(())
}
