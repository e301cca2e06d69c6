//! Sparsity budgets and the Euclidean projections onto them.
//!
//! Selection is deterministic: among equal scores the entry with the smaller
//! row-major index (or smaller index within an N:M group) wins.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{PruneError, Result};
use crate::linalg::Matrix;

/// How many weights a layer may keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SparsityBudget {
    /// At most `k` nonzeros over the whole matrix.
    Unstructured { k: usize },
    /// At most `n` nonzeros in every group of `m` consecutive input rows of each column.
    NM { n: usize, m: usize },
}

impl fmt::Display for SparsityBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SparsityBudget::Unstructured { k } => write!(f, "k={k}"),
            SparsityBudget::NM { n, m } => write!(f, "{n}:{m}"),
        }
    }
}

impl SparsityBudget {
    /// Checks the budget against a `rows x cols` weight matrix.
    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        match *self {
            SparsityBudget::Unstructured { k } => {
                if k > rows * cols {
                    return Err(PruneError::invalid(format!(
                        "budget k={k} exceeds the {} weights of a {rows}x{cols} layer",
                        rows * cols
                    )));
                }
            }
            SparsityBudget::NM { n, m } => {
                if n == 0 || m == 0 || n > m {
                    return Err(PruneError::invalid(format!("invalid N:M pattern {n}:{m}")));
                }
                if !rows.is_multiple_of(m) {
                    return Err(PruneError::invalid(format!(
                        "input dimension {rows} is not divisible by group size {m}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Maximum number of nonzeros the budget admits on a `rows x cols` matrix.
    pub fn max_nonzeros(&self, rows: usize, cols: usize) -> usize {
        match *self {
            SparsityBudget::Unstructured { k } => k.min(rows * cols),
            SparsityBudget::NM { n, m } => rows / m * n * cols,
        }
    }

    pub fn project(&self, a: &Matrix) -> Result<Matrix> {
        match *self {
            SparsityBudget::Unstructured { k } => project_topk(a, k),
            SparsityBudget::NM { n, m } => project_nm(a, n, m),
        }
    }

    /// Whether `a` already satisfies the budget.
    pub fn is_satisfied_by(&self, a: &Matrix) -> bool {
        match *self {
            SparsityBudget::Unstructured { k } => a.nnz() <= k,
            SparsityBudget::NM { n, m } => {
                if m == 0 || !a.rows().is_multiple_of(m) {
                    return false;
                }
                (0..a.cols()).all(|j| {
                    (0..a.rows() / m).all(|g| (g * m..(g + 1) * m).filter(|&i| a.get(i, j) != 0.0).count() <= n)
                })
            }
        }
    }
}

/// Occupancy pattern of a weight matrix.
#[derive(Clone, PartialEq, Eq)]
pub struct SupportMask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
    count: usize,
}

impl fmt::Debug for SupportMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SupportMask {}x{} ({} set)", self.rows, self.cols, self.count)
    }
}

impl SupportMask {
    pub fn from_bits(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(PruneError::invalid(format!(
                "mask length {} does not match {rows}x{cols}",
                bits.len()
            )));
        }
        let count = bits.iter().filter(|b| **b).count();
        Ok(Self { rows, cols, bits, count })
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self { rows, cols, bits: vec![false; rows * cols], count: 0 }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self { rows, cols, bits: vec![true; rows * cols], count: rows * cols }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let bits: Vec<bool> = (0..rows * cols).map(|idx| f(idx / cols, idx % cols)).collect();
        let count = bits.iter().filter(|b| **b).count();
        Self { rows, cols, bits, count }
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

    /// Number of set entries.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Row indices set in column `j`, ascending.
    pub fn column_indices(&self, j: usize) -> Vec<usize> {
        (0..self.rows).filter(|&i| self.contains(i, j)).collect()
    }

    pub fn is_subset_of(&self, other: &SupportMask) -> bool {
        self.shape() == other.shape() && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    /// Zeroes every entry of `a` outside the mask.
    pub fn apply(&self, a: &Matrix) -> Matrix {
        let mut out = a.clone();
        self.apply_in_place(&mut out);
        out
    }

    pub fn apply_in_place(&self, a: &mut Matrix) {
        assert_eq!(a.shape(), self.shape(), "mask shape mismatch");
        for (v, &keep) in a.as_mut_slice().iter_mut().zip(&self.bits) {
            if !keep {
                *v = 0.0;
            }
        }
    }
}

/// Orders entries by descending score, then ascending index.
fn by_score_desc(scores: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// Indices of the `k` highest scores (ties to the lower index).
pub(crate) fn select_topk(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, by_score_desc(scores));
        idx.truncate(k);
    }
    idx
}

/// Row-major mask keeping the top `n` scores within each group of `m` rows per column.
pub(crate) fn select_nm(scores: &[f64], rows: usize, cols: usize, n: usize, m: usize) -> Vec<bool> {
    let mut keep = vec![false; rows * cols];
    let mut group: Vec<usize> = Vec::with_capacity(m);
    for j in 0..cols {
        for g in 0..rows / m {
            group.clear();
            group.extend((g * m..(g + 1) * m).map(|i| i * cols + j));
            group.sort_by(by_score_desc(scores));
            for &idx in group.iter().take(n) {
                keep[idx] = true;
            }
        }
    }
    keep
}

/// Keeps the `k` largest-magnitude entries of `a` and zeroes the rest.
pub fn project_topk(a: &Matrix, k: usize) -> Result<Matrix> {
    if k > a.len() {
        return Err(PruneError::invalid(format!("k={k} exceeds the {} entries of the matrix", a.len())));
    }
    let mags: Vec<f64> = a.as_slice().iter().map(|v| v.abs()).collect();
    let mut out = Matrix::zeros(a.rows(), a.cols());
    let dst = out.as_mut_slice();
    for idx in select_topk(&mags, k) {
        dst[idx] = a.as_slice()[idx];
    }
    Ok(out)
}

/// Keeps the `n` largest-magnitude entries in every group of `m` consecutive
/// input rows within each output column.
pub fn project_nm(a: &Matrix, n: usize, m: usize) -> Result<Matrix> {
    SparsityBudget::NM { n, m }.validate(a.rows(), a.cols())?;
    let mags: Vec<f64> = a.as_slice().iter().map(|v| v.abs()).collect();
    let keep = select_nm(&mags, a.rows(), a.cols(), n, m);
    let data = a.as_slice().iter().zip(&keep).map(|(v, k)| if *k { *v } else { 0.0 }).collect();
    Ok(Matrix::from_raw(a.rows(), a.cols(), data))
}

pub fn support_of(a: &Matrix) -> SupportMask {
    let bits: Vec<bool> = a.as_slice().iter().map(|v| *v != 0.0).collect();
    let count = bits.iter().filter(|b| **b).count();
    SupportMask { rows: a.rows(), cols: a.cols(), bits, count }
}

/// Size of the symmetric difference of two supports.
pub fn support_change(a: &SupportMask, b: &SupportMask) -> Result<usize> {
    if a.shape() != b.shape() {
        return Err(PruneError::invalid(format!(
            "support shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.bits.iter().zip(&b.bits).filter(|(x, y)| x != y).count())
}
