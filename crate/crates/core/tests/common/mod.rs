//! Naive reference implementations used as oracles by the integration tests.
//! Nothing here calls into the solvers under test.

#![allow(dead_code)]

use layerprune::{GramMatrix, Matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian elimination with partial pivoting. `None` if a pivot vanishes.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Per-column restricted normal equations `H_SS w = (H W_hat)_S`.
pub fn naive_backsolve(h: &GramMatrix, w_hat: &Matrix, keep: &[bool]) -> Option<Matrix> {
    let (rows, cols) = w_hat.shape();
    let mut out = Matrix::zeros(rows, cols);
    for j in 0..cols {
        let idx: Vec<usize> = (0..rows).filter(|&i| keep[i * cols + j]).collect();
        if idx.is_empty() {
            continue;
        }
        let a: Vec<Vec<f64>> = idx.iter().map(|&p| idx.iter().map(|&q| h.get(p, q)).collect()).collect();
        let b: Vec<f64> = idx
            .iter()
            .map(|&p| (0..rows).map(|q| h.get(p, q) * w_hat.get(q, j)).sum())
            .collect();
        let x = gauss_solve(a, b)?;
        for (&i, v) in idx.iter().zip(x) {
            out.set(i, j, v);
        }
    }
    Some(out)
}

/// `sum_j e_j^T H e_j` with `e = W_hat - W`, by explicit loops.
pub fn naive_objective(h: &GramMatrix, w_hat: &Matrix, w: &Matrix) -> f64 {
    let (rows, cols) = w_hat.shape();
    let mut total = 0.0;
    for j in 0..cols {
        for a in 0..rows {
            let ea = w_hat.get(a, j) - w.get(a, j);
            if ea == 0.0 {
                continue;
            }
            for b in 0..rows {
                total += ea * h.get(a, b) * (w_hat.get(b, j) - w.get(b, j));
            }
        }
    }
    total.max(0.0)
}

pub fn naive_rel_error(h: &GramMatrix, w_hat: &Matrix, w: &Matrix) -> f64 {
    naive_objective(h, w_hat, w) / naive_objective(h, w_hat, &Matrix::zeros(w_hat.rows(), w_hat.cols()))
}

pub fn nonzero_pattern(w: &Matrix) -> Vec<bool> {
    w.as_slice().iter().map(|v| *v != 0.0).collect()
}

/// Optimal objective over every support of size exactly `k`, by bitmask enumeration.
pub fn enumerate_optimum(h: &GramMatrix, w_hat: &Matrix, k: usize) -> (f64, Vec<bool>) {
    let total = w_hat.rows() * w_hat.cols();
    assert!(total <= 20);
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let keep: Vec<bool> = (0..total).map(|b| mask >> b & 1 == 1).collect();
        if let Some(w) = naive_backsolve(h, w_hat, &keep) {
            let obj = naive_objective(h, w_hat, &w);
            if obj < best.0 {
                best = (obj, keep);
            }
        }
    }
    best
}

/// `sum` of the squares of everything but the `k` largest magnitudes.
pub fn truncation_objective(w_hat: &Matrix, k: usize) -> f64 {
    let mut sq: Vec<f64> = w_hat.as_slice().iter().map(|v| v * v).collect();
    sq.sort_by(|a, b| b.total_cmp(a));
    sq[k.min(sq.len())..].iter().sum()
}

/// Indices kept in one group: the `n` largest `|v|`, ties to the earlier position.
pub fn group_topn(values: &[f64], n: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    let mut keep = vec![false; values.len()];
    for &i in order.iter().take(n) {
        if values[i] != 0.0 {
            keep[i] = true;
        }
    }
    keep
}

/// Independent parser for the matrix file layout; returns `(rows, cols, values)`.
pub fn parse_matrix_bytes(bytes: &[u8]) -> (usize, usize, Vec<f64>) {
    assert_eq!(&bytes[0..4], b"AMTX");
    assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
    assert_eq!(bytes[7], 0);
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let values: Vec<f64> = match bytes[6] {
        1 => bytes[24..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        0 => bytes[24..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect(),
        d => panic!("unknown dtype {d}"),
    };
    assert_eq!(values.len(), rows * cols);
    (rows, cols, values)
}
