//! Exact fixed-support solves, exhaustive support search, and the two
//! heuristic pruners used for comparison.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diagnostics::IterTrace;
use crate::error::{PruneError, Result};
use crate::linalg::{objective, relative_error, GramMatrix, Matrix};
use crate::projection::{select_nm, select_topk, support_of, SparsityBudget, SupportMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "alps")]
    Alps,
    #[serde(rename = "mp")]
    Magnitude,
    /// Global top-k on `|W_ij| * ||X_:,i||`; not the per-output grouping of the original method.
    #[serde(rename = "wanda-like")]
    ActivationWeighted,
    #[serde(rename = "backsolve")]
    Backsolve,
    #[serde(rename = "brute-force")]
    BruteForce,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Alps => "alps",
            Method::Magnitude => "mp",
            Method::ActivationWeighted => "wanda-like",
            Method::Backsolve => "backsolve",
            Method::BruteForce => "brute-force",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Per-run information only the ADMM pipeline produces.
#[derive(Clone, Debug)]
pub struct AdmmDetails {
    pub iterations: usize,
    pub rho_final: f64,
    pub pcg_iterations: usize,
    pub trace: IterTrace,
}

/// Pruned weights with their support and reconstruction quality.
#[derive(Clone, Debug)]
pub struct PruneSolution {
    pub weights: Matrix,
    /// Exactly the nonzero pattern of `weights`.
    pub support: SupportMask,
    /// `tr((W_hat - W)^T H (W_hat - W))`.
    pub objective: f64,
    pub rel_error: f64,
    pub method: Method,
    pub stabilized: bool,
    pub details: Option<AdmmDetails>,
}

impl PruneSolution {
    pub fn new(h: &GramMatrix, w_hat: &Matrix, weights: Matrix, method: Method, stabilized: bool) -> Result<Self> {
        let objective = objective(h, w_hat, &weights)?;
        let rel_error = relative_error(h, w_hat, &weights)?;
        Ok(Self { support: support_of(&weights), weights, objective, rel_error, method, stabilized, details: None })
    }

    pub fn with_details(mut self, details: AdmmDetails) -> Self {
        self.details = Some(details);
        self
    }
}

/// Solves `H[S_j, S_j] w = (H W_hat)[S_j, j]` for every output column by
/// Cholesky factorisation and scatters the result back.
pub fn backsolve_exact(h: &GramMatrix, w_hat: &Matrix, support: &SupportMask) -> Result<Matrix> {
    let (rows, cols) = w_hat.shape();
    if rows != h.dim() || support.shape() != (rows, cols) {
        return Err(PruneError::invalid("backsolve: weight, support and gram shapes do not conform"));
    }
    let g = h.apply(w_hat);
    let mut out = Matrix::zeros(rows, cols);
    for j in 0..cols {
        let idx = support.column_indices(j);
        if idx.is_empty() {
            continue;
        }
        let sol = restricted_solve(h, &idx, |i| g.get(i, j)).ok_or(PruneError::DegenerateSupport { column: j })?;
        for (&i, v) in idx.iter().zip(sol.iter()) {
            out.set(i, j, *v);
        }
    }
    Ok(out)
}

fn restricted_solve(h: &GramMatrix, idx: &[usize], rhs: impl Fn(usize) -> f64) -> Option<DVector<f64>> {
    let s = idx.len();
    let sub = DMatrix::from_fn(s, s, |a, b| h.get(idx[a], idx[b]));
    let b = DVector::from_fn(s, |a, _| rhs(idx[a]));
    let chol = sub.cholesky()?;
    let x = chol.solve(&b);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Largest instance `brute_force_support` will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Exhaustive search over all supports of size `k`, each refined by
/// [`backsolve_exact`]. Ties keep the lexicographically smallest support.
pub fn brute_force_support(h: &GramMatrix, w_hat: &Matrix, k: usize) -> Result<PruneSolution> {
    let (rows, cols) = w_hat.shape();
    let total = rows * cols;
    if total > BRUTE_FORCE_LIMIT {
        return Err(PruneError::TooLarge { weights: total, limit: BRUTE_FORCE_LIMIT });
    }
    SparsityBudget::Unstructured { k }.validate(rows, cols)?;
    if rows != h.dim() {
        return Err(PruneError::invalid("brute force: weight and gram shapes do not conform"));
    }

    let mut best: Option<(f64, Matrix)> = None;
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        let mask = SupportMask::from_fn(rows, cols, |i, j| combo.contains(&(i * cols + j)));
        let w = backsolve_exact(h, w_hat, &mask)?;
        let obj = objective(h, w_hat, &w)?;
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, w));
        }
        if !next_combination(&mut combo, total) {
            break;
        }
    }
    let (_, w) = best.expect("at least one support is enumerated");
    PruneSolution::new(h, w_hat, w, Method::BruteForce, true)
}

/// Advances `combo` to the next k-subset of `0..n` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    for pos in (0..k).rev() {
        if combo[pos] < n - k + pos {
            combo[pos] += 1;
            for later in pos + 1..k {
                combo[later] = combo[later - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Keeps the largest-magnitude weights unchanged.
pub fn magnitude_prune(h: &GramMatrix, w_hat: &Matrix, budget: &SparsityBudget) -> Result<PruneSolution> {
    budget.validate(w_hat.rows(), w_hat.cols())?;
    let w = budget.project(w_hat)?;
    PruneSolution::new(h, w_hat, w, Method::Magnitude, true)
}

/// Keeps the weights with the largest `|W_ij| * sqrt(H_ii)` scores unchanged.
pub fn activation_weighted_prune(w_hat: &Matrix, h: &GramMatrix, budget: &SparsityBudget) -> Result<PruneSolution> {
    let (rows, cols) = w_hat.shape();
    budget.validate(rows, cols)?;
    if rows != h.dim() {
        return Err(PruneError::invalid("activation-weighted prune: weight and gram shapes do not conform"));
    }
    let norms: Vec<f64> = h.diagonal().iter().map(|d| d.max(0.0).sqrt()).collect();
    let scores: Vec<f64> = (0..rows * cols).map(|idx| w_hat.as_slice()[idx].abs() * norms[idx / cols]).collect();
    let keep = match *budget {
        SparsityBudget::Unstructured { k } => {
            let mut keep = vec![false; rows * cols];
            for idx in select_topk(&scores, k) {
                keep[idx] = true;
            }
            keep
        }
        SparsityBudget::NM { n, m } => select_nm(&scores, rows, cols, n, m),
    };
    let mask = SupportMask::from_bits(rows, cols, keep)?;
    PruneSolution::new(h, w_hat, mask.apply(w_hat), Method::ActivationWeighted, true)
}
