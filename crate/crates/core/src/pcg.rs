//! Support-projected, Jacobi-preconditioned conjugate gradient for
//! `min ||X W_hat - X W||_F^2` subject to `Supp(W) ⊆ S`.
//!
//! All output columns are solved in one pass: the inner products are traces
//! over the whole matrix, and the residual is projected onto `S` after every
//! update so that search directions never leave the support.

use crate::error::{PruneError, Result};
use crate::linalg::{GramMatrix, Matrix};
use crate::projection::{support_of, SupportMask};

pub const DEFAULT_REL_TOL: f64 = 1e-8;
/// Initial residuals below this Frobenius norm are treated as converged.
pub const ABSOLUTE_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct PcgConfig {
    pub max_iters: usize,
    /// Stop once `||R_t||_F <= rel_tol * ||R_0||_F`.
    pub rel_tol: f64,
}

impl Default for PcgConfig {
    fn default() -> Self {
        Self { max_iters: 10, rel_tol: DEFAULT_REL_TOL }
    }
}

#[derive(Clone, Debug)]
pub struct PcgResult {
    pub weights: Matrix,
    pub iterations: usize,
    /// `||R_0||_F` after projection.
    pub initial_residual: f64,
    pub final_residual: f64,
}

pub fn pcg_refine(
    h: &GramMatrix,
    w_hat: &Matrix,
    support: &SupportMask,
    w0: &Matrix,
    cfg: &PcgConfig,
) -> Result<PcgResult> {
    let n = h.dim();
    if w_hat.rows() != n || w_hat.shape() != w0.shape() || support.shape() != w_hat.shape() {
        return Err(PruneError::invalid("pcg_refine: weight, support and gram shapes do not conform"));
    }
    if cfg.max_iters == 0 {
        return Err(PruneError::invalid("pcg_refine: max_iters must be at least 1"));
    }
    if !support_of(w0).is_subset_of(support) {
        return Err(PruneError::invalid("pcg_refine: initial weights are not supported on S"));
    }

    // Jacobi preconditioner; non-positive (dead) diagonal entries are replaced by 1.
    let diag = h.diagonal();
    let max_diag = diag.iter().fold(0.0_f64, |m, d| m.max(*d));
    let inv_precond: Vec<f64> = diag
        .iter()
        .map(|&d| if d > crate::admm::DEAD_INPUT_TOLERANCE * max_diag && d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut w = w0.clone();
    let mut r = h.apply(&w_hat.sub(w0));
    support.apply_in_place(&mut r);
    let r0_norm = r.frobenius_norm();
    if r0_norm < ABSOLUTE_FLOOR {
        return Ok(PcgResult { weights: w, iterations: 0, initial_residual: r0_norm, final_residual: r0_norm });
    }

    let mut z = r.scale_rows(&inv_precond);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut r_norm = r0_norm;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        let hp = h.apply(&p);
        let curvature = p.dot(&hp);
        if !(curvature > 0.0 && curvature.is_finite()) {
            return Err(PruneError::Breakdown { iteration: iterations, residual: r_norm });
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut w);
        axpy(-alpha, &hp, &mut r);
        support.apply_in_place(&mut r);
        z = r.scale_rows(&inv_precond);
        iterations += 1;

        r_norm = r.frobenius_norm();
        if r_norm <= cfg.rel_tol * r0_norm || r_norm == 0.0 {
            break;
        }
        let rz_next = r.dot(&z);
        let beta = rz_next / rz;
        rz = rz_next;
        for (pv, zv) in p.as_mut_slice().iter_mut().zip(z.as_slice()) {
            *pv = zv + beta * *pv;
        }
    }

    Ok(PcgResult { weights: w, iterations, initial_residual: r0_norm, final_residual: r_norm })
}

fn axpy(alpha: f64, x: &Matrix, y: &mut Matrix) {
    for (yv, xv) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yv += alpha * xv;
    }
}
