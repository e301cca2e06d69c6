//! Operator-splitting support search for the layer-wise l0 problem.
//!
//! The solver alternates
//!
//! ```text
//! W <- (H + rho I)^{-1} (G - V + rho D)
//! D <- P(W + V / rho)
//! V <- V + rho (W - D)
//! ```
//!
//! where `G = H W_hat` and `P` is the projection onto the sparsity budget.
//! The penalty `rho` grows on a step schedule driven by how much the support
//! of `D` moved over the last check period; when it stops moving the support
//! is frozen and handed to the projected PCG refinement.
//!
//! All iterations run on the diagonally rescaled problem (unit Gram
//! diagonal). The W-update is evaluated in the eigenbasis of `H`, which also
//! makes `||G - H D||_F` and `||H V||_F` free to record.

use serde::{Deserialize, Serialize};

use crate::baselines::{AdmmDetails, Method, PruneSolution};
use crate::diagnostics::{IterRecord, IterTrace, TraceConstants};
use crate::error::{PruneError, Result};
use crate::linalg::{eigendecompose, EigenCache, GramMatrix, Matrix};
use crate::pcg::{pcg_refine, PcgConfig};
use crate::projection::{support_change, support_of, SparsityBudget, SupportMask};

/// Solver hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    /// Initial penalty.
    pub rho0: f64,
    /// Iterations between support-change checks.
    pub check_period: usize,
    /// Penalty multipliers for large, medium, and small support changes.
    pub growth: [f64; 3],
    /// Support-change thresholds as fractions of the budget `k`; the last tier is `s >= 1`.
    pub thresholds: [f64; 2],
    pub max_iters: usize,
    /// PCG iterations on the stabilized support.
    pub pcg_iters: usize,
    /// Relative residual at which PCG stops early.
    pub pcg_rel_tol: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho0: 0.1,
            check_period: 3,
            growth: [1.3, 1.2, 1.1],
            thresholds: [0.1, 0.005],
            max_iters: 300,
            pcg_iters: 10,
            pcg_rel_tol: crate::pcg::DEFAULT_REL_TOL,
        }
    }
}

/// Outcome of a penalty update at a check boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhoUpdate {
    Grow(f64),
    /// No support change over the last check period.
    Stabilized,
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(PruneError::invalid(format!("rho0 must be positive, got {}", self.rho0)));
        }
        if self.check_period == 0 || self.max_iters == 0 || self.pcg_iters == 0 {
            return Err(PruneError::invalid("check_period, max_iters and pcg_iters must be positive"));
        }
        if self.growth.iter().any(|g| !(*g > 1.0 && g.is_finite())) {
            return Err(PruneError::invalid(format!("penalty multipliers must exceed 1, got {:?}", self.growth)));
        }
        if self.thresholds.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(PruneError::invalid("support-change thresholds must be nonnegative"));
        }
        if !(self.pcg_rel_tol >= 0.0) {
            return Err(PruneError::invalid("pcg_rel_tol must be nonnegative"));
        }
        Ok(())
    }

    /// Step function on the support change `s_t` over the last check period.
    pub fn next_rho(&self, rho: f64, support_change: usize, k: usize) -> RhoUpdate {
        if support_change == 0 {
            return RhoUpdate::Stabilized;
        }
        let s = support_change as f64;
        let k = k as f64;
        let factor = if s >= self.thresholds[0] * k {
            self.growth[0]
        } else if s >= self.thresholds[1] * k {
            self.growth[1]
        } else {
            self.growth[2]
        };
        RhoUpdate::Grow(factor * rho)
    }
}

/// Penalty update with the default schedule.
pub fn rho_update(rho: f64, support_change: usize, k: usize) -> RhoUpdate {
    AdmmConfig::default().next_rho(rho, support_change, k)
}

/// Unstructured budget keeping `floor(n_in * n_out * (1 - sparsity))` weights.
pub fn budget_from_sparsity(sparsity: f64, n_in: usize, n_out: usize) -> Result<SparsityBudget> {
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(PruneError::invalid(format!("sparsity must lie in [0, 1], got {sparsity}")));
    }
    let total = (n_in * n_out) as f64;
    let kept = total * (1.0 - sparsity);
    // 1 - 0.9 is not exactly 0.1; snap products that are integral up to rounding.
    let nearest = kept.round();
    let k = if (kept - nearest).abs() <= 1e-9 * total.max(1.0) { nearest } else { kept.floor() };
    Ok(SparsityBudget::Unstructured { k: k as usize })
}

/// The problem after the change of variables `W = E W'`, `E = Diag(H)^{-1/2}`.
#[derive(Clone, Debug)]
pub struct ScaledProblem {
    scale: Vec<f64>,
    gram: GramMatrix,
    w_hat: Matrix,
    dead: Vec<bool>,
}

/// A diagonal entry at or below this fraction of the largest one marks a dead input.
pub const DEAD_INPUT_TOLERANCE: f64 = 1e-12;

pub fn preprocess(h: &GramMatrix, w_hat: &Matrix) -> Result<ScaledProblem> {
    let n = h.dim();
    if w_hat.rows() != n {
        return Err(PruneError::invalid(format!(
            "weights have {} input rows but gram matrix is {n}x{n}",
            w_hat.rows()
        )));
    }
    let diag = h.diagonal();
    let max_diag = diag.iter().fold(0.0_f64, |m, d| m.max(*d));
    if max_diag <= 0.0 {
        return Err(PruneError::Degenerate("gram matrix has an all-zero diagonal".into()));
    }
    let cutoff = DEAD_INPUT_TOLERANCE * max_diag;
    let dead: Vec<bool> = diag.iter().map(|&d| d <= cutoff).collect();
    let scale: Vec<f64> = diag
        .iter()
        .zip(&dead)
        .map(|(&d, &is_dead)| if is_dead { 1.0 } else { 1.0 / d.sqrt() })
        .collect();

    let mut scaled = Matrix::from_fn(n, n, |i, j| scale[i] * h.get(i, j) * scale[j]);
    for (i, &is_dead) in dead.iter().enumerate() {
        if !is_dead {
            scaled.set(i, i, 1.0);
        }
    }
    let inv_scale: Vec<f64> = scale.iter().map(|e| 1.0 / e).collect();
    Ok(ScaledProblem { gram: GramMatrix::new(scaled)?, w_hat: w_hat.scale_rows(&inv_scale), scale, dead })
}

impl ScaledProblem {
    /// Diagonal of `E`.
    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// `E H E`.
    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    /// `E^{-1} W_hat`.
    pub fn w_hat(&self) -> &Matrix {
        &self.w_hat
    }

    /// Input coordinates whose Gram diagonal vanished.
    pub fn dead_rows(&self) -> &[bool] {
        &self.dead
    }

    /// Maps scaled weights back: `W = E W'`.
    pub fn unscale(&self, w_scaled: &Matrix) -> Matrix {
        w_scaled.scale_rows(&self.scale)
    }

    /// Maps original weights into scaled coordinates: `W' = E^{-1} W`.
    pub fn to_scaled(&self, w: &Matrix) -> Matrix {
        let inv: Vec<f64> = self.scale.iter().map(|e| 1.0 / e).collect();
        w.scale_rows(&inv)
    }
}

/// Iterates of one solve.
#[derive(Clone, Debug)]
pub struct AdmmState {
    w: Matrix,
    d: Matrix,
    v: Matrix,
    rho: f64,
    iter: usize,
    prev_support: SupportMask,
    g: Matrix,
    cache: EigenCache,
    // Eigenbasis images Q^T G, Q^T D, Q^T V.
    g_rot: Matrix,
    d_rot: Matrix,
    v_rot: Matrix,
    frozen_rows: Vec<bool>,
    d_feasible: Option<bool>,
}

impl AdmmState {
    /// Starts from `V = 0`, `D = W = W_hat`.
    pub fn new(h: &GramMatrix, w_hat: &Matrix, rho0: f64) -> Result<Self> {
        Self::with_frozen_rows(h, w_hat, rho0, vec![false; h.dim()])
    }

    /// Like [`AdmmState::new`], with input rows that are held at zero throughout.
    pub fn with_frozen_rows(h: &GramMatrix, w_hat: &Matrix, rho0: f64, frozen_rows: Vec<bool>) -> Result<Self> {
        if w_hat.rows() != h.dim() || frozen_rows.len() != h.dim() {
            return Err(PruneError::invalid("state dimensions do not match the gram matrix"));
        }
        if !(rho0 > 0.0 && rho0.is_finite()) {
            return Err(PruneError::invalid(format!("rho0 must be positive, got {rho0}")));
        }
        let cache = eigendecompose(h)?;
        let g = h.apply(w_hat);
        let mut d = w_hat.clone();
        for (i, _) in frozen_rows.iter().enumerate().filter(|(_, f)| **f) {
            for j in 0..d.cols() {
                d.set(i, j, 0.0);
            }
        }
        let g_rot = cache.rotate_in(&g);
        let d_rot = cache.rotate_in(&d);
        let (rows, cols) = w_hat.shape();
        Ok(Self {
            w: d.clone(),
            prev_support: support_of(&d),
            d,
            v: Matrix::zeros(rows, cols),
            rho: rho0,
            iter: 0,
            g,
            g_rot,
            d_rot,
            v_rot: Matrix::zeros(rows, cols),
            cache,
            frozen_rows,
            d_feasible: None,
        })
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn d(&self) -> &Matrix {
        &self.d
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    /// `G = H W_hat`.
    pub fn g(&self) -> &Matrix {
        &self.g
    }

    pub fn cache(&self) -> &EigenCache {
        &self.cache
    }

    pub fn prev_support(&self) -> &SupportMask {
        &self.prev_support
    }

    pub fn frozen_rows(&self) -> &[bool] {
        &self.frozen_rows
    }

    /// Raises the penalty; decreasing it is rejected.
    pub fn increase_rho(&mut self, rho: f64) -> Result<()> {
        if !(rho >= self.rho && rho.is_finite()) {
            return Err(PruneError::invalid(format!("penalty must not decrease ({} -> {rho})", self.rho)));
        }
        self.rho = rho;
        Ok(())
    }

    /// Support change of `D` since the previous call (or since initialisation);
    /// moves the snapshot to the current support.
    pub fn check_support(&mut self) -> Result<usize> {
        let now = support_of(&self.d);
        let change = support_change(&now, &self.prev_support)?;
        self.prev_support = now;
        Ok(change)
    }

    /// One W -> D -> V sweep at the current penalty.
    pub fn step(&mut self, budget: &SparsityBudget) -> Result<IterRecord> {
        budget.validate(self.w.rows(), self.w.cols())?;
        let rho = self.rho;
        let eig = self.cache.eigenvalues();
        let d_feasible = *self.d_feasible.get_or_insert_with(|| budget.is_satisfied_by(&self.d));

        let d_norm = self.d.frobenius_norm();
        let v_norm = self.v.frobenius_norm();
        let (mut residual_sq, mut hv_sq) = (0.0, 0.0);
        let cols = self.w.cols();
        let mut w_rot = Matrix::zeros(self.w.rows(), cols);
        for (i, &m) in eig.iter().enumerate() {
            let inv = 1.0 / (m + rho);
            for j in 0..cols {
                let (g, d, v) = (self.g_rot.get(i, j), self.d_rot.get(i, j), self.v_rot.get(i, j));
                let r = g - m * d;
                residual_sq += r * r;
                hv_sq += (m * v) * (m * v);
                w_rot.set(i, j, inv * (g - v + rho * d));
            }
        }

        self.w = self.cache.rotate_out(&w_rot);

        let mut target = self.v.scale(1.0 / rho).add(&self.w);
        for (i, _) in self.frozen_rows.iter().enumerate().filter(|(_, f)| **f) {
            for j in 0..cols {
                target.set(i, j, 0.0);
            }
        }
        let d_next = budget.project(&target)?;
        let d_step = d_next.distance(&self.d);
        let primal_gap = self.w.distance(&d_next);

        let d_rot_next = self.cache.rotate_in(&d_next);
        for ((v, w), d) in self.v.as_mut_slice().iter_mut().zip(self.w.as_slice()).zip(d_next.as_slice()) {
            *v += rho * (w - d);
        }
        for ((v, w), d) in self
            .v_rot
            .as_mut_slice()
            .iter_mut()
            .zip(w_rot.as_slice())
            .zip(d_rot_next.as_slice())
        {
            *v += rho * (w - d);
        }
        self.d = d_next;
        self.d_rot = d_rot_next;
        self.d_feasible = Some(true);
        self.iter += 1;

        Ok(IterRecord {
            rho,
            rho_next: rho,
            d_norm,
            v_norm,
            residual_norm: residual_sq.sqrt(),
            hv_norm: hv_sq.sqrt(),
            d_step,
            primal_gap,
            d_next_norm: self.d.frobenius_norm(),
            v_next_norm: self.v.frobenius_norm(),
            support_change: None,
            d_feasible,
        })
    }
}

/// Advances all three iterates once with the state's current penalty.
pub fn admm_step(mut state: AdmmState, budget: &SparsityBudget) -> Result<AdmmState> {
    state.step(budget)?;
    Ok(state)
}

/// Full pipeline: rescale, search the support with the penalty schedule,
/// refine on the stabilized support with PCG, and map back.
///
/// Hitting `max_iters` without stabilizing is not an error; the solution is
/// refined from the last iterate and flagged `stabilized = false`.
pub fn admm_solve(
    h: &GramMatrix,
    w_hat: &Matrix,
    budget: &SparsityBudget,
    cfg: &AdmmConfig,
) -> Result<PruneSolution> {
    cfg.validate()?;
    let (rows, cols) = w_hat.shape();
    if rows != h.dim() {
        return Err(PruneError::invalid(format!(
            "weights have {rows} input rows but gram matrix is {}x{}",
            h.dim(),
            h.dim()
        )));
    }
    budget.validate(rows, cols)?;

    let scaled = preprocess(h, w_hat)?;
    let mut state = AdmmState::with_frozen_rows(scaled.gram(), scaled.w_hat(), cfg.rho0, scaled.dead_rows().to_vec())?;
    let k = budget.max_nonzeros(rows, cols);

    let mut trace = IterTrace::new(TraceConstants {
        h_norm: state.cache().spectral_norm(),
        g_norm: state.g().frobenius_norm(),
        w_hat_norm: scaled.w_hat().frobenius_norm(),
        rho0: cfg.rho0,
        d0_norm: state.d().frobenius_norm(),
        v0_norm: 0.0,
        tail_growth: cfg.growth.iter().copied().fold(f64::INFINITY, f64::min),
        tail_period: cfg.check_period,
    });

    let mut stabilized = false;
    while state.iter() < cfg.max_iters {
        let mut record = state.step(budget)?;
        if state.iter() % cfg.check_period == 0 {
            let change = state.check_support()?;
            record.support_change = Some(change);
            match cfg.next_rho(state.rho(), change, k) {
                RhoUpdate::Grow(rho) => state.increase_rho(rho)?,
                RhoUpdate::Stabilized => stabilized = true,
            }
        }
        record.rho_next = state.rho();
        trace.push(record);
        if stabilized {
            break;
        }
    }
    trace.set_stabilized(stabilized);

    let support = support_of(state.d());
    let pcg_cfg = PcgConfig { max_iters: cfg.pcg_iters, rel_tol: cfg.pcg_rel_tol };
    let refined = pcg_refine(scaled.gram(), scaled.w_hat(), &support, state.d(), &pcg_cfg)?;
    let w = scaled.unscale(&refined.weights);

    let details = AdmmDetails {
        iterations: state.iter(),
        rho_final: state.rho(),
        pcg_iterations: refined.iterations,
        trace,
    };
    Ok(PruneSolution::new(h, w_hat, w, Method::Alps, stabilized)?.with_details(details))
}
