//! Post-hoc checks of the ADMM convergence bounds against a recorded trace.
//!
//! Record `t` describes the sweep that maps `(D(t), V(t))` to
//! `(D(t+1), V(t+1))` at penalty `rho_t`. All norms are Frobenius except
//! `||H||_2`, and everything is measured on the rescaled problem the solver
//! actually iterates on.

use serde::{Deserialize, Serialize};

use crate::error::{PruneError, Result};

/// Relative slack allowed on every inequality.
pub const RELATIVE_SLACK: f64 = 1e-6;
/// Absolute slack, as a multiple of `||G|| + ||H||_2 ||W_hat||`.
pub const ABSOLUTE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    /// Penalty used for this sweep.
    pub rho: f64,
    /// Penalty after the schedule update that followed the sweep.
    pub rho_next: f64,
    /// `||D(t)||`
    pub d_norm: f64,
    /// `||V(t)||`
    pub v_norm: f64,
    /// `||G - H D(t)||`
    pub residual_norm: f64,
    /// `||H V(t)||`
    pub hv_norm: f64,
    /// `||D(t+1) - D(t)||`
    pub d_step: f64,
    /// `||W(t+1) - D(t+1)||`
    pub primal_gap: f64,
    pub d_next_norm: f64,
    pub v_next_norm: f64,
    /// Support change since the previous check, on check iterations only.
    pub support_change: Option<usize>,
    /// Whether `D(t)` satisfied the budget. The dual bounds rely on it.
    pub d_feasible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceConstants {
    /// `||H||_2`
    pub h_norm: f64,
    /// `||G||`
    pub g_norm: f64,
    pub w_hat_norm: f64,
    pub rho0: f64,
    pub d0_norm: f64,
    pub v0_norm: f64,
    /// Multiplier assumed for the penalty beyond the recorded iterations.
    pub tail_growth: f64,
    pub tail_period: usize,
}

impl TraceConstants {
    fn absolute_slack(&self) -> f64 {
        ABSOLUTE_SLACK * (self.g_norm + self.h_norm * self.w_hat_norm)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterTrace {
    constants: TraceConstants,
    records: Vec<IterRecord>,
    stabilized: bool,
}

impl IterTrace {
    pub fn new(constants: TraceConstants) -> Self {
        Self { constants, records: Vec::new(), stabilized: false }
    }

    pub fn from_records(constants: TraceConstants, records: Vec<IterRecord>) -> Self {
        Self { constants, records, stabilized: false }
    }

    pub fn push(&mut self, record: IterRecord) {
        self.records.push(record);
    }

    pub fn set_stabilized(&mut self, stabilized: bool) {
        self.stabilized = stabilized;
    }

    pub fn records(&self) -> &[IterRecord] {
        &self.records
    }

    pub fn constants(&self) -> &TraceConstants {
        &self.constants
    }

    pub fn stabilized(&self) -> bool {
        self.stabilized
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `||W - D||` after the last sweep, if any sweep ran.
    pub fn final_primal_gap(&self) -> Option<f64> {
        self.records.last().map(|r| r.primal_gap)
    }

    /// Ratio of the last penalty to the first.
    pub fn rho_growth(&self) -> f64 {
        match self.records.last() {
            Some(last) => last.rho_next / self.constants.rho0,
            None => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    /// `||V(t+1)|| <= ||G - H D(t)|| + ||H V(t)|| / rho_t`
    DualNorm,
    /// `||D(t+1) - D(t)|| <= (2 / rho_t) (||G - H D(t)|| + ||H V(t)|| / rho_t)`
    SparseStep,
    /// `||D(t)|| + ||V(t)|| / rho_t <= prod(1 + 3||H||_2/rho_s) (a_0 + sum 3||G||/rho_s)`
    Growth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub iteration: usize,
    pub bound: Bound,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; negative for a violation.
    pub slack: f64,
}

fn exceeds(lhs: f64, rhs: f64, abs_slack: f64) -> bool {
    lhs > rhs + RELATIVE_SLACK * rhs.abs() + abs_slack || lhs.is_nan()
}

/// Checks the per-sweep bounds on the dual iterate and the sparse step.
/// Sweeps that start from an over-budget `D` are skipped.
pub fn check_dual_bounds(trace: &IterTrace) -> Vec<Violation> {
    let abs_slack = trace.constants.absolute_slack();
    let mut out = Vec::new();
    for (t, r) in trace.records.iter().enumerate().filter(|(_, r)| r.d_feasible) {
        let bound = r.residual_norm + r.hv_norm / r.rho;
        let checks = [(Bound::DualNorm, r.v_next_norm, bound), (Bound::SparseStep, r.d_step, 2.0 / r.rho * bound)];
        for (kind, lhs, rhs) in checks {
            if exceeds(lhs, rhs, abs_slack) {
                out.push(Violation { iteration: t, bound: kind, lhs, rhs, slack: rhs - lhs });
            }
        }
    }
    out
}

/// Checks the a-priori growth bound on `||D(t)|| + ||V(t)|| / rho_t` for every
/// `t` from 0 through the final iterate.
pub fn check_growth_bound(trace: &IterTrace) -> Result<Vec<Violation>> {
    let c = &trace.constants;
    let rhos = penalty_sequence(trace)?;
    let states = std::iter::once((c.d0_norm, c.v0_norm))
        .chain(trace.records.iter().map(|r| (r.d_next_norm, r.v_next_norm)));

    let abs_slack = c.absolute_slack();
    let a0 = c.d0_norm + c.v0_norm / c.rho0;
    let (mut product, mut sum) = (1.0_f64, 0.0_f64);
    let mut out = Vec::new();
    for (t, (d, v)) in states.enumerate() {
        if t > 0 {
            let rho_prev = rhos[t - 1];
            product *= 1.0 + 3.0 * c.h_norm / rho_prev;
            sum += 3.0 * c.g_norm / rho_prev;
        }
        let lhs = d + v / rhos[t];
        let rhs = product * (a0 + sum);
        if exceeds(lhs, rhs, abs_slack) {
            out.push(Violation { iteration: t, bound: Bound::Growth, lhs, rhs, slack: rhs - lhs });
        }
    }
    Ok(out)
}

/// `rho_0, ..., rho_T` where `rho_t` is the penalty attached to `V(t)`.
fn penalty_sequence(trace: &IterTrace) -> Result<Vec<f64>> {
    let c = &trace.constants;
    let mut rhos = Vec::with_capacity(trace.records.len() + 1);
    rhos.push(c.rho0);
    for (t, r) in trace.records.iter().enumerate() {
        if r.rho != rhos[t] {
            return Err(PruneError::InvalidTrace(format!(
                "record {t} used rho {} but the previous update left {}",
                r.rho, rhos[t]
            )));
        }
        if !(r.rho > 0.0) || !(r.rho_next >= r.rho) {
            return Err(PruneError::InvalidTrace(format!("penalty decreased at record {t} ({} -> {})", r.rho, r.rho_next)));
        }
        rhos.push(r.rho_next);
    }
    Ok(rhos)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualBound {
    pub constant: f64,
    /// `max_t rho_t * max(||D(t+1) - D(t)||, ||W(t+1) - D(t+1)||) / constant`
    pub worst_ratio: f64,
    pub worst_iteration: Option<usize>,
    /// Recorded `sum 1/rho_t` plus the extrapolated tail.
    pub inverse_rho_sum: f64,
}

/// Evaluates the residual constant with `sum 1/rho_s` taken over the recorded
/// penalties plus `horizon` further iterations at the slowest schedule growth.
///
/// A constant that overflows makes every ratio zero; a zero constant with zero
/// residuals does too.
pub fn residual_bound(trace: &IterTrace, horizon: usize) -> Result<ResidualBound> {
    let c = &trace.constants;
    let rhos = penalty_sequence(trace)?;
    let mut inverse_rho_sum: f64 = rhos[..trace.records.len()].iter().map(|r| 1.0 / r).sum();

    let mut rho = *rhos.last().expect("sequence starts with rho0");
    let period = c.tail_period.max(1);
    for step in 0..horizon {
        inverse_rho_sum += 1.0 / rho;
        if (step + 1) % period == 0 {
            rho *= c.tail_growth;
        }
    }

    let (h, g) = (c.h_norm, c.g_norm);
    let constant = 2.0 * g + 2.0 * h * ((3.0 * h * inverse_rho_sum).exp() * (g + 3.0 * g * inverse_rho_sum));

    let mut worst_ratio = 0.0;
    let mut worst_iteration = None;
    for (t, r) in trace.records.iter().enumerate() {
        let scaled = r.rho * r.d_step.max(r.primal_gap);
        let ratio = if scaled == 0.0 || constant.is_infinite() {
            0.0
        } else if constant == 0.0 {
            f64::INFINITY
        } else {
            scaled / constant
        };
        if ratio > worst_ratio || (ratio.is_nan() && !worst_ratio.is_nan()) {
            worst_ratio = ratio;
            worst_iteration = Some(t);
        }
    }
    Ok(ResidualBound { constant, worst_ratio, worst_iteration, inverse_rho_sum })
}
