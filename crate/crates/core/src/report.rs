//! JSON run reports.

use serde::{Deserialize, Serialize};

use crate::baselines::PruneSolution;
use crate::diagnostics::{check_dual_bounds, check_growth_bound, residual_bound};
use crate::error::Result;
use crate::projection::SparsityBudget;

/// Extra iterations of slowest penalty growth assumed when summing `1/rho`.
pub const TAIL_HORIZON: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    /// `"unstructured"` or `"nm"`.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nm: Option<String>,
    pub sparsity: f64,
}

impl BudgetReport {
    /// `sparsity` is the requested fraction if one was given, otherwise the
    /// fraction implied by the budget.
    pub fn new(budget: &SparsityBudget, rows: usize, cols: usize, sparsity: Option<f64>) -> Self {
        let implied = 1.0 - budget.max_nonzeros(rows, cols) as f64 / (rows * cols) as f64;
        let sparsity = sparsity.unwrap_or(implied);
        match *budget {
            SparsityBudget::Unstructured { k } => {
                Self { kind: "unstructured".into(), k: Some(k), nm: None, sparsity }
            }
            SparsityBudget::NM { n, m } => Self { kind: "nm".into(), k: None, nm: Some(format!("{n}:{m}")), sparsity },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: String,
    pub budget: BudgetReport,
    /// `[n_in, n_out]`
    pub dims: [usize; 2],
    pub iterations: usize,
    pub rho_final: Option<f64>,
    pub stabilized: bool,
    pub objective: f64,
    pub rel_error: f64,
    pub support_size: usize,
    pub pcg_iters_used: usize,
    pub lemma1_violations: usize,
    pub lemma2_violations: usize,
    pub theorem1_ratio: Option<f64>,
    pub runtime_ms: f64,
    pub seed: Option<u64>,
}

impl RunReport {
    /// Summarises a solution; convergence fields are filled only for ADMM runs.
    pub fn new(
        solution: &PruneSolution,
        budget: BudgetReport,
        runtime_ms: f64,
        seed: Option<u64>,
    ) -> Result<Self> {
        let (rows, cols) = solution.weights.shape();
        let mut report = Self {
            method: solution.method.label().to_string(),
            budget,
            dims: [rows, cols],
            iterations: 0,
            rho_final: None,
            stabilized: solution.stabilized,
            objective: solution.objective,
            rel_error: solution.rel_error,
            support_size: solution.support.count(),
            pcg_iters_used: 0,
            lemma1_violations: 0,
            lemma2_violations: 0,
            theorem1_ratio: None,
            runtime_ms,
            seed,
        };
        if let Some(d) = &solution.details {
            report.iterations = d.iterations;
            report.rho_final = Some(d.rho_final);
            report.pcg_iters_used = d.pcg_iterations;
            report.lemma1_violations = check_dual_bounds(&d.trace).len();
            report.lemma2_violations = check_growth_bound(&d.trace)?.len();
            report.theorem1_ratio = Some(residual_bound(&d.trace, TAIL_HORIZON)?.worst_ratio);
        }
        Ok(report)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are always serialisable")
    }
}
