//! Layer-wise weight pruning under an ℓ0 budget.
//!
//! Given a layer's dense weights `W_hat` (`n_in x n_out`) and the Gram matrix
//! `H = X^T X` of its calibration activations, find `W` with at most `k`
//! nonzeros (or an N:M pattern) minimising `tr((W_hat - W)^T H (W_hat - W))`.
//!
//! [`admm_solve`] searches for a support with ADMM under a growing penalty and
//! then refines the weights on that support with projected conjugate
//! gradient. [`backsolve_exact`] and [`brute_force_support`] give exact
//! answers for a fixed support and for tiny layers; [`magnitude_prune`] and
//! [`activation_weighted_prune`] are the usual heuristics.
//!
//! ```
//! use layerprune::{admm_solve, magnitude_prune, AdmmConfig, GramMatrix, Matrix, SparsityBudget};
//!
//! let w_hat = Matrix::from_rows(&[[1.0, -0.2], [0.4, 2.0], [-0.9, 0.1]])?;
//! let h = GramMatrix::new(Matrix::from_rows(&[[2.0, 0.9, 0.0], [0.9, 1.0, 0.3], [0.0, 0.3, 1.5]])?)?;
//! let budget = SparsityBudget::Unstructured { k: 3 };
//!
//! let alps = admm_solve(&h, &w_hat, &budget, &AdmmConfig::default())?;
//! let mp = magnitude_prune(&h, &w_hat, &budget)?;
//! assert_eq!(alps.support.count(), 3);
//! assert!(alps.objective <= mp.objective + 1e-12);
//! # Ok::<(), layerprune::PruneError>(())
//! ```

pub mod admm;
pub mod baselines;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod pcg;
pub mod projection;
pub mod report;
pub mod synthetic;

pub use admm::{admm_solve, admm_step, budget_from_sparsity, preprocess, rho_update, AdmmConfig, AdmmState, RhoUpdate, ScaledProblem};
pub use baselines::{
    activation_weighted_prune, backsolve_exact, brute_force_support, magnitude_prune, AdmmDetails, Method, PruneSolution,
};
pub use diagnostics::{check_dual_bounds, check_growth_bound, residual_bound, IterRecord, IterTrace, ResidualBound, Violation};
pub use error::{PruneError, Result};
pub use io::{read_matrix, write_matrix, Dtype, MatrixFileError};
pub use linalg::{eigendecompose, gram_from_activations, objective, relative_error, ridge_solve, EigenCache, GramMatrix, Matrix};
pub use pcg::{pcg_refine, PcgConfig, PcgResult};
pub use projection::{project_nm, project_topk, support_change, support_of, SparsityBudget, SupportMask};
pub use report::RunReport;
