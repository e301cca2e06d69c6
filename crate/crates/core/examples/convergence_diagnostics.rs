//! Inspect an ADMM trace: penalty schedule, support changes, and the
//! a-posteriori convergence bounds.
//!
//!     cargo run --release --example convergence_diagnostics

use layerprune::synthetic::{layer_instance, DEFAULT_CORRELATION};
use layerprune::{admm_solve, budget_from_sparsity, check_dual_bounds, check_growth_bound, residual_bound, AdmmConfig};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() -> layerprune::Result<()> {
    let mut rng = StdRng::seed_from_u64(5);
    let layer = layer_instance(256, 64, 32, DEFAULT_CORRELATION, &mut rng);
    let budget = budget_from_sparsity(0.7, 64, 32)?;
    let sol = admm_solve(&layer.gram, &layer.weights, &budget, &AdmmConfig::default())?;
    let details = sol.details.as_ref().expect("ADMM solutions carry a trace");
    let trace = &details.trace;

    println!("{:>4} {:>10} {:>8} {:>11} {:>11}", "iter", "rho", "changed", "|W-D|", "|D+ - D|");
    for (t, r) in trace.records().iter().enumerate() {
        let changed = r.support_change.map_or(String::from("-"), |s| s.to_string());
        println!("{:>4} {:>10.4} {changed:>8} {:>11.3e} {:>11.3e}", t + 1, r.rho, r.primal_gap, r.d_step);
    }

    let bound = residual_bound(trace, 1000)?;
    println!("stabilized: {}, final rho {:.4}", trace.stabilized(), details.rho_final);
    println!("dual-bound violations: {}", check_dual_bounds(trace).len());
    println!("growth-bound violations: {}", check_growth_bound(trace)?.len());
    println!(
        "residual constant {:.3e} (sum 1/rho = {:.2}), worst ratio {:.3e}",
        bound.constant, bound.inverse_rho_sum, bound.worst_ratio
    );
    Ok(())
}
