//! Fixed-support refinement: projected conjugate gradient against the exact
//! per-column backsolve, as a function of the iteration budget.
//!
//!     cargo run --release --example pcg_refinement

use std::time::Instant;

use layerprune::synthetic::{layer_instance, DEFAULT_CORRELATION};
use layerprune::{backsolve_exact, budget_from_sparsity, magnitude_prune, pcg_refine, relative_error, PcgConfig};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() -> layerprune::Result<()> {
    let mut rng = StdRng::seed_from_u64(11);
    let layer = layer_instance(1024, 256, 256, DEFAULT_CORRELATION, &mut rng);
    let (h, w_hat) = (&layer.gram, &layer.weights);

    for sparsity in [0.5, 0.7, 0.8] {
        let mp = magnitude_prune(h, w_hat, &budget_from_sparsity(sparsity, 256, 256)?)?;

        let start = Instant::now();
        let exact = backsolve_exact(h, w_hat, &mp.support)?;
        let backsolve_time = start.elapsed();
        println!(
            "sparsity {sparsity}: magnitude only {:.4e}, backsolve {:.4e} in {:.1} ms",
            mp.rel_error,
            relative_error(h, w_hat, &exact)?,
            backsolve_time.as_secs_f64() * 1e3
        );

        for iters in [1, 3, 10, 30] {
            let start = Instant::now();
            let out = pcg_refine(h, w_hat, &mp.support, &mp.weights, &PcgConfig { max_iters: iters, rel_tol: 1e-8 })?;
            println!(
                "  pcg {iters:>2} iters: {:.4e} in {:.1} ms (residual {:.1e} -> {:.1e})",
                relative_error(h, w_hat, &out.weights)?,
                start.elapsed().as_secs_f64() * 1e3,
                out.initial_residual,
                out.final_residual
            );
        }
    }
    Ok(())
}
