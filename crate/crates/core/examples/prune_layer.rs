//! Prune one synthetic layer at several sparsities and compare against the
//! magnitude and activation-weighted baselines.
//!
//!     cargo run --release --example prune_layer

use layerprune::synthetic::{layer_instance, DEFAULT_CORRELATION};
use layerprune::{activation_weighted_prune, admm_solve, budget_from_sparsity, magnitude_prune, AdmmConfig};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() -> layerprune::Result<()> {
    let mut rng = StdRng::seed_from_u64(7);
    let layer = layer_instance(512, 128, 64, DEFAULT_CORRELATION, &mut rng);
    let cfg = AdmmConfig::default();

    println!("{:>8} {:>12} {:>12} {:>12} {:>6}", "sparsity", "alps", "mp", "wanda-like", "iters");
    for sparsity in [0.5, 0.6, 0.7, 0.8, 0.9] {
        let budget = budget_from_sparsity(sparsity, 128, 64)?;
        let alps = admm_solve(&layer.gram, &layer.weights, &budget, &cfg)?;
        let mp = magnitude_prune(&layer.gram, &layer.weights, &budget)?;
        let wanda = activation_weighted_prune(&layer.weights, &layer.gram, &budget)?;
        let iters = alps.details.as_ref().map_or(0, |d| d.iterations);
        println!(
            "{sparsity:>8.1} {:>12.4e} {:>12.4e} {:>12.4e} {iters:>6}",
            alps.rel_error, mp.rel_error, wanda.rel_error
        );
    }
    Ok(())
}
