//! Exhaustive support search on a tiny layer, compared with the ADMM solver
//! and the magnitude baseline refined by an exact backsolve.
//!
//!     cargo run --example exact_oracles

use layerprune::linalg::gram_from_activations;
use layerprune::synthetic::gaussian_matrix;
use layerprune::{admm_solve, backsolve_exact, brute_force_support, magnitude_prune, objective, AdmmConfig, SparsityBudget};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() -> layerprune::Result<()> {
    let mut rng = StdRng::seed_from_u64(1);
    let x = gaussian_matrix(32, 4, &mut rng);
    let h = gram_from_activations(&x)?;
    let w_hat = gaussian_matrix(4, 3, &mut rng);

    for k in 2..=8 {
        let budget = SparsityBudget::Unstructured { k };
        let best = brute_force_support(&h, &w_hat, k)?;
        let alps = admm_solve(&h, &w_hat, &budget, &AdmmConfig::default())?;
        let mp = magnitude_prune(&h, &w_hat, &budget)?;
        let mp_refit = objective(&h, &w_hat, &backsolve_exact(&h, &w_hat, &mp.support)?)?;
        println!(
            "k={k}: optimum {:.4e}  alps {:.4}x  magnitude+backsolve {:.4}x  same support as optimum: {}",
            best.objective,
            alps.objective / best.objective,
            mp_refit / best.objective,
            alps.support == best.support
        );
    }
    Ok(())
}
