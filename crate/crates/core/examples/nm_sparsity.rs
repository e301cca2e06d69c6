//! Semi-structured N:M pruning: at most N nonzeros in every group of M
//! consecutive inputs of each output column.
//!
//!     cargo run --release --example nm_sparsity

use layerprune::synthetic::{layer_instance, DEFAULT_CORRELATION};
use layerprune::{admm_solve, magnitude_prune, project_nm, AdmmConfig, Matrix, SparsityBudget};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() -> layerprune::Result<()> {
    let column = Matrix::from_rows(&[[1.0], [-3.0], [2.0], [-0.5]])?;
    println!("2:4 projection of {:?} -> {:?}", column.as_slice(), project_nm(&column, 2, 4)?.as_slice());

    let mut rng = StdRng::seed_from_u64(3);
    let layer = layer_instance(512, 128, 64, DEFAULT_CORRELATION, &mut rng);
    for (n, m) in [(2, 4), (4, 8), (1, 4)] {
        let budget = SparsityBudget::NM { n, m };
        let alps = admm_solve(&layer.gram, &layer.weights, &budget, &AdmmConfig::default())?;
        let mp = magnitude_prune(&layer.gram, &layer.weights, &budget)?;
        assert!(budget.is_satisfied_by(&alps.weights));
        println!(
            "{n}:{m}  kept {:>5}  rel_error alps {:.4e}  mp {:.4e}",
            alps.support.count(),
            alps.rel_error,
            mp.rel_error
        );
    }
    Ok(())
}
