//! Random problem instances for examples, tests, and benchmarks.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{gram_from_activations, GramMatrix, Matrix};

/// Feature correlation giving a covariance condition number close to 100.
pub const DEFAULT_CORRELATION: f64 = 0.82;

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `samples x dim` activations whose features follow a stationary AR(1)
/// process with coefficient `r`, so that `Cov(x_i, x_j) = r^|i-j|`.
pub fn correlated_activations(samples: usize, dim: usize, r: f64, rng: &mut impl Rng) -> Matrix {
    assert!(r.abs() < 1.0, "AR(1) coefficient must lie in (-1, 1)");
    let innovation = (1.0 - r * r).sqrt();
    let mut x = Matrix::zeros(samples, dim);
    for s in 0..samples {
        let mut prev: f64 = rng.sample(StandardNormal);
        x.set(s, 0, prev);
        for j in 1..dim {
            let z: f64 = rng.sample(StandardNormal);
            prev = r * prev + innovation * z;
            x.set(s, j, prev);
        }
    }
    x
}

/// A layer instance: Gram matrix from correlated activations and Gaussian weights.
#[derive(Clone, Debug)]
pub struct LayerInstance {
    pub activations: Matrix,
    pub gram: GramMatrix,
    pub weights: Matrix,
}

pub fn layer_instance(samples: usize, n_in: usize, n_out: usize, r: f64, rng: &mut impl Rng) -> LayerInstance {
    let activations = correlated_activations(samples, n_in, r, rng);
    let gram = gram_from_activations(&activations).expect("generated activations are finite and non-empty");
    let weights = gaussian_matrix(n_in, n_out, rng);
    LayerInstance { activations, gram, weights }
}
