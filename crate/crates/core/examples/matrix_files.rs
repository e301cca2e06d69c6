//! Write and read the binary matrix format, stream a tall activations file
//! into a Gram matrix, and show the header layout.
//!
//!     cargo run --example matrix_files

use layerprune::io::{encode_matrix, gram_from_activation_file, MatrixHeader, RowBlockReader};
use layerprune::linalg::gram_from_activations;
use layerprune::synthetic::{correlated_activations, DEFAULT_CORRELATION};
use layerprune::{read_matrix, write_matrix, Dtype, Matrix};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("layerprune-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let tiny = Matrix::from_rows(&[[7.5]])?;
    let bytes = encode_matrix(&tiny, Dtype::F64)?;
    println!("1x1 file: {} bytes, header {:?}", bytes.len(), MatrixHeader::decode(&bytes)?);

    let mut rng = StdRng::seed_from_u64(2);
    let x = correlated_activations(10_000, 32, DEFAULT_CORRELATION, &mut rng);
    let path = dir.join("activations.amtx");
    write_matrix(&path, &x, Dtype::F32)?;
    println!("activations: {} bytes on disk as f32", std::fs::metadata(&path)?.len());

    let mut reader = RowBlockReader::open(&path)?;
    let mut blocks = 0;
    while reader.next_block(4096)?.is_some() {
        blocks += 1;
    }
    println!("streamed {} rows in {blocks} blocks", reader.header().rows);

    let streamed = gram_from_activation_file(&path)?;
    let widened = read_matrix(&path)?;
    let in_memory = gram_from_activations(&widened)?;
    println!(
        "streamed vs in-memory gram: max difference {:.2e}",
        streamed.as_matrix().sub(in_memory.as_matrix()).max_abs()
    );

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
