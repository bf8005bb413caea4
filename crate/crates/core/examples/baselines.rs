//! The two baselines: exact CMI for jointly Gaussian blocks, and the k-NN
//! estimator on samples, across the coupling grid of the linear system.
//!
//!     cargo run --release --example baselines

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tende::baselines::{gaussian_cmi, knn_cmi, linear_gaussian_blocks, DEFAULT_NEIGHBORS};
use tende::harness::bench::coupling_grid;
use tende::systems::{build_te_dataset, gen_linear_gaussian, Direction, LinearGaussianParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("lambda  exact   knn (n=5000)");
    for lambda in coupling_grid() {
        let p = LinearGaussianParams { lambda, ..Default::default() };
        let exact = gaussian_cmi(&linear_gaussian_blocks(&p, 1, 1, Direction::YToX)?);
        let pair = gen_linear_gaussian(&p, 5001, &mut ChaCha8Rng::seed_from_u64(11))?;
        let knn = knn_cmi(&build_te_dataset(&pair, 1, 1, Direction::YToX)?, DEFAULT_NEIGHBORS)?;
        println!("{lambda:6.3}  {exact:.4}  {knn:.4}");
    }
    Ok(())
}
