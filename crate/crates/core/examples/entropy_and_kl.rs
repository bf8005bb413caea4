//! Entropy and KL from score differences, first with exact Gaussian scores,
//! then with a trained network.
//!
//!     cargo run --release --example entropy_and_kl

use std::f64::consts::{E, TAU};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use tende::estimators::{entropy_estimate, entropy_estimate_with, kl_estimate_e, EstimatorConfig, PointScore, ReferenceScore};
use tende::score_model::{train, TrainConfig};
use tende::sde::{gaussian_tail_kl, TimeSampling, VpSchedule};
use tende::systems::TeDataset;

fn gaussian(n: usize, dim: usize, sd: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, dim), || {
        let e: f64 = StandardNormal.sample(rng);
        sd * e
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sched = VpSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // KL(N(0,4) || N(0,1)) with the diffused scores known in closed form
    let data = gaussian(20_000, 1, 2.0, &mut rng);
    let p = PointScore(|x: &[f64], t: f64| {
        let chi = sched.chi(t, 2.0).expect("t in range");
        x.iter().map(|v| -v / chi).collect::<Vec<f64>>()
    });
    let q = ReferenceScore { sched, sigma: 1.0 };
    let e = kl_estimate_e(&p, &q, data.view(), &sched, TimeSampling::Importance, 5, &mut rng)?;
    let kl = 0.5 * (4.0 - 1.0 - 4f64.ln());
    println!("kl: {e:.4} vs {:.4}", kl - gaussian_tail_kl(1, sched.chi(1.0, 2.0)?));

    let truth = (TAU * E).ln();
    let data = gaussian(10_000, 2, 1.0, &mut rng);
    let exact = PointScore(|x: &[f64], t: f64| {
        let chi = sched.chi(t, 1.0).expect("t in range");
        x.iter().map(|v| -v / chi).collect::<Vec<f64>>()
    });
    let h = entropy_estimate_with(&exact, data.view(), 1.0, &sched, TimeSampling::Importance, 5, &mut rng)?;
    println!("entropy, exact scores:  {h:.4} vs {truth:.4}");

    // a network with no conditioning blocks learns the marginal score
    let empty = Array2::zeros((data.nrows(), 0));
    let ds = TeDataset { y: data.clone(), x: empty.clone(), z: empty, k: 0, l: 0 };
    let model = train(&ds, &TrainConfig::default())?;
    let h = entropy_estimate(&model, data.view(), 1.0, &EstimatorConfig::default())?;
    println!("entropy, trained score: {h:.4} vs {truth:.4}");
    Ok(())
}
