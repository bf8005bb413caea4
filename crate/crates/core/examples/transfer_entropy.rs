//! Train one amortized network per approach on the joint system and report
//! all four estimators next to the analytic value.
//!
//!     cargo run --release --example transfer_entropy
//!
//! Two trainings of about 20 s each on one core.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tende::estimators::{cmi_terms, EstimatorConfig};
use tende::score_model::{train, Approach, TrainConfig};
use tende::systems::{build_te_dataset, Direction, System};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let system = System::from_name("joint", Some(0.5))?;
    let pair = system.generate(10_001, &mut ChaCha8Rng::seed_from_u64(7))?.standardized();
    let data = build_te_dataset(&pair, 1, 1, Direction::XToY)?;
    println!("truth {:.4}", system.truth(Direction::XToY)?);

    for approach in [Approach::ConditionalOnly, Approach::Joint] {
        let model = train(&data, &TrainConfig { approach, ..TrainConfig::default() })?;
        let terms = cmi_terms(&model, &data, &EstimatorConfig { approach, ..EstimatorConfig::default() })?;
        print!("{approach}: c1 {:.4}  c2 {:.4}", terms.c1, terms.c2);
        if let (Some(j1), Some(j2)) = (terms.j1, terms.j2) {
            print!("  j1 {j1:.4}  j2 {j2:.4}");
        }
        println!("  (final loss {:.4})", model.loss_trace.last().unwrap_or(&f64::NAN));
    }
    Ok(())
}
