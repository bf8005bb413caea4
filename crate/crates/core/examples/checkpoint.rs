//! Save a trained network, load it back and query scores under each mask.
//!
//!     cargo run --release --example checkpoint

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tende::neural::ScoreNetwork;
use tende::score_model::{score_at, train, Approach, EncodingMask, TrainConfig};
use tende::systems::{build_te_dataset, Direction, System};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pair = System::from_name("linear_gaussian", Some(0.5))?.generate(2001, &mut ChaCha8Rng::seed_from_u64(5))?;
    let data = build_te_dataset(&pair.standardized(), 1, 1, Direction::YToX)?;
    let cfg = TrainConfig { approach: Approach::Joint, epochs: 50, ..TrainConfig::default() };
    let model = train(&data, &cfg)?;

    let path = std::env::temp_dir().join("tende_checkpoint.txt");
    let file = std::fs::File::create(&path)?;
    model.net.save(std::io::BufWriter::new(file))?;
    let file = std::fs::File::open(&path)?;
    let net = ScoreNetwork::load(std::io::BufReader::new(file))?;
    assert_eq!(net, model.net);
    println!("round-tripped {} parameters through {}", net.num_params(), path.display());

    // raw network scores at one point; the trained model adds √v·y_t to ε̂
    for (name, mask) in [("cond xz", EncodingMask::COND_XZ), ("cond z", EncodingMask::COND_Z), ("marginal", EncodingMask::MARGINAL)] {
        let s = score_at(&net, &[0.5], &[1.0], &[-0.3], 0.2, mask, &model.schedule)?;
        println!("{name:9} raw score {:.4}", s[0]);
    }
    Ok(())
}
