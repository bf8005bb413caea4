//! Simulate both benchmark systems, print their analytic TE and write one
//! series in the text format `tende estimate -i` reads.
//!
//!     cargo run --release --example simulate -- [out.txt]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tende::systems::{Direction, System};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "joint.txt".into());
    for name in ["linear_gaussian", "joint"] {
        let system = System::from_name(name, Some(0.5))?;
        let pair = system.generate(10_001, &mut ChaCha8Rng::seed_from_u64(1))?;
        println!(
            "{name:16} len {}  TE x->y {:.4}  TE y->x {:.4}",
            pair.len(),
            system.truth(Direction::XToY)?,
            system.truth(Direction::YToX)?
        );
        if name == "joint" {
            let file = std::fs::File::create(&out)?;
            pair.write_text(std::io::BufWriter::new(file))?;
            println!("wrote {out}");
        }
    }
    Ok(())
}
