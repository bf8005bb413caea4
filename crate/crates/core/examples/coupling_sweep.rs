//! A reduced coupling sweep on the joint system: CSV rows plus an SVG chart
//! with the analytic curve, as `tende benchmark coupling` writes them.
//!
//!     cargo run --release --example coupling_sweep -- [out_dir]
//!
//! Uses 2000 samples and 100 epochs so it finishes in a few minutes.

use std::path::PathBuf;

use tende::harness::bench::{charts, run_sweep, Sweep, SweepSpec};
use tende::harness::config::RunConfig;
use tende::harness::results::CsvSink;
use tende::systems::{Direction, Transform};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "sweep_out".into()));
    let mut cfg = RunConfig::default();
    cfg.apply([("n", "2000"), ("epochs", "100"), ("n_seeds", "2")])?;

    let mut spec = SweepSpec::new(Sweep::Coupling, Transform::Identity, &cfg);
    spec.systems = vec!["joint".into()];
    spec.directions = vec![Direction::XToY];
    spec.values = vec![0.0, 0.5, 1.0, 2.0];

    let sink = CsvSink::new(out.join("coupling.csv"));
    let rows = run_sweep(&cfg, &spec, Some(&sink))?;
    print!("{}", tende::harness::format_summary(&rows));
    for (stem, chart) in charts(&rows, "joint system", Sweep::Coupling.x_label()) {
        let path = out.join(format!("{stem}.svg"));
        chart.write(&path)?;
        println!("wrote {}", path.display());
    }
    println!("wrote {}", sink.path().display());
    Ok(())
}
