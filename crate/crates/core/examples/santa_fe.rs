//! Respiration/heart-rate TE over target lags k = 1..5 on a Santa Fe style
//! record. Without an argument a synthetic record is used in which
//! respiration drives the heart rate.
//!
//!     cargo run --release --example santa_fe -- [record.txt]

use std::path::PathBuf;

use tende::harness::config::RunConfig;
use tende::harness::santafe::{respiration_dominance, run_santa_fe, SantaFeColumns};

fn synthetic(path: &PathBuf) -> std::io::Result<()> {
    let mut text = String::new();
    for i in 0..3600 {
        let t = i as f64 * 0.5;
        let resp = (t * 0.9).sin() + 0.3 * (t * 0.13).cos();
        let heart = 70.0 + 4.0 * ((t - 1.0) * 0.9).sin() + 0.5 * (t * 0.031).sin();
        text.push_str(&format!("{heart:.4} {resp:.4} 96\n"));
    }
    std::fs::write(path, text)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("tende_santa_fe");
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let p = dir.join("synthetic.txt");
            std::fs::create_dir_all(&dir)?;
            synthetic(&p)?;
            p
        }
    };
    let mut cfg = RunConfig::default();
    cfg.apply([("n_seeds", "2"), ("epochs", "100")])?;
    cfg.out_dir = dir;
    let (rows, files) = run_santa_fe(&cfg, &path, SantaFeColumns::default(), 5)?;
    print!("{}", tende::harness::format_summary(&rows));
    let (wins, total) = respiration_dominance(&rows);
    println!("respiration -> heart larger at {wins} of {total} lags");
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
