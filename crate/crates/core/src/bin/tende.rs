use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tende::error::{Error, Result};
use tende::harness::config::RunConfig;
use tende::harness::{self, SantaFeColumns, Suite};

#[derive(Parser, Debug)]
#[command(name = "tende", version, about = "Transfer entropy with a denoising score network")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable, applied after the file.
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a simulated series from the configured system.
    Simulate {
        #[arg(long, default_value_t = 10_001)]
        len: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Estimate TE on a series file, or on the configured system if none.
    Estimate {
        #[arg(long, short)]
        input: Option<PathBuf>,
    },
    /// Run a sweep suite: sample_size, coupling, redundant, linear,
    /// half_cube, cdf or all.
    Benchmark { suite: Suite },
    /// TE between respiration and heart rate on the Santa Fe record.
    Santafe {
        path: PathBuf,
        /// Column indices, e.g. `heart=0,respiration=1,oxygen=2`.
        #[arg(long, default_value = "heart=0,respiration=1,oxygen=2")]
        columns: SantaFeColumns,
        #[arg(long, default_value_t = 5)]
        k_max: usize,
    },
    /// Quick network-free checks of the numerical core.
    Selftest,
}

fn overrides(set: &[String]) -> Result<Vec<(String, String)>> {
    set.iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
                .ok_or_else(|| Error::InvalidParameter(format!("--set expects KEY=VALUE, got '{s}'")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides(&cli.set)?)?;
    match cli.command {
        Command::Simulate { len, seed, output } => {
            harness::cli_simulate(&cfg, len, seed, &output)?;
            println!("wrote {}", output.display());
        }
        Command::Estimate { input } => {
            let (rows, csv) = harness::with_pool(|| harness::cli_estimate(&cfg, input.as_deref()))?;
            print!("{}", harness::format_summary(&rows));
            println!("appended {} rows to {}", rows.len(), csv.display());
        }
        Command::Benchmark { suite } => {
            let (rows, files) = harness::with_pool(|| harness::run_suite(&cfg, suite))?;
            print!("{}", harness::format_summary(&rows));
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Santafe { path, columns, k_max } => {
            let (rows, files) = harness::with_pool(|| harness::run_santa_fe(&cfg, &path, columns, k_max))?;
            print!("{}", harness::format_summary(&rows));
            let (wins, total) = harness::santafe::respiration_dominance(&rows);
            println!("respiration -> heart larger at {wins} of {total} lags");
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Selftest => {
            let checks = harness::selftest();
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            if failed > 0 {
                return Err(Error::Numeric(format!("{failed} self-test checks failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
