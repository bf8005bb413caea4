//! Command implementations behind the `tende` binary: simulation, estimation,
//! benchmark suites, the Santa Fe analysis and a quick self-test.

pub mod bench;
pub mod config;
pub mod plot;
pub mod results;
pub mod santafe;

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::baselines::{gaussian_cmi, linear_gaussian_blocks};
use crate::error::{Error, Result};
use crate::estimators::{kl_estimate_e, mean_std, PointScore, ReferenceScore};
use crate::neural::{gradient_check, BlockLayout, NetworkConfig, ScoreNetwork};
use crate::sde::{gaussian_tail_kl, TimeSampler, TimeSampling, VpSchedule};
use crate::systems::{te_linear_gaussian_truth, Direction, LinearGaussianParams, TimeSeriesPair};

use bench::{run_point, Scenario};
use config::RunConfig;
use results::{CsvSink, ResultRow};

pub use bench::{run_suite, Suite};
pub use santafe::{load_santa_fe, run_santa_fe, SantaFeColumns};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "TENDE_THREADS";

/// Worker count from `TENDE_THREADS`, else the available parallelism.
pub fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Runs `f` on a dedicated pool sized by [`thread_count`].
pub fn with_pool<T: Send>(f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    pool.install(f)
}

/// Writes a simulated series of `len` steps, seeded by `seed`.
pub fn cli_simulate(cfg: &RunConfig, len: usize, seed: u64, path: &Path) -> Result<()> {
    if len == 0 {
        return Err(Error::InvalidParameter("series length must be positive".into()));
    }
    let scenario = Scenario::from_config(cfg)?;
    let direction = cfg.directions[0];
    let pair = scenario.generate(len, direction, seed)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    pair.write_text(&mut w).map_err(|e| Error::io(path, e))?;
    std::io::Write::flush(&mut w).map_err(|e| Error::io(path, e))
}

pub fn read_series(path: &Path) -> Result<TimeSeriesPair> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    TimeSeriesPair::read_text(std::io::BufReader::new(file))
}

/// One line per (direction, estimator): `mean ± std` over seeds.
pub fn format_summary(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    for s in bench::summarize(rows) {
        let truth = s.truth.map(|t| format!("  (truth {t:.4})")).unwrap_or_default();
        out.push_str(&format!(
            "{} {} {} param={} n={}: {:.4} ± {:.4} over {} seeds{}\n",
            s.system, s.direction, s.estimator, s.param, s.n, s.mean, s.std, s.seeds, truth
        ));
    }
    out
}

/// Estimates TE for each configured direction, on a series file if given or
/// on the configured synthetic system otherwise, and appends the rows to
/// `<out>/results.csv`.
pub fn cli_estimate(cfg: &RunConfig, input: Option<&Path>) -> Result<(Vec<ResultRow>, PathBuf)> {
    let csv = cfg.out_dir.join("results.csv");
    let sink = CsvSink::new(&csv);
    let mut rows = Vec::new();
    match input {
        Some(path) => {
            let pair = read_series(path)?;
            let m = cfg.k.max(cfg.l);
            if pair.len() <= m + 1 {
                return Err(Error::SeriesTooShort { len: pair.len(), needed: m + 1 });
            }
            let label = path
                .file_stem()
                .map(|s| s.to_string_lossy().replace(',', "_"))
                .unwrap_or_else(|| "series".into());
            for &direction in &cfg.directions {
                let r = run_point(cfg, &label, 0.0, pair.len() - m, direction, None, |_| Ok(pair.clone()))?;
                sink.append(&r)?;
                rows.extend(r);
            }
        }
        None => {
            let scenario = Scenario::from_config(cfg)?;
            let param = scenario.system.lambda();
            for &direction in &cfg.directions {
                let r = bench::run_scenario(cfg, &scenario, param, direction)?;
                sink.append(&r)?;
                rows.extend(r);
            }
        }
    }
    Ok((rows, csv))
}

/// Outcome of one self-test check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Fast network-free checks of the numerical core.
pub fn selftest() -> Vec<Check> {
    let mut out = Vec::new();
    let sched = VpSchedule::default();

    let mut worst: f64 = 0.0;
    for i in 0..=100 {
        let t = sched.t_min() + (1.0 - sched.t_min()) * i as f64 / 100.0;
        let (k, v) = (sched.k(t).unwrap(), sched.v(t).unwrap());
        worst = worst.max((k * k + v - 1.0).abs()).max((sched.chi(t, 1.0).unwrap() - 1.0).abs());
    }
    out.push(check("vp identities", worst <= 1e-12, format!("max deviation {worst:.2e}")));

    let tail = gaussian_tail_kl(3, 1.0);
    out.push(check("tail term at chi = 1", tail == 0.0, format!("{tail:e}")));

    let sampler = TimeSampler::new(sched, TimeSampling::Importance);
    let n = 100_000;
    let mass = (0..n).map(|i| sampler.sample_at((i as f64 + 0.5) / n as f64).1).sum::<f64>() / n as f64;
    let span = 1.0 - sched.t_min();
    out.push(check(
        "importance sampler mass",
        (mass - span).abs() < 1e-3,
        format!("{mass:.6} vs {span:.6}"),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = NetworkConfig {
        hidden: vec![8, 6],
        n_frequencies: 3,
        ..NetworkConfig::default()
    };
    let grad = ScoreNetwork::new(BlockLayout::new(2, 2, 1).expect("valid layout"), &cfg, &mut rng).and_then(|mut net| {
        for i in 0..net.num_params() {
            let v: f64 = StandardNormal.sample(&mut rng);
            net.set_param(i, 0.5 * v);
        }
        let mut m = |c| Array2::from_shape_fn((6, c), |_| StandardNormal.sample(&mut rng));
        let (y, x, z) = (m(2), m(2), m(1));
        let t: Vec<f64> = (0..6).map(|i| 0.1 + 0.15 * i as f64).collect();
        let masks = [[1, 0, 0], [1, -1, 0], [1, -1, -1], [1, 0, 0], [1, -1, 0], [1, -1, -1]];
        let input = net.encode_batch(y.view(), x.view(), z.view(), &t, &masks)?;
        let probes: Vec<usize> = (0..net.num_params()).step_by(3).collect();
        Ok(gradient_check(&mut net, &input, &probes))
    });
    out.push(match grad {
        Ok(err) => check("gradient check", err < 1e-4, format!("max relative error {err:.2e}")),
        Err(e) => check("gradient check", false, e.to_string()),
    });

    let kl = (|| -> Result<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = Array2::from_shape_simple_fn((20_000, 1), || {
            let e: f64 = StandardNormal.sample(&mut rng);
            2.0 * e
        });
        let p = PointScore(|x: &[f64], t: f64| {
            let c = sched.chi(t, 2.0).expect("t in range");
            x.iter().map(|v| -v / c).collect::<Vec<f64>>()
        });
        let q = ReferenceScore { sched, sigma: 1.0 };
        let e = kl_estimate_e(&p, &q, data.view(), &sched, TimeSampling::Importance, 5, &mut rng)?;
        let expect = 0.5 * (4.0 - 1.0 - 4f64.ln()) - gaussian_tail_kl(1, sched.chi(1.0, 2.0)?);
        Ok((e, expect))
    })();
    out.push(match kl {
        Ok((e, expect)) => check("analytic kl", (e - expect).abs() < 0.02, format!("{e:.4} vs {expect:.4}")),
        Err(e) => check("analytic kl", false, e.to_string()),
    });

    let p = LinearGaussianParams {
        lambda: 0.5,
        ..Default::default()
    };
    let gc = linear_gaussian_blocks(&p, 1, 1, Direction::YToX)
        .map(|b| gaussian_cmi(&b))
        .and_then(|g| Ok((g, te_linear_gaussian_truth(&p, Direction::YToX)?)));
    out.push(match gc {
        Ok((g, t)) => check("gaussian cmi oracle", (g - t).abs() < 1e-6, format!("{g:.6} vs {t:.6}")),
        Err(e) => check("gaussian cmi oracle", false, e.to_string()),
    });

    let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
    out.push(check("sample std", m == 2.0 && s == 1.0, format!("{m} ± {s}")));
    out
}
