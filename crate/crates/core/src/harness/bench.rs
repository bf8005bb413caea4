//! Multi-seed runs over synthetic systems and the benchmark sweeps built on
//! them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::{mean_std, transfer_entropy_with};
use crate::harness::config::RunConfig;
use crate::harness::plot::{LineChart, Series, SeriesPoint};
use crate::harness::results::{CsvSink, ResultRow};
use crate::systems::{stack_linear, stack_redundant, Direction, System, TimeSeriesPair, Transform};

pub const SAMPLE_SIZES: [usize; 4] = [500, 1000, 5000, 10_000];
pub const REDUNDANT_DIMS: [usize; 4] = [0, 1, 2, 4];
pub const LINEAR_COPIES: [usize; 3] = [1, 2, 3];
pub const SYSTEMS: [&str; 2] = ["linear_gaussian", "joint"];

/// Nine evenly spaced couplings in `[0, 1]`.
pub fn coupling_grid() -> Vec<f64> {
    (0..9).map(|i| i as f64 / 8.0).collect()
}

/// Coupling used by sweeps that do not vary it: the configured value, else
/// 0.5 for both systems, so the linear Gaussian system has a nonzero
/// `y_to_x` truth.
pub fn default_lambda(cfg: &RunConfig) -> f64 {
    cfg.lambda.unwrap_or(0.5)
}

/// One synthetic configuration: system, size, stacking and transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub system: System,
    pub n_samples: usize,
    pub linear_d: usize,
    pub redundant_d: usize,
    pub transform: Transform,
}

impl Scenario {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(Self {
            system: cfg.system()?,
            n_samples: cfg.n_samples,
            linear_d: cfg.linear_d,
            redundant_d: cfg.redundant_d,
            transform: cfg.transform,
        })
    }

    /// `system[/transform]`.
    pub fn label(&self) -> String {
        match self.transform {
            Transform::Identity => self.system.name().to_owned(),
            t => format!("{}/{}", self.system.name(), t.name()),
        }
    }

    pub fn truth(&self, direction: Direction) -> Result<f64> {
        Ok(self.linear_d as f64 * self.system.truth(direction)?)
    }

    /// Series for one seed; the seed alone fixes every random draw.
    pub fn generate(&self, len: usize, direction: Direction, seed: u64) -> Result<TimeSeriesPair> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pair, _) = stack_linear(&self.system, self.linear_d, len, direction, &mut rng)?;
        let pair = stack_redundant(&pair, self.redundant_d, &mut rng)?;
        Ok(self.transform.apply(&pair))
    }
}

/// Trains and estimates once per seed on series from `source`, returning one
/// row per seed and reported variant.
#[allow(clippy::too_many_arguments)]
pub fn run_point<F>(
    cfg: &RunConfig,
    label: &str,
    param: f64,
    n: usize,
    direction: Direction,
    truth: Option<f64>,
    source: F,
) -> Result<Vec<ResultRow>>
where
    F: Fn(u64) -> Result<TimeSeriesPair> + Sync,
{
    let (_, outcomes) = transfer_entropy_with(source, cfg.k, cfg.l, direction, &cfg.estimator, &cfg.train, cfg.n_seeds)?;
    let mut rows = Vec::new();
    for o in &outcomes {
        for v in cfg.variants() {
            let estimate = o
                .terms
                .get(v)
                .ok_or_else(|| Error::InvalidParameter(format!("estimator {v} needs approach j")))?;
            if !estimate.is_finite() {
                return Err(Error::Numeric(format!("non-finite {v} estimate for seed {}", o.seed)));
            }
            rows.push(ResultRow {
                system: label.to_owned(),
                n,
                param,
                direction: direction.to_string(),
                estimator: v.to_string(),
                seed: o.seed,
                estimate,
                truth,
                wall_time_s: o.elapsed_s,
            });
        }
    }
    Ok(rows)
}

/// Runs a synthetic scenario in one direction.
pub fn run_scenario(cfg: &RunConfig, scenario: &Scenario, param: f64, direction: Direction) -> Result<Vec<ResultRow>> {
    let len = cfg.series_len(scenario.n_samples);
    run_point(
        cfg,
        &scenario.label(),
        param,
        scenario.n_samples,
        direction,
        Some(scenario.truth(direction)?),
        |seed| scenario.generate(len, direction, seed),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sweep {
    SampleSize,
    Coupling,
    Redundant,
    Linear,
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::SampleSize => "sample_size",
            Sweep::Coupling => "coupling",
            Sweep::Redundant => "redundant",
            Sweep::Linear => "linear",
        }
    }

    pub fn x_label(&self) -> &'static str {
        match self {
            Sweep::SampleSize => "sample size N",
            Sweep::Coupling => "coupling λ",
            Sweep::Redundant => "redundant dimensions d",
            Sweep::Linear => "stacked copies d",
        }
    }

    pub fn default_values(&self) -> Vec<f64> {
        match self {
            Sweep::SampleSize => SAMPLE_SIZES.iter().map(|&n| n as f64).collect(),
            Sweep::Coupling => coupling_grid(),
            Sweep::Redundant => REDUNDANT_DIMS.iter().map(|&d| d as f64).collect(),
            Sweep::Linear => LINEAR_COPIES.iter().map(|&d| d as f64).collect(),
        }
    }
}

/// A sweep over one parameter for a set of systems and directions.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub sweep: Sweep,
    pub transform: Transform,
    pub systems: Vec<String>,
    pub directions: Vec<Direction>,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn new(sweep: Sweep, transform: Transform, cfg: &RunConfig) -> Self {
        Self {
            sweep,
            transform,
            systems: SYSTEMS.iter().map(|s| s.to_string()).collect(),
            directions: cfg.directions.clone(),
            values: sweep.default_values(),
        }
    }

    /// File stem for this sweep's CSV and charts.
    pub fn stem(&self) -> String {
        match self.transform {
            Transform::Identity => self.sweep.name().to_owned(),
            t => format!("{}_{}", t.name(), self.sweep.name()),
        }
    }

    fn scenario(&self, cfg: &RunConfig, system: &str, value: f64) -> Result<Scenario> {
        let mut sys_cfg = cfg.clone();
        sys_cfg.system = system.to_owned();
        let lambda = match self.sweep {
            Sweep::Coupling => value,
            _ => default_lambda(cfg),
        };
        let as_count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidParameter(format!("{} value must be a whole number, got {v}", self.sweep.name())))
            }
        };
        let mut s = Scenario {
            system: sys_cfg.system_at(Some(lambda))?,
            n_samples: cfg.n_samples,
            linear_d: 1,
            redundant_d: 0,
            transform: self.transform,
        };
        match self.sweep {
            Sweep::SampleSize => s.n_samples = as_count(value)?,
            Sweep::Coupling => {}
            Sweep::Redundant => s.redundant_d = as_count(value)?,
            Sweep::Linear => s.linear_d = as_count(value)?.max(1),
        }
        Ok(s)
    }
}

/// Runs every point of a sweep, appending each point's rows to `sink`.
pub fn run_sweep(cfg: &RunConfig, spec: &SweepSpec, sink: Option<&CsvSink>) -> Result<Vec<ResultRow>> {
    let mut all = Vec::new();
    for system in &spec.systems {
        for &direction in &spec.directions {
            for &value in &spec.values {
                let scenario = spec.scenario(cfg, system, value)?;
                let rows = run_scenario(cfg, &scenario, value, direction)?;
                if let Some(sink) = sink {
                    sink.append(&rows)?;
                }
                all.extend(rows);
            }
        }
    }
    Ok(all)
}

/// Named benchmark suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    SampleSize,
    Coupling,
    Redundant,
    Linear,
    /// Coupling, redundant and linear sweeps on transformed data.
    Transformed(Transform),
    All,
}

impl Suite {
    pub fn sweeps(&self, cfg: &RunConfig) -> Vec<SweepSpec> {
        let id = Transform::Identity;
        match self {
            Suite::SampleSize => vec![SweepSpec::new(Sweep::SampleSize, id, cfg)],
            Suite::Coupling => vec![SweepSpec::new(Sweep::Coupling, id, cfg)],
            Suite::Redundant => vec![SweepSpec::new(Sweep::Redundant, id, cfg)],
            Suite::Linear => vec![SweepSpec::new(Sweep::Linear, id, cfg)],
            Suite::Transformed(t) => [Sweep::Coupling, Sweep::Redundant, Sweep::Linear]
                .iter()
                .map(|&s| SweepSpec::new(s, *t, cfg))
                .collect(),
            Suite::All => [
                Suite::SampleSize,
                Suite::Coupling,
                Suite::Redundant,
                Suite::Linear,
                Suite::Transformed(Transform::HalfCube),
                Suite::Transformed(Transform::GaussCdf),
            ]
            .iter()
            .flat_map(|s| s.sweeps(cfg))
            .collect(),
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample_size" => Ok(Suite::SampleSize),
            "coupling" | "lambda" => Ok(Suite::Coupling),
            "redundant" => Ok(Suite::Redundant),
            "linear" => Ok(Suite::Linear),
            "half_cube" => Ok(Suite::Transformed(Transform::HalfCube)),
            "cdf" | "gauss_cdf" => Ok(Suite::Transformed(Transform::GaussCdf)),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidParameter(format!(
                "unknown suite '{other}' (sample_size, coupling, redundant, linear, half_cube, cdf, all)"
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Suite::SampleSize => f.write_str("sample_size"),
            Suite::Coupling => f.write_str("coupling"),
            Suite::Redundant => f.write_str("redundant"),
            Suite::Linear => f.write_str("linear"),
            Suite::Transformed(t) => f.write_str(t.name()),
            Suite::All => f.write_str("all"),
        }
    }
}

/// Mean and spread over seeds for one configuration and estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub system: String,
    pub direction: String,
    pub estimator: String,
    pub param: f64,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub seeds: usize,
    pub truth: Option<f64>,
}

/// Groups rows by (system, direction, estimator, param, n), keeping the
/// first-seen order of groups.
pub fn summarize(rows: &[ResultRow]) -> Vec<Summary> {
    let mut order: Vec<(String, String, String, u64, usize)> = Vec::new();
    let mut groups: BTreeMap<(String, String, String, u64, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.system.clone(), r.direction.clone(), r.estimator.clone(), r.param.to_bits(), r.n);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let values: Vec<f64> = g.iter().map(|r| r.estimate).collect();
            let (mean, std) = mean_std(&values);
            Summary {
                system: key.0,
                direction: key.1,
                estimator: key.2,
                param: g[0].param,
                n: key.4,
                mean,
                std,
                seeds: g.len(),
                truth: g[0].truth,
            }
        })
        .collect()
}

/// One chart per (system, direction): a series per estimator against the
/// swept parameter, plus the truth curve when every point has one.
pub fn charts(rows: &[ResultRow], title: &str, x_label: &str) -> Vec<(String, LineChart)> {
    let summaries = summarize(rows);
    let mut keys: Vec<(String, String)> = Vec::new();
    for s in &summaries {
        let k = (s.system.clone(), s.direction.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(system, direction)| {
            let mine: Vec<&Summary> = summaries
                .iter()
                .filter(|s| s.system == system && s.direction == direction)
                .collect();
            let mut estimators: Vec<String> = Vec::new();
            for s in &mine {
                if !estimators.contains(&s.estimator) {
                    estimators.push(s.estimator.clone());
                }
            }
            let series = estimators
                .iter()
                .map(|e| {
                    let mut points: Vec<SeriesPoint> = mine
                        .iter()
                        .filter(|s| &s.estimator == e)
                        .map(|s| SeriesPoint { x: s.param, mean: s.mean, std: s.std })
                        .collect();
                    points.sort_by(|a, b| a.x.total_cmp(&b.x));
                    Series { label: e.clone(), points }
                })
                .collect();
            let mut truth: Vec<(f64, f64)> = Vec::new();
            let mut complete = true;
            for s in mine.iter().filter(|s| s.estimator == estimators[0]) {
                match s.truth {
                    Some(t) => truth.push((s.param, t)),
                    None => complete = false,
                }
            }
            truth.sort_by(|a, b| a.0.total_cmp(&b.0));
            let key = format!("{}_{}", system.replace('/', "_"), direction);
            let chart = LineChart {
                title: format!("{title}: {system}, {direction}"),
                x_label: x_label.to_owned(),
                y_label: "transfer entropy (nats)".into(),
                series,
                truth: (complete && !truth.is_empty()).then_some(truth),
            };
            (key, chart)
        })
        .collect()
}

/// Runs a suite, writing `<stem>.csv` and one `<stem>_<system>_<dir>.svg`
/// per chart into the output directory. Returns every row and the files
/// written.
pub fn run_suite(cfg: &RunConfig, suite: Suite) -> Result<(Vec<ResultRow>, Vec<PathBuf>)> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for spec in suite.sweeps(cfg) {
        let csv = cfg.out_dir.join(format!("{}.csv", spec.stem()));
        let sink = CsvSink::new(&csv);
        let sweep_rows = run_sweep(cfg, &spec, Some(&sink))?;
        files.push(csv);
        for (key, chart) in charts(&sweep_rows, &spec.stem(), spec.sweep.x_label()) {
            let path = cfg.out_dir.join(format!("{}_{key}.svg", spec.stem()));
            chart.write(&path)?;
            files.push(path);
        }
        rows.extend(sweep_rows);
    }
    Ok((rows, files))
}
