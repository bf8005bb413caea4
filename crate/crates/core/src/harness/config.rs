//! Run configuration: flat `key = value` text with `#` comments, where later
//! assignments (command-line overrides) win.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorOption, Variant};
use crate::neural::NetworkConfig;
use crate::score_model::{Approach, LossWeighting, OutputSkip, TrainConfig};
use crate::sde::TimeSampling;
use crate::systems::{Direction, JointSystemParams, LinearGaussianParams, System, Transform};

/// Which estimator rows a run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Report {
    /// Only the configured variant.
    #[default]
    Configured,
    /// Every variant the trained network supports: c1 and c2, plus j1 and
    /// j2 for approach `j`.
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: String,
    /// Coupling; `None` keeps the system default.
    pub lambda: Option<f64>,
    pub rho: f64,
    pub b_x: f64,
    pub b_y: f64,
    pub sigma2: f64,
    pub k: usize,
    pub l: usize,
    pub directions: Vec<Direction>,
    pub estimator: EstimatorConfig,
    pub train: TrainConfig,
    pub n_seeds: usize,
    /// Rows of the TE dataset; the simulated series is `max(k, ℓ)` longer.
    pub n_samples: usize,
    pub out_dir: PathBuf,
    pub transform: Transform,
    pub redundant_d: usize,
    pub linear_d: usize,
    pub report: Report,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: "joint".into(),
            lambda: None,
            rho: JointSystemParams::default().rho,
            b_x: 0.5,
            b_y: 0.5,
            sigma2: 1.0,
            k: 1,
            l: 1,
            directions: vec![Direction::XToY, Direction::YToX],
            estimator: EstimatorConfig::default(),
            train: TrainConfig::default(),
            n_seeds: 5,
            n_samples: 10_000,
            out_dir: PathBuf::from("results"),
            transform: Transform::Identity,
            redundant_d: 0,
            linear_d: 1,
            report: Report::Configured,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::InvalidParameter(format!("bad boolean '{value}' for '{key}'"))),
    }
}

/// Splits config text into `(key, value)` pairs, in order.
pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("{origin}:{}: expected key = value, got '{line}'", i + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::InvalidParameter(format!("{origin}:{}: empty key", i + 1)));
        }
        out.push((k.to_owned(), v.to_owned()));
    }
    Ok(out)
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "system", "lambda", "rho", "b_x", "b_y", "sigma2", "k", "l", "direction", "estimator", "approach", "option",
        "sigma", "draws", "seed", "n_seeds", "n", "epochs", "batch", "lr", "hidden", "frequencies", "max_frequency",
        "snapshots", "loss", "skip", "train_time_sampling", "t_min", "holdout", "standardize", "out", "transform",
        "redundant_d", "linear_d", "report",
    ];

    /// Applies one assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "system" => {
                System::from_name(value, None)?;
                self.system = value.to_owned();
            }
            "lambda" => self.lambda = Some(parse(key, value)?),
            "rho" => self.rho = parse(key, value)?,
            "b_x" => self.b_x = parse(key, value)?,
            "b_y" => self.b_y = parse(key, value)?,
            "sigma2" => self.sigma2 = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "l" => self.l = parse(key, value)?,
            "direction" => {
                self.directions = match value {
                    "both" => vec![Direction::XToY, Direction::YToX],
                    v => vec![v.parse()?],
                }
            }
            "estimator" => {
                let v: Variant = value.parse()?;
                self.estimator.approach = v.approach();
                self.estimator.option = v.option();
            }
            "approach" => self.estimator.approach = value.parse()?,
            "option" => {
                self.estimator.option = match value {
                    "1" => EstimatorOption::One,
                    "2" => EstimatorOption::Two,
                    _ => return Err(Error::InvalidParameter(format!("option must be 1 or 2, got '{value}'"))),
                }
            }
            "sigma" => self.estimator.sigma = parse(key, value)?,
            "draws" => self.estimator.mc_time_draws_per_point = parse(key, value)?,
            "seed" => self.estimator.seed = parse(key, value)?,
            "n_seeds" => self.n_seeds = parse(key, value)?,
            "n" => self.n_samples = parse(key, value)?,
            "epochs" => self.train.epochs = parse(key, value)?,
            "batch" => self.train.batch_size = parse(key, value)?,
            "lr" => self.train.adam.learning_rate = parse(key, value)?,
            "hidden" => {
                self.train.network.hidden = value
                    .split(',')
                    .map(|h| parse::<usize>(key, h.trim()))
                    .collect::<Result<_>>()?
            }
            "frequencies" => self.train.network.n_frequencies = parse(key, value)?,
            "max_frequency" => self.train.network.max_frequency = parse(key, value)?,
            "snapshots" => self.train.snapshots = parse(key, value)?,
            "loss" => {
                self.train.loss_weighting = match value {
                    "noise" => LossWeighting::NoisePrediction,
                    "score" => LossWeighting::ScoreMatching,
                    _ => return Err(Error::InvalidParameter(format!("loss must be noise or score, got '{value}'"))),
                }
            }
            "skip" => {
                self.train.skip = match value {
                    "gaussian" => OutputSkip::Gaussian,
                    "none" => OutputSkip::None,
                    _ => return Err(Error::InvalidParameter(format!("skip must be gaussian or none, got '{value}'"))),
                }
            }
            "train_time_sampling" => {
                self.train.time_sampling = match value {
                    "uniform" => TimeSampling::Uniform,
                    "importance" => TimeSampling::Importance,
                    _ => {
                        return Err(Error::InvalidParameter(format!(
                            "time sampling must be uniform or importance, got '{value}'"
                        )))
                    }
                }
            }
            "t_min" => self.train.schedule = self.train.schedule.with_t_min(parse(key, value)?)?,
            "holdout" => self.estimator.holdout_fraction = parse(key, value)?,
            "standardize" => self.estimator.standardize = parse_bool(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            "transform" => self.transform = value.parse()?,
            "redundant_d" => self.redundant_d = parse(key, value)?,
            "linear_d" => self.linear_d = parse(key, value)?,
            "report" => {
                self.report = match value {
                    "configured" => Report::Configured,
                    "all" => Report::All,
                    _ => return Err(Error::InvalidParameter(format!("report must be configured or all, got '{value}'"))),
                }
            }
            other => return Err(Error::InvalidParameter(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn apply<I, K, V>(&mut self, pairs: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in pairs {
            self.set(k.as_ref(), v.as_ref())?;
        }
        self.validate()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply(parse_pairs(text, "<config>")?)?;
        Ok(cfg)
    }

    /// Reads a config file, then applies `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            cfg.apply(parse_pairs(&text, &path.display().to_string())?)?;
        }
        cfg.apply(overrides.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 {
            return Err(Error::InvalidParameter("n_seeds must be at least 1".into()));
        }
        if self.k == 0 || self.l == 0 {
            return Err(Error::InvalidParameter("lags k and l must be at least 1".into()));
        }
        if self.n_samples < 2 {
            return Err(Error::InvalidParameter("need at least two samples".into()));
        }
        if self.linear_d == 0 {
            return Err(Error::InvalidParameter("linear_d must be at least 1".into()));
        }
        if self.directions.is_empty() {
            return Err(Error::InvalidParameter("no direction selected".into()));
        }
        self.system()?;
        self.estimator.validate()?;
        self.train.validate()
    }

    /// The configured system, with coupling `lambda` if given.
    pub fn system_at(&self, lambda: Option<f64>) -> Result<System> {
        let lambda = lambda.or(self.lambda);
        let sys = match System::from_name(&self.system, lambda)? {
            System::LinearGaussian(p) => System::LinearGaussian(LinearGaussianParams {
                b_x: self.b_x,
                b_y: self.b_y,
                sigma_x2: self.sigma2,
                sigma_y2: self.sigma2,
                ..p
            }),
            System::Joint(p) => System::Joint(JointSystemParams { rho: self.rho, ..p }),
        };
        match sys {
            System::LinearGaussian(p) => p.validate()?,
            System::Joint(p) => p.validate()?,
        }
        Ok(sys)
    }

    pub fn system(&self) -> Result<System> {
        self.system_at(None)
    }

    /// Length of the simulated series.
    pub fn series_len(&self, n_samples: usize) -> usize {
        n_samples + self.k.max(self.l)
    }

    /// Variants to report for this estimator configuration.
    pub fn variants(&self) -> Vec<Variant> {
        match self.report {
            Report::Configured => vec![self.estimator.variant()],
            Report::All => match self.estimator.approach {
                Approach::ConditionalOnly => vec![Variant::C1, Variant::C2],
                Approach::Joint => Variant::ALL.to_vec(),
            },
        }
    }

    /// Writes the effective configuration in the same `key = value` format.
    pub fn to_text(&self) -> String {
        let e = &self.estimator;
        let t = &self.train;
        let dirs = if self.directions.len() == 2 {
            "both".to_string()
        } else {
            self.directions[0].to_string()
        };
        let mut lines = vec![
            format!("system = {}", self.system),
            format!("rho = {}", self.rho),
            format!("b_x = {}", self.b_x),
            format!("b_y = {}", self.b_y),
            format!("sigma2 = {}", self.sigma2),
            format!("k = {}", self.k),
            format!("l = {}", self.l),
            format!("direction = {dirs}"),
            format!("estimator = {}", e.variant()),
            format!("sigma = {}", e.sigma),
            format!("draws = {}", e.mc_time_draws_per_point),
            format!("seed = {}", e.seed),
            format!("n_seeds = {}", self.n_seeds),
            format!("n = {}", self.n_samples),
            format!("epochs = {}", t.epochs),
            format!("batch = {}", t.batch_size),
            format!("lr = {}", t.adam.learning_rate),
            format!(
                "hidden = {}",
                t.network.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",")
            ),
            format!("frequencies = {}", t.network.n_frequencies),
            format!("max_frequency = {}", t.network.max_frequency),
            format!("snapshots = {}", t.snapshots),
            format!(
                "loss = {}",
                match t.loss_weighting {
                    LossWeighting::NoisePrediction => "noise",
                    LossWeighting::ScoreMatching => "score",
                }
            ),
            format!(
                "skip = {}",
                match t.skip {
                    OutputSkip::Gaussian => "gaussian",
                    OutputSkip::None => "none",
                }
            ),
            format!(
                "train_time_sampling = {}",
                match t.time_sampling {
                    TimeSampling::Uniform => "uniform",
                    TimeSampling::Importance => "importance",
                }
            ),
            format!("t_min = {}", t.schedule.t_min()),
            format!("holdout = {}", e.holdout_fraction),
            format!("standardize = {}", e.standardize),
            format!("out = {}", self.out_dir.display()),
            format!("transform = {}", self.transform.name()),
            format!("redundant_d = {}", self.redundant_d),
            format!("linear_d = {}", self.linear_d),
            format!(
                "report = {}",
                match self.report {
                    Report::Configured => "configured",
                    Report::All => "all",
                }
            ),
        ];
        if let Some(l) = self.lambda {
            lines.insert(1, format!("lambda = {l}"));
        }
        lines.join("\n") + "\n"
    }
}

/// Network settings small enough for smoke runs and the self-test.
pub fn tiny_network() -> NetworkConfig {
    NetworkConfig {
        hidden: vec![32, 32],
        n_frequencies: 4,
        max_frequency: 4.0,
        ..NetworkConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_blank_lines_and_overrides() {
        let text = "# header\nsystem = gaussian\n\nlambda = 0.25  # trailing\nn_seeds=3\nhidden = 16, 8\n";
        let cfg = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.system, "gaussian");
        assert_eq!(cfg.lambda, Some(0.25));
        assert_eq!(cfg.n_seeds, 3);
        assert_eq!(cfg.train.network.hidden, vec![16, 8]);

        let mut cfg2 = cfg.clone();
        cfg2.apply([("n_seeds", "7"), ("direction", "y_to_x")]).unwrap();
        assert_eq!(cfg2.n_seeds, 7);
        assert_eq!(cfg2.directions, vec![Direction::YToX]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_text("system = lorenz").is_err());
        assert!(RunConfig::from_text("n_seeds = 0").is_err());
        assert!(RunConfig::from_text("no equals sign").is_err());
        assert!(RunConfig::from_text("colour = blue").is_err());
        assert!(RunConfig::from_text("epochs = many").is_err());
        assert_eq!(RunConfig::from_text("system = lorenz").unwrap_err().exit_code(), 2);
        let missing = RunConfig::load(Some(Path::new("/nonexistent/tende.cfg")), &[]);
        assert_eq!(missing.unwrap_err().exit_code(), 3);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply([("system", "gaussian"), ("lambda", "0.5"), ("estimator", "j2"), ("report", "all")])
            .unwrap();
        let back = RunConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.variants().len(), 4);
    }

    #[test]
    fn every_key_is_accepted() {
        let defaults = RunConfig::default();
        let text = defaults.to_text();
        let written: Vec<String> = parse_pairs(&text, "t").unwrap().into_iter().map(|(k, _)| k).collect();
        for k in &written {
            assert!(RunConfig::KEYS.contains(&k.as_str()), "{k}");
        }
    }

    #[test]
    fn system_parameters_flow_through() {
        let cfg = RunConfig::from_text("system = joint\nrho = 0.5\nlambda = 0").unwrap();
        match cfg.system().unwrap() {
            System::Joint(p) => assert_eq!((p.rho, p.lambda), (0.5, 0.0)),
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::from_text("system = gaussian\nb_x = 1.5").is_err());
    }
}
