//! Score-based KL, entropy and conditional mutual information estimators,
//! and the end-to-end transfer entropy pipeline.
//!
//! Every estimator is a Monte-Carlo average over data rows and diffusion
//! times of `w(t) · g(t)²/2 · (score-difference energy)`, with `w` the
//! change-of-measure weight of the time sampler.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::score_model::{train, Approach, EncodingMask, TrainConfig, TrainedModel};
use crate::sde::{gaussian_tail_kl, TimeSampler, TimeSampling, VpSchedule};
use crate::systems::{build_te_dataset, Direction, TeDataset, TimeSeriesPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EstimatorOption {
    /// Direct score differences.
    #[default]
    One,
    /// Differences against the Gaussian reference `φ_σ`.
    Two,
}

/// The four estimator variants: approach `c`/`j` crossed with option 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    C1,
    C2,
    J1,
    J2,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::C1, Variant::C2, Variant::J1, Variant::J2];

    pub fn new(approach: Approach, option: EstimatorOption) -> Self {
        match (approach, option) {
            (Approach::ConditionalOnly, EstimatorOption::One) => Variant::C1,
            (Approach::ConditionalOnly, EstimatorOption::Two) => Variant::C2,
            (Approach::Joint, EstimatorOption::One) => Variant::J1,
            (Approach::Joint, EstimatorOption::Two) => Variant::J2,
        }
    }

    pub fn approach(&self) -> Approach {
        match self {
            Variant::C1 | Variant::C2 => Approach::ConditionalOnly,
            Variant::J1 | Variant::J2 => Approach::Joint,
        }
    }

    pub fn option(&self) -> EstimatorOption {
        match self {
            Variant::C1 | Variant::J1 => EstimatorOption::One,
            Variant::C2 | Variant::J2 => EstimatorOption::Two,
        }
    }

    fn needs_marginal(&self) -> bool {
        self.approach() == Approach::Joint
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::C1 => "c1",
            Variant::C2 => "c2",
            Variant::J1 => "j1",
            Variant::J2 => "j2",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c1" => Ok(Variant::C1),
            "c2" => Ok(Variant::C2),
            "j1" => Ok(Variant::J1),
            "j2" => Ok(Variant::J2),
            other => Err(Error::InvalidParameter(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub approach: Approach,
    pub option: EstimatorOption,
    /// Scale of the Gaussian reference; only option 2 uses it.
    pub sigma: f64,
    pub mc_time_draws_per_point: usize,
    pub seed: u64,
    pub time_sampling: TimeSampling,
    /// Fraction of rows withheld from training and used for estimation.
    /// Zero trains and estimates on the same rows.
    pub holdout_fraction: f64,
    /// Rescale every channel to zero mean and unit variance before building
    /// the dataset.
    pub standardize: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            approach: Approach::ConditionalOnly,
            option: EstimatorOption::One,
            sigma: 1.0,
            mc_time_draws_per_point: 10,
            seed: 0,
            time_sampling: TimeSampling::Importance,
            holdout_fraction: 0.0,
            standardize: true,
        }
    }
}

impl EstimatorConfig {
    pub fn variant(&self) -> Variant {
        Variant::new(self.approach, self.option)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.mc_time_draws_per_point == 0 {
            return Err(Error::InvalidParameter("need at least one time draw per point".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::InvalidParameter("holdout fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Point estimate (nats) with across-seed dispersion.
#[derive(Debug, Clone, PartialEq)]
pub struct TeEstimate {
    pub value: f64,
    pub per_seed_values: Vec<f64>,
    pub std_dev: f64,
}

impl TeEstimate {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("seed estimates"));
        }
        let (mean, sd) = mean_std(&values);
        Ok(Self {
            value: mean,
            per_seed_values: values,
            std_dev: sd,
        })
    }
}

/// Mean and sample (n - 1) standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// A time-dependent score evaluated on a batch of diffused points.
pub trait BatchScore {
    fn scores(&self, x_t: ArrayView2<f64>, t: &[f64]) -> Result<Array2<f64>>;
}

/// Adapts a pointwise closure `(x_t, t) -> score` to [`BatchScore`].
pub struct PointScore<F>(pub F);

impl<F: Fn(&[f64], f64) -> Vec<f64>> BatchScore for PointScore<F> {
    fn scores(&self, x_t: ArrayView2<f64>, t: &[f64]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros(x_t.raw_dim());
        for (i, row) in x_t.axis_iter(Axis(0)).enumerate() {
            let s = (self.0)(&row.to_vec(), t[i]);
            if s.len() != row.len() {
                return Err(Error::DimensionMismatch {
                    expected: row.len(),
                    got: s.len(),
                    context: "score output",
                });
            }
            out.row_mut(i).assign(&ndarray::Array1::from(s));
        }
        Ok(out)
    }
}

/// Score of the diffused reference `φ_σ`: `-x/χ_t`.
pub struct ReferenceScore {
    pub sched: VpSchedule,
    pub sigma: f64,
}

impl BatchScore for ReferenceScore {
    fn scores(&self, x_t: ArrayView2<f64>, t: &[f64]) -> Result<Array2<f64>> {
        let mut out = x_t.to_owned();
        for (mut row, &ti) in out.axis_iter_mut(Axis(0)).zip(t) {
            let chi = self.sched.chi(ti, self.sigma)?;
            row.mapv_inplace(|v| -v / chi);
        }
        Ok(out)
    }
}

/// Network score of the target block under a fixed mask, with the
/// conditioning rows supplied alongside. Used for unconditional data where
/// the source and past blocks are empty.
pub struct NetworkScore<'a> {
    pub model: &'a TrainedModel,
    pub mask: EncodingMask,
}

impl BatchScore for NetworkScore<'_> {
    fn scores(&self, x_t: ArrayView2<f64>, t: &[f64]) -> Result<Array2<f64>> {
        let layout = self.model.net.layout();
        let n = x_t.nrows();
        let empty_x = Array2::zeros((n, layout.x_dim));
        let empty_z = Array2::zeros((n, layout.z_dim));
        let mut eps = self.model.predict_noise(x_t, empty_x.view(), empty_z.view(), t, self.mask)?;
        for (mut row, &ti) in eps.axis_iter_mut(Axis(0)).zip(t) {
            let sv = self.model.schedule.v(ti)?.sqrt();
            row.mapv_inplace(|e| -e / sv);
        }
        Ok(eps)
    }
}

/// Diffusion draws: for every data row, `per_point` times with weights and
/// the diffused target.
struct McDraws {
    rows: Vec<usize>,
    t: Vec<f64>,
    weight: Vec<f64>,
    x_t: Array2<f64>,
}

fn draw_diffusions<R: Rng + ?Sized>(
    data: ArrayView2<f64>,
    sched: &VpSchedule,
    mode: TimeSampling,
    per_point: usize,
    rng: &mut R,
) -> Result<McDraws> {
    let sampler = TimeSampler::new(*sched, mode);
    let n = data.nrows() * per_point;
    let dim = data.ncols();
    let mut rows = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);
    let mut x_t = Array2::zeros((n, dim));
    let mut i = 0;
    for r in 0..data.nrows() {
        for _ in 0..per_point {
            let (ti, wi) = sampler.sample(rng);
            let (k, sv) = (sched.k(ti)?, sched.v(ti)?.sqrt());
            for j in 0..dim {
                let e: f64 = StandardNormal.sample(rng);
                x_t[[i, j]] = k * data[[r, j]] + sv * e;
            }
            rows.push(r);
            t.push(ti);
            weight.push(wi);
            i += 1;
        }
    }
    Ok(McDraws { rows, t, weight, x_t })
}

/// Estimate of `∫ g²/2 E‖s_p - s_q‖² dt` from samples of `p`; never negative.
pub fn kl_estimate_e<R: Rng + ?Sized>(
    score_p: &dyn BatchScore,
    score_q: &dyn BatchScore,
    samples: ArrayView2<f64>,
    sched: &VpSchedule,
    mode: TimeSampling,
    draws_per_point: usize,
    rng: &mut R,
) -> Result<f64> {
    if samples.nrows() == 0 {
        return Err(Error::Empty("samples for KL estimate"));
    }
    if draws_per_point == 0 {
        return Err(Error::InvalidParameter("need at least one time draw per point".into()));
    }
    let mc = draw_diffusions(samples, sched, mode, draws_per_point, rng)?;
    let sp = score_p.scores(mc.x_t.view(), &mc.t)?;
    let sq = score_q.scores(mc.x_t.view(), &mc.t)?;
    let mut total = 0.0;
    for i in 0..mc.t.len() {
        let d = &sp.row(i) - &sq.row(i);
        total += mc.weight[i] * 0.5 * sched.g2(mc.t[i])? * d.dot(&d);
    }
    Ok(total / mc.t.len() as f64)
}

/// `(N/2) ln(2πσ²) + E‖x‖²/(2σ²) - e(p, φ_σ) - tail(N, χ_T)`.
pub fn entropy_estimate_with<R: Rng + ?Sized>(
    score_p: &dyn BatchScore,
    data: ArrayView2<f64>,
    sigma: f64,
    sched: &VpSchedule,
    mode: TimeSampling,
    draws_per_point: usize,
    rng: &mut R,
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    if data.nrows() == 0 {
        return Err(Error::Empty("samples for entropy estimate"));
    }
    let dim = data.ncols() as f64;
    let s2 = sigma * sigma;
    let energy = data.axis_iter(Axis(0)).map(|r| r.dot(&r)).sum::<f64>() / data.nrows() as f64;
    let reference = ReferenceScore { sched: *sched, sigma };
    let e = kl_estimate_e(score_p, &reference, data, sched, mode, draws_per_point, rng)?;
    let chi_end = sched.chi(sched.t_horizon(), sigma)?;
    Ok(0.5 * dim * (std::f64::consts::TAU * s2).ln() + energy / (2.0 * s2) - e
        - gaussian_tail_kl(data.ncols(), chi_end))
}

/// Entropy of `data` using a network trained on it as the target block with
/// empty conditioning blocks (any approach; the marginal mask is used).
pub fn entropy_estimate(model: &TrainedModel, data: ArrayView2<f64>, sigma: f64, cfg: &EstimatorConfig) -> Result<f64> {
    check_trained(model)?;
    let layout = model.net.layout();
    if layout.x_dim != 0 || layout.z_dim != 0 {
        return Err(Error::InvalidParameter(
            "entropy estimation expects a network without conditioning blocks".into(),
        ));
    }
    let score = NetworkScore {
        model,
        mask: EncodingMask::MARGINAL,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    entropy_estimate_with(
        &score,
        data,
        sigma,
        &model.schedule,
        cfg.time_sampling,
        cfg.mc_time_draws_per_point,
        &mut rng,
    )
}

/// All four CMI variants from one set of diffusion draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmiTerms {
    pub c1: f64,
    pub c2: f64,
    pub j1: Option<f64>,
    pub j2: Option<f64>,
}

impl CmiTerms {
    pub fn get(&self, v: Variant) -> Option<f64> {
        match v {
            Variant::C1 => Some(self.c1),
            Variant::C2 => Some(self.c2),
            Variant::J1 => self.j1,
            Variant::J2 => self.j2,
        }
    }
}

fn check_trained(model: &TrainedModel) -> Result<()> {
    if model.loss_trace.is_empty() {
        return Err(Error::InvalidParameter("score network has not been trained".into()));
    }
    Ok(())
}

fn sq_norm(a: ndarray::ArrayView1<f64>) -> f64 {
    a.dot(&a)
}

/// Evaluates every variant the model supports. The marginal-score variants
/// are only available when the network was trained with approach `j`.
pub fn cmi_terms(model: &TrainedModel, data: &TeDataset, cfg: &EstimatorConfig) -> Result<CmiTerms> {
    cfg.validate()?;
    check_trained(model)?;
    if data.is_empty() {
        return Err(Error::Empty("estimation dataset"));
    }
    let with_marginal = model.approach == Approach::Joint;
    let sched = &model.schedule;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mc = draw_diffusions(data.y.view(), sched, cfg.time_sampling, cfg.mc_time_draws_per_point, &mut rng)?;
    let x = data.x.select(Axis(0), &mc.rows);
    let z = data.z.select(Axis(0), &mc.rows);
    let eps_xz = model.predict_noise(mc.x_t.view(), x.view(), z.view(), &mc.t, EncodingMask::COND_XZ)?;
    let eps_z = model.predict_noise(mc.x_t.view(), x.view(), z.view(), &mc.t, EncodingMask::COND_Z)?;
    let eps_m = if with_marginal {
        Some(model.predict_noise(mc.x_t.view(), x.view(), z.view(), &mc.t, EncodingMask::MARGINAL)?)
    } else {
        None
    };

    let (mut c1, mut c2, mut j1, mut j2) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..mc.t.len() {
        let t = mc.t[i];
        let sv = sched.v(t)?.sqrt();
        let chi = sched.chi(t, cfg.sigma)?;
        let scale = mc.weight[i] * 0.5 * sched.g2(t)?;
        let s_xz = eps_xz.row(i).mapv(|e| -e / sv);
        let s_z = eps_z.row(i).mapv(|e| -e / sv);
        let reference = mc.x_t.row(i).mapv(|y| y / chi);
        let i_xz = sq_norm((&s_xz + &reference).view());
        let i_z = sq_norm((&s_z + &reference).view());
        c1 += scale * sq_norm((&s_xz - &s_z).view());
        c2 += scale * (i_xz - i_z);
        if let Some(eps_m) = &eps_m {
            let s_m = eps_m.row(i).mapv(|e| -e / sv);
            j1 += scale * (sq_norm((&s_xz - &s_m).view()) - sq_norm((&s_z - &s_m).view()));
            let i_m = sq_norm((&s_m + &reference).view());
            j2 += scale * ((i_xz - i_m) - (i_z - i_m));
        }
    }
    let n = mc.t.len() as f64;
    Ok(CmiTerms {
        c1: c1 / n,
        c2: c2 / n,
        j1: with_marginal.then_some(j1 / n),
        j2: with_marginal.then_some(j2 / n),
    })
}

pub fn cmi_estimate(model: &TrainedModel, data: &TeDataset, variant: Variant, cfg: &EstimatorConfig) -> Result<f64> {
    if variant.needs_marginal() && model.approach != Approach::Joint {
        return Err(Error::InvalidParameter(format!(
            "estimator {variant} needs a network trained with approach j"
        )));
    }
    let terms = cmi_terms(model, data, cfg)?;
    Ok(terms.get(variant).expect("checked above"))
}

/// Mean over data and time draws of `w g²/2 ‖ŝ_[1,0,0] - ŝ_[1,-1,0]‖²`.
pub fn cmi_c1(model: &TrainedModel, data: &TeDataset, cfg: &EstimatorConfig) -> Result<f64> {
    cmi_estimate(model, data, Variant::C1, cfg)
}

/// Difference of the two conditional scores' distances to the reference score.
pub fn cmi_c2(model: &TrainedModel, data: &TeDataset, cfg: &EstimatorConfig) -> Result<f64> {
    cmi_estimate(model, data, Variant::C2, cfg)
}

/// Difference of conditional-to-marginal score distances.
pub fn cmi_j1(model: &TrainedModel, data: &TeDataset, cfg: &EstimatorConfig) -> Result<f64> {
    cmi_estimate(model, data, Variant::J1, cfg)
}

/// `Î(X;[Y,Z]) - Î(X;Z)`, each mutual information measured against the
/// reference through the shared marginal term.
pub fn cmi_j2(model: &TrainedModel, data: &TeDataset, cfg: &EstimatorConfig) -> Result<f64> {
    cmi_estimate(model, data, Variant::J2, cfg)
}

/// Everything one seed of the pipeline produced.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub value: f64,
    pub terms: CmiTerms,
    pub loss_trace: Vec<f64>,
    /// Wall time of training plus estimation.
    pub elapsed_s: f64,
}

fn split_holdout(data: &TeDataset, fraction: f64, seed: u64) -> (TeDataset, TeDataset) {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_401d));
    let cut = data.len() - ((data.len() as f64 * fraction).round() as usize).clamp(1, data.len() - 1);
    (data.select(&idx[..cut]), data.select(&idx[cut..]))
}

/// Trains a fresh network on `data` and evaluates the configured estimator.
pub fn estimate_dataset(data: &TeDataset, est: &EstimatorConfig, train_cfg: &TrainConfig, seed: u64) -> Result<SeedOutcome> {
    est.validate()?;
    let started = std::time::Instant::now();
    let cfg = TrainConfig {
        approach: est.approach,
        seed,
        ..train_cfg.clone()
    };
    let (fit, eval) = if est.holdout_fraction > 0.0 && data.len() > 1 {
        split_holdout(data, est.holdout_fraction, seed)
    } else {
        (data.clone(), data.clone())
    };
    let model = train(&fit, &cfg)?;
    let eval_cfg = EstimatorConfig {
        seed: seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1),
        ..*est
    };
    let terms = cmi_terms(&model, &eval, &eval_cfg)?;
    Ok(SeedOutcome {
        seed,
        value: terms.get(est.variant()).expect("approach matches variant"),
        terms,
        loss_trace: model.loss_trace,
        elapsed_s: started.elapsed().as_secs_f64(),
    })
}

/// Per-seed seed values derived from the configured base seed.
pub fn seed_schedule(base: u64, n_seeds: usize) -> Vec<u64> {
    (0..n_seeds as u64).map(|i| base.wrapping_add(i)).collect()
}

/// Runs the pipeline once per seed on series produced by `source(seed)`.
/// Seeds run on the current rayon pool; results keep seed order.
pub fn transfer_entropy_with<F>(
    source: F,
    k: usize,
    l: usize,
    direction: Direction,
    est: &EstimatorConfig,
    train_cfg: &TrainConfig,
    n_seeds: usize,
) -> Result<(TeEstimate, Vec<SeedOutcome>)>
where
    F: Fn(u64) -> Result<TimeSeriesPair> + Sync,
{
    if n_seeds == 0 {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    est.validate()?;
    let outcomes = seed_schedule(est.seed, n_seeds)
        .into_par_iter()
        .map(|seed| {
            let pair = source(seed)?;
            let pair = if est.standardize { pair.standardized() } else { pair };
            let data = build_te_dataset(&pair, k, l, direction)?;
            estimate_dataset(&data, est, train_cfg, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let estimate = TeEstimate::from_values(outcomes.iter().map(|o| o.value).collect())?;
    Ok((estimate, outcomes))
}

/// Transfer entropy of a fixed series pair; each seed retrains from scratch.
pub fn transfer_entropy(
    pair: &TimeSeriesPair,
    k: usize,
    l: usize,
    direction: Direction,
    est: &EstimatorConfig,
    train_cfg: &TrainConfig,
    n_seeds: usize,
) -> Result<TeEstimate> {
    let m = k.max(l);
    if pair.len() <= m {
        return Err(Error::SeriesTooShort { len: pair.len(), needed: m });
    }
    transfer_entropy_with(|_| Ok(pair.clone()), k, l, direction, est, train_cfg, n_seeds).map(|(e, _)| e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::NetworkConfig;
    use crate::score_model::Trainer;

    fn normal_samples(n: usize, dim: usize, sd: f64, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((n, dim), || {
            let e: f64 = StandardNormal.sample(&mut rng);
            sd * e
        })
    }

    /// Score of `N(0, var)` after diffusion to time t.
    fn diffused_gaussian(sched: VpSchedule, var: f64) -> impl Fn(&[f64], f64) -> Vec<f64> {
        move |x, t| {
            let c = sched.chi(t, var.sqrt()).unwrap();
            x.iter().map(|v| -v / c).collect()
        }
    }

    #[test]
    fn identical_scores_give_zero() {
        let sched = VpSchedule::default();
        let data = normal_samples(200, 2, 1.0, 1);
        let p = PointScore(diffused_gaussian(sched, 1.0));
        let q = ReferenceScore { sched, sigma: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let e = kl_estimate_e(&p, &p, data.view(), &sched, TimeSampling::Importance, 3, &mut rng).unwrap();
        assert_eq!(e, 0.0);
        let e = kl_estimate_e(&p, &q, data.view(), &sched, TimeSampling::Importance, 3, &mut rng).unwrap();
        assert!(e.abs() < 1e-20);
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(kl_estimate_e(&p, &q, empty.view(), &sched, TimeSampling::Importance, 3, &mut rng).is_err());
    }

    #[test]
    fn analytic_gaussian_kl() {
        let sched = VpSchedule::default();
        let data = normal_samples(20_000, 1, 2.0, 3);
        let p = PointScore(diffused_gaussian(sched, 4.0));
        let q = ReferenceScore { sched, sigma: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let e = kl_estimate_e(&p, &q, data.view(), &sched, TimeSampling::Importance, 5, &mut rng).unwrap();
        let kl = 0.5 * (4.0 - 1.0 - 4.0f64.ln());
        let chi_end = sched.chi(1.0, 2.0).unwrap();
        let expect = kl - gaussian_tail_kl(1, chi_end);
        assert!((e - expect).abs() < 0.02, "{e} vs {expect}");
    }

    #[test]
    fn analytic_entropy_of_standard_gaussian() {
        let sched = VpSchedule::default();
        let data = normal_samples(20_000, 2, 1.0, 5);
        let p = PointScore(diffused_gaussian(sched, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = entropy_estimate_with(&p, data.view(), 1.0, &sched, TimeSampling::Importance, 2, &mut rng).unwrap();
        let truth = (std::f64::consts::TAU * std::f64::consts::E).ln();
        assert!((h - truth).abs() < 0.02, "{h} vs {truth}");
        assert!(entropy_estimate_with(&p, data.view(), 0.0, &sched, TimeSampling::Importance, 2, &mut rng).is_err());
        assert!(gaussian_tail_kl(2, sched.chi(1.0, 1.0).unwrap()).abs() < 1e-12);
    }

    fn untrained_model(approach: Approach, data: &TeDataset) -> TrainedModel {
        let cfg = TrainConfig {
            approach,
            network: NetworkConfig { hidden: vec![16], n_frequencies: 4, ..NetworkConfig::default() },
            ..TrainConfig::default()
        };
        let trainer = Trainer::new(crate::score_model::layout_of(data).unwrap(), &cfg).unwrap();
        trainer.finish(cfg.schedule, vec![1.0])
    }

    fn tiny_dataset() -> TeDataset {
        TeDataset {
            y: normal_samples(50, 1, 1.0, 7),
            x: normal_samples(50, 1, 1.0, 8),
            z: normal_samples(50, 1, 1.0, 9),
            k: 1,
            l: 1,
        }
    }

    #[test]
    fn equal_scores_give_zero_for_every_variant() {
        let data = tiny_dataset();
        let model = untrained_model(Approach::Joint, &data);
        let terms = cmi_terms(&model, &data, &EstimatorConfig::default()).unwrap();
        assert_eq!(terms.c1, 0.0);
        assert_eq!(terms.c2, 0.0);
        assert_eq!(terms.j1, Some(0.0));
        assert_eq!(terms.j2, Some(0.0));
    }

    #[test]
    fn marginal_variants_need_joint_training() {
        let data = tiny_dataset();
        let model = untrained_model(Approach::ConditionalOnly, &data);
        let cfg = EstimatorConfig::default();
        assert!(cmi_c1(&model, &data, &cfg).is_ok());
        assert!(cmi_j1(&model, &data, &cfg).is_err());
        let mut fresh = model.clone();
        fresh.loss_trace.clear();
        assert!(cmi_c1(&fresh, &data, &cfg).is_err());
    }

    #[test]
    fn estimate_summary_statistics() {
        let e = TeEstimate::from_values(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(e.value, 3.0);
        assert!((e.std_dev - 2.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(e.per_seed_values.len(), 5);
        assert!(TeEstimate::from_values(vec![]).is_err());
        assert_eq!(TeEstimate::from_values(vec![0.7]).unwrap().std_dev, 0.0);
    }

    #[test]
    fn short_series_is_rejected() {
        let pair = TimeSeriesPair::new(Array2::zeros((2, 1)), Array2::zeros((2, 1))).unwrap();
        let r = transfer_entropy(&pair, 2, 1, Direction::XToY, &EstimatorConfig::default(), &TrainConfig::default(), 1);
        assert!(matches!(r, Err(Error::SeriesTooShort { .. })));
    }
}
