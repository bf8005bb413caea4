//! Training of the single amortized denoising network.
//!
//! Only the target block is diffused; the source and target-past blocks are
//! fed clean as conditioning or zeroed out, depending on the encoding mask.
//! The network predicts the injected noise and scores are recovered as
//! `ŝ = -ε̂ / √v(t)`.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::neural::{AdamConfig, AdamState, BlockLayout, NetworkConfig, ScoreNetwork};
use crate::sde::{TimeSampler, TimeSampling, VpSchedule};
use crate::systems::TeDataset;

/// Rows per network call when evaluating large sets.
pub const EVAL_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Approach {
    /// Conditional scores only (`c`).
    #[default]
    ConditionalOnly,
    /// Conditional and marginal scores (`j`).
    Joint,
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Approach::ConditionalOnly => "c",
            Approach::Joint => "j",
        })
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c" | "conditional" | "conditional_only" => Ok(Approach::ConditionalOnly),
            "j" | "joint" => Ok(Approach::Joint),
            other => Err(Error::InvalidParameter(format!("unknown approach '{other}'"))),
        }
    }
}

/// Per-block encoding: `1` learned (diffused) block, `0` clean conditioning,
/// `-1` marginalized out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EncodingMask([i8; 3]);

impl EncodingMask {
    /// Score of `Y` given both the source past and the target past.
    pub const COND_XZ: EncodingMask = EncodingMask([1, 0, 0]);
    /// Score of `Y` given the target past only.
    pub const COND_Z: EncodingMask = EncodingMask([1, -1, 0]);
    /// Marginal score of `Y`.
    pub const MARGINAL: EncodingMask = EncodingMask([1, -1, -1]);

    pub const ALL: [EncodingMask; 3] = [Self::COND_XZ, Self::COND_Z, Self::MARGINAL];

    pub fn new(mask: [i8; 3]) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.0 == mask)
            .ok_or(Error::InvalidMask(mask))
    }

    pub fn as_array(&self) -> [i8; 3] {
        self.0
    }

    fn index(&self) -> usize {
        Self::ALL.iter().position(|m| m == self).expect("legal mask")
    }
}

pub fn sample_encoding<R: Rng + ?Sized>(approach: Approach, rng: &mut R) -> EncodingMask {
    match approach {
        Approach::ConditionalOnly => EncodingMask::ALL[rng.random_range(0..2)],
        Approach::Joint => EncodingMask::ALL[rng.random_range(0..3)],
    }
}

/// Per-sample weight of the denoising loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossWeighting {
    /// `w_is(t) · g(t)²/v(t)`: the score-matching integrand over `t`.
    ScoreMatching,
    /// Unit weight on `‖ε - ε̂‖²` regardless of the time draw. Same minimizer,
    /// but far less gradient noise from the uninformative small-`t` region.
    #[default]
    NoisePrediction,
}

/// What the network output is added to before it is read as `ε̂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputSkip {
    /// `ε̂` is the raw network output.
    None,
    /// `ε̂ = √v(t)·y_t + f`: the network learns the departure from the noise
    /// prediction of a standard Gaussian target. Masked differences are
    /// unchanged, and on standardized data `f` is near zero at large `t`.
    #[default]
    Gaussian,
}

impl OutputSkip {
    /// Adds the skip term to network outputs `eps` in place.
    pub fn apply(&self, sched: &VpSchedule, y_t: ArrayView2<f64>, t: &[f64], eps: &mut Array2<f64>) -> Result<()> {
        if *self == OutputSkip::Gaussian {
            for (i, mut row) in eps.axis_iter_mut(Axis(0)).enumerate() {
                let sv = sched.v(t[i])?.sqrt();
                row.scaled_add(sv, &y_t.row(i));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub approach: Approach,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub schedule: VpSchedule,
    pub time_sampling: TimeSampling,
    pub loss_weighting: LossWeighting,
    pub skip: OutputSkip,
    /// Number of final epochs whose parameters are kept for estimation,
    /// capped at `epochs`.
    pub snapshots: usize,
    pub network: NetworkConfig,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            approach: Approach::ConditionalOnly,
            epochs: 400,
            batch_size: 128,
            seed: 0,
            schedule: VpSchedule::default(),
            time_sampling: TimeSampling::Uniform,
            loss_weighting: LossWeighting::NoisePrediction,
            skip: OutputSkip::Gaussian,
            snapshots: 10,
            network: NetworkConfig::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter("epochs and batch size must be positive".into()));
        }
        if self.snapshots == 0 {
            return Err(Error::InvalidParameter("need at least one snapshot".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub net: ScoreNetwork,
    pub schedule: VpSchedule,
    pub approach: Approach,
    /// Mean training loss of every epoch.
    pub loss_trace: Vec<f64>,
    /// How many training rows used each mask, in [`EncodingMask::ALL`] order.
    pub mask_counts: [u64; 3],
    pub skip: OutputSkip,
    /// Parameters after each of the last few epochs, oldest first. Empty
    /// means only `net` is used.
    pub snapshots: Vec<ScoreNetwork>,
}

impl TrainedModel {
    /// Networks that share the Monte-Carlo rows at estimation time.
    pub fn ensemble(&self) -> Vec<&ScoreNetwork> {
        if self.snapshots.is_empty() {
            vec![&self.net]
        } else {
            self.snapshots.iter().collect()
        }
    }

    /// `ε̂` for many rows: [`predict_noise`] plus the skip term, with row `i`
    /// answered by snapshot `i mod snapshots`.
    pub fn predict_noise(
        &self,
        y_t: ArrayView2<f64>,
        x: ArrayView2<f64>,
        z: ArrayView2<f64>,
        t: &[f64],
        mask: EncodingMask,
    ) -> Result<Array2<f64>> {
        let mut out = self.predict_raw(y_t, x, z, t, mask)?;
        self.skip.apply(&self.schedule, y_t, t, &mut out)?;
        Ok(out)
    }

    fn predict_raw(
        &self,
        y_t: ArrayView2<f64>,
        x: ArrayView2<f64>,
        z: ArrayView2<f64>,
        t: &[f64],
        mask: EncodingMask,
    ) -> Result<Array2<f64>> {
        let nets = self.ensemble();
        if nets.len() == 1 {
            return predict_noise(nets[0], y_t, x, z, t, mask);
        }
        let n = y_t.nrows();
        let mut out = Array2::zeros((n, self.net.output_dim()));
        for (j, net) in nets.iter().enumerate() {
            let idx: Vec<usize> = (j..n).step_by(nets.len()).collect();
            if idx.is_empty() {
                continue;
            }
            let ts: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
            let pred = predict_noise(
                net,
                y_t.select(Axis(0), &idx).view(),
                x.select(Axis(0), &idx).view(),
                z.select(Axis(0), &idx).view(),
                &ts,
                mask,
            )?;
            for (r, &i) in idx.iter().enumerate() {
                out.row_mut(i).assign(&pred.row(r));
            }
        }
        Ok(out)
    }
}

/// Noise, times and masks drawn for one batch.
#[derive(Debug, Clone)]
pub struct BatchDraws {
    pub weighting: LossWeighting,
    pub skip: OutputSkip,
    pub t: Vec<f64>,
    pub is_weight: Vec<f64>,
    pub noise: Array2<f64>,
    pub masks: Vec<EncodingMask>,
}

/// Per-row denoising loss `w_is(t) · g²(t)/v(t) · ‖ε - ε̂‖²` together with the
/// adjoint of the batch mean with respect to the network output.
pub fn denoising_loss(
    net: &ScoreNetwork,
    sched: &VpSchedule,
    y: ArrayView2<f64>,
    x: ArrayView2<f64>,
    z: ArrayView2<f64>,
    draws: &BatchDraws,
) -> Result<(Vec<f64>, crate::neural::Tape, Array2<f64>)> {
    let n = y.nrows();
    let mut y_t = Array2::zeros(y.raw_dim());
    let mut coef = Vec::with_capacity(n);
    for i in 0..n {
        let t = draws.t[i];
        let (k, v) = (sched.k(t)?, sched.v(t)?);
        let sv = v.sqrt();
        for j in 0..y.ncols() {
            y_t[[i, j]] = k * y[[i, j]] + sv * draws.noise[[i, j]];
        }
        coef.push(match draws.weighting {
            LossWeighting::ScoreMatching => draws.is_weight[i] * sched.g2(t)? / v,
            LossWeighting::NoisePrediction => 1.0,
        });
    }
    let masks: Vec<[i8; 3]> = draws.masks.iter().map(EncodingMask::as_array).collect();
    let input = net.encode_batch(y_t.view(), x, z, &draws.t, &masks)?;
    let tape = net.forward_recorded(input);
    let mut eps_hat = tape.output.clone();
    draws.skip.apply(sched, y_t.view(), &draws.t, &mut eps_hat)?;
    let resid = &draws.noise - &eps_hat;
    let losses: Vec<f64> = resid
        .axis_iter(Axis(0))
        .zip(&coef)
        .map(|(r, c)| c * r.dot(&r))
        .collect();
    let mut adjoint = resid;
    for (mut row, c) in adjoint.axis_iter_mut(Axis(0)).zip(&coef) {
        row *= -2.0 * c / n as f64;
    }
    Ok((losses, tape, adjoint))
}

/// Owns the network, optimizer and random stream for one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    net: ScoreNetwork,
    adam: AdamState,
    sampler: TimeSampler,
    approach: Approach,
    weighting: LossWeighting,
    skip: OutputSkip,
    rng: ChaCha8Rng,
    mask_counts: [u64; 3],
}

impl Trainer {
    pub fn new(layout: BlockLayout, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let net = ScoreNetwork::new(layout, &cfg.network, &mut rng)?;
        let adam = AdamState::new(&net, cfg.adam);
        Ok(Self {
            net,
            adam,
            sampler: TimeSampler::new(cfg.schedule, cfg.time_sampling),
            approach: cfg.approach,
            weighting: cfg.loss_weighting,
            skip: cfg.skip,
            rng,
            mask_counts: [0; 3],
        })
    }

    pub fn net(&self) -> &ScoreNetwork {
        &self.net
    }

    pub fn mask_counts(&self) -> [u64; 3] {
        self.mask_counts
    }

    pub fn draw(&mut self, rows: usize, y_dim: usize) -> BatchDraws {
        let mut t = Vec::with_capacity(rows);
        let mut is_weight = Vec::with_capacity(rows);
        let mut masks = Vec::with_capacity(rows);
        for _ in 0..rows {
            let (ti, wi) = self.sampler.sample(&mut self.rng);
            t.push(ti);
            is_weight.push(wi);
            masks.push(sample_encoding(self.approach, &mut self.rng));
        }
        let rng = &mut self.rng;
        let noise = Array2::from_shape_simple_fn((rows, y_dim), || StandardNormal.sample(rng));
        BatchDraws {
            weighting: self.weighting,
            skip: self.skip,
            t,
            is_weight,
            noise,
            masks,
        }
    }

    /// One optimizer step on a batch; returns the batch-mean loss.
    pub fn step(&mut self, y: ArrayView2<f64>, x: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<f64> {
        let draws = self.draw(y.nrows(), y.ncols());
        let sched = *self.sampler.schedule();
        let (losses, tape, adjoint) = denoising_loss(&self.net, &sched, y, x, z, &draws)?;
        let loss = losses.iter().sum::<f64>() / losses.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training loss became {loss} at step {}",
                self.adam.step_count() + 1
            )));
        }
        let grads = self.net.backward(&tape, adjoint.view());
        self.adam.step(&mut self.net, &grads)?;
        for m in &draws.masks {
            self.mask_counts[m.index()] += 1;
        }
        Ok(loss)
    }

    /// One pass over the shuffled dataset; returns the mean loss.
    pub fn epoch(&mut self, data: &TeDataset, batch_size: usize) -> Result<f64> {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let shuffled = data.select(&order);
        let mut total = 0.0;
        let mut start = 0;
        while start < shuffled.len() {
            let end = (start + batch_size).min(shuffled.len());
            let sl = s![start..end, ..];
            let loss = self.step(shuffled.y.slice(sl), shuffled.x.slice(sl), shuffled.z.slice(sl))?;
            total += loss * (end - start) as f64;
            start = end;
        }
        Ok(total / shuffled.len() as f64)
    }

    pub fn finish(self, schedule: VpSchedule, loss_trace: Vec<f64>) -> TrainedModel {
        TrainedModel {
            net: self.net,
            schedule,
            approach: self.approach,
            loss_trace,
            mask_counts: self.mask_counts,
            skip: self.skip,
            snapshots: Vec::new(),
        }
    }
}

pub fn layout_of(data: &TeDataset) -> Result<BlockLayout> {
    BlockLayout::new(data.y.ncols(), data.x.ncols(), data.z.ncols())
}

pub fn train(data: &TeDataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    if data.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let mut trainer = Trainer::new(layout_of(data)?, cfg)?;
    let mut trace = Vec::with_capacity(cfg.epochs);
    let keep = cfg.snapshots.min(cfg.epochs);
    let mut snapshots = Vec::with_capacity(keep);
    for e in 0..cfg.epochs {
        trace.push(trainer.epoch(data, cfg.batch_size)?);
        if keep > 1 && e + keep >= cfg.epochs {
            snapshots.push(trainer.net().clone());
        }
    }
    let mut model = trainer.finish(cfg.schedule, trace);
    model.snapshots = snapshots;
    Ok(model)
}

/// `ŝ = -ε̂ / √v(t)` for one point, from the raw output of `net` (no skip
/// term).
pub fn score_at(
    net: &ScoreNetwork,
    y_t: &[f64],
    x: &[f64],
    z: &[f64],
    t: f64,
    mask: EncodingMask,
    sched: &VpSchedule,
) -> Result<Vec<f64>> {
    if t < sched.t_min() {
        return Err(Error::TimeOutOfRange {
            t,
            lo: sched.t_min(),
            hi: sched.t_horizon(),
        });
    }
    let sv = sched.v(t)?.sqrt();
    Ok(net
        .forward(y_t, x, z, t, mask.as_array())?
        .into_iter()
        .map(|e| -e / sv)
        .collect())
}

/// Noise predictions for many rows under one mask, evaluated in chunks.
pub fn predict_noise(
    net: &ScoreNetwork,
    y_t: ArrayView2<f64>,
    x: ArrayView2<f64>,
    z: ArrayView2<f64>,
    t: &[f64],
    mask: EncodingMask,
) -> Result<Array2<f64>> {
    let n = y_t.nrows();
    let mut out = Array2::zeros((n, net.output_dim()));
    let mut start = 0;
    while start < n {
        let end = (start + EVAL_CHUNK).min(n);
        let sl = s![start..end, ..];
        let masks = vec![mask.as_array(); end - start];
        let pred = net.forward_batch(y_t.slice(sl), x.slice(sl), z.slice(sl), &t[start..end], &masks)?;
        out.slice_mut(sl).assign(&pred);
        start = end;
    }
    Ok(out)
}
