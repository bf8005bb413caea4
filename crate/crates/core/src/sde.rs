//! Variance-preserving diffusion with a linear noise rate.
//!
//! The forward process is `dX = -β(t)/2 X dt + √β(t) dW` with
//! `β(t) = β_min + (β_max - β_min) t / T`. Everything here is closed form:
//! the integrated rate `B(t) = ∫₀ᵗ β`, the mean scale `k(t) = exp(-B/2)` and
//! the kernel variance `v(t) = 1 - k(t)²`.

use rand::Rng;

use crate::error::{Error, Result};

pub const DEFAULT_BETA_MIN: f64 = 0.1;
pub const DEFAULT_BETA_MAX: f64 = 20.0;
pub const DEFAULT_T_HORIZON: f64 = 1.0;
pub const DEFAULT_T_MIN: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VpSchedule {
    beta_min: f64,
    beta_max: f64,
    t_horizon: f64,
    t_min: f64,
}

impl Default for VpSchedule {
    fn default() -> Self {
        Self {
            beta_min: DEFAULT_BETA_MIN,
            beta_max: DEFAULT_BETA_MAX,
            t_horizon: DEFAULT_T_HORIZON,
            t_min: DEFAULT_T_MIN,
        }
    }
}

impl VpSchedule {
    pub fn new(beta_min: f64, beta_max: f64, t_horizon: f64) -> Result<Self> {
        if !(beta_min > 0.0 && beta_min.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta_min must be positive, got {beta_min}"
            )));
        }
        if !(beta_max >= beta_min && beta_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta_max must be >= beta_min, got {beta_max}"
            )));
        }
        if !(t_horizon > 0.0 && t_horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {t_horizon}"
            )));
        }
        let sched = Self {
            beta_min,
            beta_max,
            t_horizon,
            t_min: DEFAULT_T_MIN.min(t_horizon / 2.0),
        };
        Ok(sched)
    }

    pub fn with_t_min(mut self, t_min: f64) -> Result<Self> {
        if !(t_min > 0.0 && t_min < self.t_horizon) {
            return Err(Error::InvalidParameter(format!(
                "t_min must lie in (0, {}), got {t_min}",
                self.t_horizon
            )));
        }
        self.t_min = t_min;
        Ok(self)
    }

    pub fn beta_min(&self) -> f64 {
        self.beta_min
    }

    pub fn beta_max(&self) -> f64 {
        self.beta_max
    }

    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    fn slope(&self) -> f64 {
        (self.beta_max - self.beta_min) / self.t_horizon
    }

    fn check(&self, t: f64) -> Result<()> {
        if (0.0..=self.t_horizon).contains(&t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange {
                t,
                lo: 0.0,
                hi: self.t_horizon,
            })
        }
    }

    /// `B(t) = ∫₀ᵗ β(s) ds`.
    fn integrated_beta(&self, t: f64) -> f64 {
        self.beta_min * t + 0.5 * self.slope() * t * t
    }

    /// Inverse of `B` on `[0, T]`.
    fn inverse_integrated_beta(&self, b: f64) -> f64 {
        let a = self.beta_min;
        let s = self.slope();
        // root of s/2 t² + a t - b = 0 in a cancellation-free form
        2.0 * b / (a + (a * a + 2.0 * s * b).sqrt())
    }

    /// Squared diffusion coefficient `g(t)² = β(t)`.
    pub fn g2(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.beta_min + self.slope() * t)
    }

    /// Drift coefficient `f(t) = -β(t)/2`.
    pub fn drift(&self, t: f64) -> Result<f64> {
        Ok(-0.5 * self.g2(t)?)
    }

    pub fn k(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok((-0.5 * self.integrated_beta(t)).exp())
    }

    pub fn v(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(-(-self.integrated_beta(t)).exp_m1())
    }

    /// Variance of the diffused centered Gaussian with scale `sigma`:
    /// `k(t)² σ² + v(t)`.
    pub fn chi(&self, t: f64, sigma: f64) -> Result<f64> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        let k = self.k(t)?;
        Ok(k * k * sigma * sigma + self.v(t)?)
    }
}

/// `k(t) x0 + √v(t) noise`.
pub fn perturb(sched: &VpSchedule, x0: &[f64], t: f64, noise: &[f64]) -> Result<Vec<f64>> {
    if x0.len() != noise.len() {
        return Err(Error::DimensionMismatch {
            expected: x0.len(),
            got: noise.len(),
            context: "perturbation noise",
        });
    }
    let k = sched.k(t)?;
    let s = sched.v(t)?.sqrt();
    Ok(x0.iter().zip(noise).map(|(x, e)| k * x + s * e).collect())
}

/// Score of `N(0, chi I)`.
pub fn gaussian_ref_score(x_t: &[f64], chi: f64) -> Vec<f64> {
    debug_assert!(chi > 0.0);
    x_t.iter().map(|x| -x / chi).collect()
}

/// `(dim/2)(ln χ_T - 1 + 1/χ_T)`, the closed-form KL between the terminal
/// standard normal and the diffused reference Gaussian.
pub fn gaussian_tail_kl(dim: usize, chi_t: f64) -> f64 {
    0.5 * dim as f64 * (chi_t.ln() - 1.0 + 1.0 / chi_t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeSampling {
    /// `t ~ U[t_min, T]` with weight `T - t_min`.
    Uniform,
    /// Density proportional to `g(t)²/v(t)` on `[t_min, T]`.
    #[default]
    Importance,
}

/// Draws diffusion times together with change-of-measure weights so that
/// `E[w h(t)] = ∫_{t_min}^{T} h(t) dt`.
#[derive(Debug, Clone, Copy)]
pub struct TimeSampler {
    sched: VpSchedule,
    mode: TimeSampling,
    // log-potential endpoints for the importance proposal; d/dt ln(e^B - 1) = β/v
    lo: f64,
    mass: f64,
}

impl TimeSampler {
    pub fn new(sched: VpSchedule, mode: TimeSampling) -> Self {
        let lo = log_potential(sched.integrated_beta(sched.t_min));
        let hi = log_potential(sched.integrated_beta(sched.t_horizon));
        Self {
            sched,
            mode,
            lo,
            mass: hi - lo,
        }
    }

    pub fn mode(&self) -> TimeSampling {
        self.mode
    }

    pub fn schedule(&self) -> &VpSchedule {
        &self.sched
    }

    /// `∫_{t_min}^{T} g²/v dt`, the normalizer of the importance proposal.
    pub fn importance_mass(&self) -> f64 {
        self.mass
    }

    /// Maps a uniform quantile `u ∈ [0, 1)` to `(t, weight)`.
    pub fn sample_at(&self, u: f64) -> (f64, f64) {
        let s = &self.sched;
        match self.mode {
            TimeSampling::Uniform => {
                let span = s.t_horizon - s.t_min;
                (s.t_min + u * span, span)
            }
            TimeSampling::Importance => {
                let b = softplus(self.lo + u * self.mass);
                let t = s
                    .inverse_integrated_beta(b)
                    .clamp(s.t_min, s.t_horizon);
                let bt = s.integrated_beta(t);
                let v = -(-bt).exp_m1();
                let g2 = s.beta_min + s.slope() * t;
                (t, self.mass * v / g2)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        self.sample_at(rng.random::<f64>())
    }
}

fn log_potential(b: f64) -> f64 {
    b.exp_m1().ln()
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
