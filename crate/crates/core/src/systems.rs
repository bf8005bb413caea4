//! Benchmark time series with known transfer entropy, plus the lagged
//! dataset construction that turns a series pair into i.i.d. triplets.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4, Vector4};
use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const VAR_BURN_IN: usize = 1000;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPair {
    x: Array2<f64>,
    y: Array2<f64>,
}

impl TimeSeriesPair {
    pub fn new(x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.nrows(),
                context: "series lengths",
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("series contains non-finite values".into()));
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nx(&self) -> usize {
        self.x.ncols()
    }

    pub fn ny(&self) -> usize {
        self.y.ncols()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView2<'_, f64> {
        self.y.view()
    }

    /// Exchanges the roles of source and target.
    pub fn swapped(&self) -> Self {
        Self {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }

    /// First `len` time steps.
    pub fn truncated(&self, len: usize) -> Self {
        let len = len.min(self.len());
        Self {
            x: self.x.slice(s![..len, ..]).to_owned(),
            y: self.y.slice(s![..len, ..]).to_owned(),
        }
    }

    /// Zero mean, unit variance per channel. Constant channels are only centered.
    pub fn standardized(&self) -> Self {
        Self {
            x: standardize_columns(&self.x),
            y: standardize_columns(&self.y),
        }
    }

    /// Header `# N_x N_y T_len`, then one whitespace-delimited line per step
    /// holding the x channels followed by the y channels.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# {} {} {}", self.nx(), self.ny(), self.len())?;
        let mut line = String::new();
        for (xr, yr) in self.x.rows().into_iter().zip(self.y.rows()) {
            line.clear();
            for (i, v) in xr.iter().chain(yr.iter()).enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = match lines.next() {
            Some(l) => l.map_err(|e| Error::io("<series>", e))?,
            None => return Err(Error::parse("series line 1", "missing header")),
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        let dims: Option<Vec<usize>> = match fields.as_slice() {
            ["#", a, b, c] => [a, b, c].iter().map(|v| v.parse().ok()).collect(),
            _ => None,
        };
        let dims = dims.ok_or_else(|| Error::parse("series line 1", "expected '# N_x N_y T_len'"))?;
        let (nx, ny, len) = (dims[0], dims[1], dims[2]);
        let width = nx + ny;
        let mut data = Vec::with_capacity(len * width);
        let mut count = 0;
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io("<series>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let loc = || format!("series line {}", i + 2);
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(tok.parse::<f64>().map_err(|_| Error::parse(loc(), format!("bad number '{tok}'")))?);
            }
            if data.len() - before != width {
                return Err(Error::parse(loc(), format!("expected {width} values")));
            }
            count += 1;
        }
        if count != len {
            return Err(Error::parse("series", format!("header says {len} rows, found {count}")));
        }
        let all = Array2::from_shape_vec((len, width), data).expect("shape checked");
        Self::new(
            all.slice(s![.., ..nx]).to_owned(),
            all.slice(s![.., nx..]).to_owned(),
        )
    }
}

fn standardize_columns(a: &Array2<f64>) -> Array2<f64> {
    let mut out = a.clone();
    let n = a.nrows() as f64;
    for mut col in out.columns_mut() {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        let scale = if sd > 0.0 { 1.0 / sd } else { 1.0 };
        col.mapv_inplace(|v| (v - mean) * scale);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    XToY,
    YToX,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::XToY, Direction::YToX];
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::XToY => "x_to_y",
            Direction::YToX => "y_to_x",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x_to_y" => Ok(Direction::XToY),
            "y_to_x" => Ok(Direction::YToX),
            other => Err(Error::InvalidParameter(format!("unknown direction '{other}'"))),
        }
    }
}

/// Triplets `(Y_t, [X_{t-1}..X_{t-k}], [Y_{t-1}..Y_{t-ℓ}])`, one row per usable `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TeDataset {
    pub y: Array2<f64>,
    pub x: Array2<f64>,
    pub z: Array2<f64>,
    pub k: usize,
    pub l: usize,
}

impl TeDataset {
    pub fn len(&self) -> usize {
        self.y.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Subset of rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            y: self.y.select(Axis(0), rows),
            x: self.x.select(Axis(0), rows),
            z: self.z.select(Axis(0), rows),
            k: self.k,
            l: self.l,
        }
    }
}

pub fn build_te_dataset(pair: &TimeSeriesPair, k: usize, l: usize, direction: Direction) -> Result<TeDataset> {
    if k == 0 || l == 0 {
        return Err(Error::InvalidParameter("lags must be at least 1".into()));
    }
    let m = k.max(l);
    if pair.len() <= m {
        return Err(Error::SeriesTooShort {
            len: pair.len(),
            needed: m,
        });
    }
    let (src, tgt) = match direction {
        Direction::XToY => (pair.x(), pair.y()),
        Direction::YToX => (pair.y(), pair.x()),
    };
    let n = pair.len() - m;
    let y = tgt.slice(s![m.., ..]).to_owned();
    let lagged = |series: ArrayView2<f64>, lags: usize| -> Array2<f64> {
        let blocks: Vec<_> = (1..=lags)
            .map(|j| series.slice_move(s![m - j..m - j + n, ..]))
            .collect();
        concatenate(Axis(1), &blocks).expect("equal row counts")
    };
    Ok(TeDataset {
        y,
        x: lagged(src, k),
        z: lagged(tgt, l),
        k,
        l,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGaussianParams {
    pub b_x: f64,
    pub b_y: f64,
    pub lambda: f64,
    pub sigma_x2: f64,
    pub sigma_y2: f64,
}

impl Default for LinearGaussianParams {
    fn default() -> Self {
        Self {
            b_x: 0.5,
            b_y: 0.5,
            lambda: 0.0,
            sigma_x2: 1.0,
            sigma_y2: 1.0,
        }
    }
}

impl LinearGaussianParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b_x.abs() < 1.0 && self.b_y.abs() < 1.0) {
            return Err(Error::InvalidParameter("AR coefficients must satisfy |b| < 1".into()));
        }
        if !(self.sigma_x2 > 0.0 && self.sigma_y2 > 0.0) {
            return Err(Error::InvalidParameter("innovation variances must be positive".into()));
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidParameter("coupling must be finite".into()));
        }
        Ok(())
    }

    pub fn transition(&self) -> Matrix2<f64> {
        Matrix2::new(self.b_x, self.lambda, 0.0, self.b_y)
    }

    /// Stationary covariance of `(x_t, y_t)`: the solution of `Σ = A Σ Aᵀ + Q`.
    pub fn stationary_covariance(&self) -> Result<Matrix2<f64>> {
        self.validate()?;
        let a = self.transition();
        // vec(Σ) = (I - A⊗A)⁻¹ vec(Q), column-major vec
        let kron = a.kronecker(&a);
        let lhs = Matrix4::identity() - kron;
        let q = Vector4::new(self.sigma_x2, 0.0, 0.0, self.sigma_y2);
        let sol = lhs
            .lu()
            .solve(&q)
            .ok_or_else(|| Error::Numeric("singular Lyapunov system".into()))?;
        let s = Matrix2::new(sol[0], sol[2], sol[1], sol[3]);
        Ok((s + s.transpose()) * 0.5)
    }
}

/// `x_t = b_x x_{t-1} + λ y_{t-1} + ε^x_t`, `y_t = b_y y_{t-1} + ε^y_t`, after burn-in.
pub fn gen_linear_gaussian<R: Rng + ?Sized>(p: &LinearGaussianParams, len: usize, rng: &mut R) -> Result<TimeSeriesPair> {
    p.validate()?;
    let (sx, sy) = (p.sigma_x2.sqrt(), p.sigma_y2.sqrt());
    let mut x = Array2::zeros((len, 1));
    let mut y = Array2::zeros((len, 1));
    let (mut xp, mut yp) = (0.0, 0.0);
    for t in 0..VAR_BURN_IN + len {
        let ex: f64 = StandardNormal.sample(rng);
        let ey: f64 = StandardNormal.sample(rng);
        let xn = p.b_x * xp + p.lambda * yp + sx * ex;
        let yn = p.b_y * yp + sy * ey;
        xp = xn;
        yp = yn;
        if t >= VAR_BURN_IN {
            x[[t - VAR_BURN_IN, 0]] = xn;
            y[[t - VAR_BURN_IN, 0]] = yn;
        }
    }
    TimeSeriesPair::new(x, y)
}

/// Exact `TE(k=1, ℓ=1)` of the bivariate VAR(1).
pub fn te_linear_gaussian_truth(p: &LinearGaussianParams, direction: Direction) -> Result<f64> {
    p.validate()?;
    match direction {
        Direction::XToY => Ok(0.0),
        Direction::YToX => {
            let s = p.stationary_covariance()?;
            let a = p.transition();
            // Cov(x_t, x_{t-1}) = (A Σ)_{xx}
            let lag1 = (a * s)[(0, 0)];
            let cond = s[(0, 0)] - lag1 * lag1 / s[(0, 0)];
            Ok(0.5 * (cond / p.sigma_x2).ln())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointSystemParams {
    pub lambda: f64,
    pub rho: f64,
}

impl Default for JointSystemParams {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            rho: 0.9,
        }
    }
}

impl JointSystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidParameter("|rho| must be < 1".into()));
        }
        if self.lambda.is_nan() {
            return Err(Error::InvalidParameter("threshold must not be NaN".into()));
        }
        Ok(())
    }
}

/// Threshold-switched coupling: `y_t = z_{t-1}` below the threshold,
/// `ρ x_{t-1} + √(1-ρ²) z_{t-1}` at or above it.
pub fn gen_joint_system<R: Rng + ?Sized>(p: &JointSystemParams, len: usize, rng: &mut R) -> Result<TimeSeriesPair> {
    p.validate()?;
    let c = (1.0 - p.rho * p.rho).sqrt();
    let mut x = Array2::zeros((len, 1));
    let mut y = Array2::zeros((len, 1));
    let mut xp: f64 = StandardNormal.sample(rng);
    let mut zp: f64 = StandardNormal.sample(rng);
    let mut yp: f64 = StandardNormal.sample(rng);
    for t in 0..len {
        let yt = if yp < p.lambda { zp } else { p.rho * xp + c * zp };
        let xt: f64 = StandardNormal.sample(rng);
        let zt: f64 = StandardNormal.sample(rng);
        x[[t, 0]] = xt;
        y[[t, 0]] = yt;
        xp = xt;
        zp = zt;
        yp = yt;
    }
    TimeSeriesPair::new(x, y)
}

pub fn te_joint_truth(p: &JointSystemParams, direction: Direction) -> Result<f64> {
    p.validate()?;
    Ok(match direction {
        Direction::XToY => -0.5 * (1.0 - normal_cdf(p.lambda)) * (1.0 - p.rho * p.rho).ln(),
        Direction::YToX => 0.0,
    })
}

/// A benchmark system with a closed-form ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum System {
    LinearGaussian(LinearGaussianParams),
    Joint(JointSystemParams),
}

impl System {
    pub fn name(&self) -> &'static str {
        match self {
            System::LinearGaussian(_) => "linear_gaussian",
            System::Joint(_) => "joint",
        }
    }

    /// Default parameters for a system name, with coupling `lambda`.
    pub fn from_name(name: &str, lambda: Option<f64>) -> Result<Self> {
        match name {
            "linear_gaussian" | "gaussian" => {
                let mut p = LinearGaussianParams::default();
                if let Some(l) = lambda {
                    p.lambda = l;
                }
                Ok(System::LinearGaussian(p))
            }
            "joint" => {
                let mut p = JointSystemParams::default();
                if let Some(l) = lambda {
                    p.lambda = l;
                }
                Ok(System::Joint(p))
            }
            other => Err(Error::UnknownSystem(other.to_owned())),
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            System::LinearGaussian(p) => p.lambda,
            System::Joint(p) => p.lambda,
        }
    }

    pub fn generate<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Result<TimeSeriesPair> {
        match self {
            System::LinearGaussian(p) => gen_linear_gaussian(p, len, rng),
            System::Joint(p) => gen_joint_system(p, len, rng),
        }
    }

    pub fn truth(&self, direction: Direction) -> Result<f64> {
        match self {
            System::LinearGaussian(p) => te_linear_gaussian_truth(p, direction),
            System::Joint(p) => te_joint_truth(p, direction),
        }
    }
}

/// Appends `d` white-noise channels to each side.
pub fn stack_redundant<R: Rng + ?Sized>(pair: &TimeSeriesPair, d: usize, rng: &mut R) -> Result<TimeSeriesPair> {
    if d == 0 {
        return Ok(pair.clone());
    }
    let n = pair.len();
    let mut noise = |_: usize| -> Array2<f64> { Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(rng)) };
    let nx = noise(0);
    let ny = noise(1);
    TimeSeriesPair::new(
        concatenate(Axis(1), &[pair.x(), nx.view()]).expect("row counts match"),
        concatenate(Axis(1), &[pair.y(), ny.view()]).expect("row counts match"),
    )
}

/// `d` independent replicates placed side by side; the truth adds up.
pub fn stack_linear<R: Rng + ?Sized>(
    system: &System,
    d: usize,
    len: usize,
    direction: Direction,
    rng: &mut R,
) -> Result<(TimeSeriesPair, f64)> {
    if d == 0 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    let reps = (0..d)
        .map(|_| system.generate(len, rng))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<_> = reps.iter().map(|r| r.x()).collect();
    let ys: Vec<_> = reps.iter().map(|r| r.y()).collect();
    let pair = TimeSeriesPair::new(
        concatenate(Axis(1), &xs).expect("row counts match"),
        concatenate(Axis(1), &ys).expect("row counts match"),
    )?;
    Ok((pair, d as f64 * system.truth(direction)?))
}

pub fn half_cube(v: f64) -> f64 {
    v * v.abs().sqrt()
}

/// `x ↦ x √|x|` on every coordinate.
pub fn transform_half_cube(pair: &TimeSeriesPair) -> TimeSeriesPair {
    TimeSeriesPair {
        x: pair.x.mapv(half_cube),
        y: pair.y.mapv(half_cube),
    }
}

/// `x ↦ Φ(x)` on every coordinate.
pub fn transform_gauss_cdf(pair: &TimeSeriesPair) -> TimeSeriesPair {
    TimeSeriesPair {
        x: pair.x.mapv(normal_cdf),
        y: pair.y.mapv(normal_cdf),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transform {
    #[default]
    Identity,
    HalfCube,
    GaussCdf,
}

impl Transform {
    pub fn apply(&self, pair: &TimeSeriesPair) -> TimeSeriesPair {
        match self {
            Transform::Identity => pair.clone(),
            Transform::HalfCube => transform_half_cube(pair),
            Transform::GaussCdf => transform_gauss_cdf(pair),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Transform::Identity => "none",
            Transform::HalfCube => "half_cube",
            Transform::GaussCdf => "cdf",
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "identity" => Ok(Transform::Identity),
            "half_cube" => Ok(Transform::HalfCube),
            "cdf" | "gauss_cdf" => Ok(Transform::GaussCdf),
            other => Err(Error::InvalidParameter(format!("unknown transform '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn lag1_corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() - 1;
        let (a, b) = (&a[..n], &b[1..]);
        let ma = a.iter().sum::<f64>() / n as f64;
        let mb = b.iter().sum::<f64>() / n as f64;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn dataset_row_count_and_layout() {
        let x = Array2::from_shape_fn((10, 1), |(t, _)| t as f64);
        let y = Array2::from_shape_fn((10, 1), |(t, _)| 100.0 + t as f64);
        let pair = TimeSeriesPair::new(x, y).unwrap();
        let ds = build_te_dataset(&pair, 2, 3, Direction::XToY).unwrap();
        assert_eq!(ds.len(), 7);
        // first usable t is 3: Y = y_3, X = [x_2, x_1], Z = [y_2, y_1, y_0]
        assert_eq!(ds.y.row(0).to_vec(), vec![103.0]);
        assert_eq!(ds.x.row(0).to_vec(), vec![2.0, 1.0]);
        assert_eq!(ds.z.row(0).to_vec(), vec![102.0, 101.0, 100.0]);

        let ds = build_te_dataset(&pair, 1, 1, Direction::XToY).unwrap();
        for (i, t) in (1..10).enumerate() {
            assert_eq!(ds.y[[i, 0]], 100.0 + t as f64);
            assert_eq!(ds.x[[i, 0]], (t - 1) as f64);
            assert_eq!(ds.z[[i, 0]], 100.0 + (t - 1) as f64);
        }
        let rev = build_te_dataset(&pair, 1, 1, Direction::YToX).unwrap();
        assert_eq!(rev.y[[0, 0]], 1.0);
        assert_eq!(rev.x[[0, 0]], 100.0);
        assert_eq!(build_te_dataset(&pair.swapped().swapped(), 2, 3, Direction::XToY).unwrap(),
                   build_te_dataset(&pair, 2, 3, Direction::XToY).unwrap());
        assert_eq!(build_te_dataset(&pair.swapped(), 2, 1, Direction::YToX).unwrap(),
                   build_te_dataset(&pair, 2, 1, Direction::XToY).unwrap());
        assert!(matches!(
            build_te_dataset(&pair.truncated(3), 2, 3, Direction::XToY),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn multichannel_lags_stack_in_order() {
        let x = Array2::from_shape_fn((6, 2), |(t, c)| (10 * t + c) as f64);
        let y = Array2::from_shape_fn((6, 1), |(t, _)| -(t as f64));
        let pair = TimeSeriesPair::new(x, y).unwrap();
        let ds = build_te_dataset(&pair, 2, 1, Direction::XToY).unwrap();
        assert_eq!(ds.x.row(0).to_vec(), vec![10.0, 11.0, 0.0, 1.0]);
        assert_eq!(ds.z.row(0).to_vec(), vec![-1.0]);
    }

    #[test]
    fn white_noise_when_uncoupled() {
        let p = LinearGaussianParams { b_x: 0.0, b_y: 0.0, lambda: 0.0, ..Default::default() };
        let n = 20_000;
        let pair = gen_linear_gaussian(&p, n, &mut rng(1)).unwrap();
        let (x, y) = (pair.x().column(0).to_vec(), pair.y().column(0).to_vec());
        let tol = 3.0 / (n as f64).sqrt();
        assert!(lag1_corr(&x, &y).abs() < tol);
        assert!(lag1_corr(&y, &x).abs() < tol);
    }

    #[test]
    fn ar1_stationary_variance() {
        let p = LinearGaussianParams::default();
        let pair = gen_linear_gaussian(&p, 100_000, &mut rng(2)).unwrap();
        let y = pair.y();
        let var = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        assert!((var / (1.0 / 0.75) - 1.0).abs() < 0.05, "{var}");
        assert_eq!(pair, gen_linear_gaussian(&p, 100_000, &mut rng(2)).unwrap());
    }

    #[test]
    fn lyapunov_truth_matches_hand_solution() {
        let p = LinearGaussianParams { lambda: 0.5, ..Default::default() };
        let s = p.stationary_covariance().unwrap();
        assert!((s[(0, 0)] - 2.0741).abs() < 1e-4);
        assert!((s[(1, 1)] - 4.0 / 3.0).abs() < 1e-12);
        let te = te_linear_gaussian_truth(&p, Direction::YToX).unwrap();
        assert!((te - 0.5 * 1.3095f64.ln()).abs() < 1e-4);
        assert!((te - 0.1349).abs() < 1e-4);
        assert_eq!(te_linear_gaussian_truth(&p, Direction::XToY).unwrap(), 0.0);
        let p0 = LinearGaussianParams::default();
        assert!(te_linear_gaussian_truth(&p0, Direction::YToX).unwrap().abs() < 1e-12);
        assert!(LinearGaussianParams { b_x: 1.0, ..p }.validate().is_err());
    }

    #[test]
    fn joint_truth_values() {
        let t = |lambda, rho| te_joint_truth(&JointSystemParams { lambda, rho }, Direction::XToY).unwrap();
        assert_eq!(t(0.3, 0.0), 0.0);
        assert!((t(0.0, 0.9) - 0.4152).abs() < 1e-4);
        assert!((t(0.5, 0.9) - 0.2562).abs() < 1e-4);
        assert!(t(40.0, 0.9) < 1e-12);
        let p = JointSystemParams::default();
        assert_eq!(te_joint_truth(&p, Direction::YToX).unwrap(), 0.0);
        assert!((normal_cdf(0.5) - 0.69146).abs() < 1e-5);
    }

    #[test]
    fn joint_system_statistics() {
        let p = JointSystemParams::default();
        let n = 100_000;
        let pair = gen_joint_system(&p, n, &mut rng(3)).unwrap();
        let y = pair.y().column(0).to_vec();
        let var = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.02, "{var}");
        let above = y.iter().filter(|&&v| v >= p.lambda).count() as f64 / n as f64;
        assert!((above - (1.0 - normal_cdf(p.lambda))).abs() < 0.02 * (1.0 - normal_cdf(p.lambda)) + 0.005);

        // without coupling y never looks at x
        let q = JointSystemParams { rho: 0.0, ..p };
        let pair = gen_joint_system(&q, 20_000, &mut rng(4)).unwrap();
        let (x, y) = (pair.x().column(0).to_vec(), pair.y().column(0).to_vec());
        assert!(lag1_corr(&x, &y).abs() < 3.0 / (20_000f64).sqrt());
    }

    #[test]
    fn stacking_shapes_and_truth() {
        let sys = System::from_name("joint", None).unwrap();
        let base = sys.generate(200, &mut rng(5)).unwrap();
        assert_eq!(stack_redundant(&base, 0, &mut rng(6)).unwrap(), base);
        let red = stack_redundant(&base, 3, &mut rng(6)).unwrap();
        assert_eq!((red.nx(), red.ny()), (4, 4));
        assert_eq!(red.x().column(0), base.x().column(0));

        let (one, t1) = stack_linear(&sys, 1, 200, Direction::XToY, &mut rng(7)).unwrap();
        assert_eq!(one, sys.generate(200, &mut rng(7)).unwrap());
        let (three, t3) = stack_linear(&sys, 3, 5000, Direction::XToY, &mut rng(8)).unwrap();
        assert!((t3 - 3.0 * t1).abs() < 1e-12);
        assert_eq!((three.nx(), three.ny()), (3, 3));
        let x0 = three.x().column(0).to_vec();
        let y1 = three.y().column(1).to_vec();
        assert!(lag1_corr(&x0, &y1).abs() < 3.0 / 5000f64.sqrt());
        assert!(matches!(System::from_name("lorenz", None), Err(Error::UnknownSystem(_))));
    }

    #[test]
    fn transforms() {
        assert_eq!(half_cube(0.0), 0.0);
        assert_eq!(half_cube(4.0), 8.0);
        assert_eq!(half_cube(-1.0), -1.0);
        let probes: Vec<f64> = (-400..=400).map(|i| i as f64 / 50.0).collect();
        for w in probes.windows(2) {
            assert!(half_cube(w[1]) > half_cube(w[0]));
            assert!(normal_cdf(w[1]) > normal_cdf(w[0]));
        }
        let pair = TimeSeriesPair::new(array![[-3.0], [0.0], [5.0]], array![[1.0], [-8.0], [2.0]]).unwrap();
        let c = transform_gauss_cdf(&pair);
        assert!(c.x().iter().chain(c.y().iter()).all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn text_round_trip_and_errors() {
        let pair = gen_joint_system(&JointSystemParams::default(), 50, &mut rng(9)).unwrap();
        let mut buf = Vec::new();
        pair.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# 1 1 50\n"));
        assert_eq!(text.lines().count(), 51);
        assert_eq!(TimeSeriesPair::read_text(buf.as_slice()).unwrap(), pair);
        assert!(TimeSeriesPair::read_text("# 1 1 2\n1 2\n3\n".as_bytes()).is_err());
        assert!(TimeSeriesPair::read_text("# 1 1 3\n1 2\n3 4\n".as_bytes()).is_err());
        assert!(TimeSeriesPair::read_text("1 2\n".as_bytes()).is_err());
        assert!(TimeSeriesPair::read_text("# 1 1 1\n1 abc\n".as_bytes()).is_err());
    }

    #[test]
    fn standardization() {
        let pair = gen_linear_gaussian(&LinearGaussianParams::default(), 1000, &mut rng(10)).unwrap();
        let s = pair.standardized();
        for col in s.x().columns().into_iter().chain(s.y().columns()) {
            let m = col.sum() / 1000.0;
            let v = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 1000.0;
            assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        }
    }
}
