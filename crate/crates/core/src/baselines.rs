//! Network-free reference estimators: exact Gaussian CMI from a covariance
//! matrix and the k-nearest-neighbour CMI estimator of Frenzel and Pompe.

use nalgebra::DMatrix;
use ndarray::{concatenate, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use crate::systems::{Direction, LinearGaussianParams, TeDataset};

/// Amplitude of the uniform jitter added when duplicate points collapse a
/// neighbour radius to zero.
pub const KNN_JITTER: f64 = 1e-10;

pub const DEFAULT_NEIGHBORS: usize = 5;

/// A joint Gaussian covariance with the coordinates of the `X`, `Y` and `Z`
/// blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBlocks {
    covariance: DMatrix<f64>,
    x: Vec<usize>,
    y: Vec<usize>,
    z: Vec<usize>,
}

impl GaussianBlocks {
    /// Fails unless the covariance is symmetric positive definite and the
    /// index sets are disjoint and cover every coordinate.
    pub fn new(covariance: DMatrix<f64>, x: Vec<usize>, y: Vec<usize>, z: Vec<usize>) -> Result<Self> {
        let m = covariance.nrows();
        if covariance.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: covariance.ncols(),
                context: "covariance columns",
            });
        }
        if x.is_empty() || y.is_empty() {
            return Err(Error::InvalidParameter("X and Y blocks must be nonempty".into()));
        }
        let mut seen = vec![false; m];
        for &i in x.iter().chain(&y).chain(&z) {
            if i >= m || seen[i] {
                return Err(Error::InvalidParameter(format!(
                    "block indices must be disjoint and below {m}, offending index {i}"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameter("block indices must cover every coordinate".into()));
        }
        let scale = covariance.amax().max(f64::MIN_POSITIVE);
        if (&covariance - covariance.transpose()).amax() > 1e-10 * scale {
            return Err(Error::InvalidParameter("covariance is not symmetric".into()));
        }
        if covariance.clone().cholesky().is_none() {
            return Err(Error::InvalidParameter("covariance is not positive definite".into()));
        }
        Ok(Self { covariance, x, y, z })
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    fn log_det(&self, blocks: &[&[usize]]) -> f64 {
        let idx: Vec<usize> = blocks.iter().flat_map(|b| b.iter().copied()).collect();
        if idx.is_empty() {
            return 0.0;
        }
        let sub = self.covariance.select_rows(&idx).select_columns(&idx);
        let chol = sub.cholesky().expect("principal submatrix of an SPD matrix");
        2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// `½ ln(det Σ_XZ det Σ_YZ / (det Σ_Z det Σ_XYZ))`.
pub fn gaussian_cmi(blocks: &GaussianBlocks) -> f64 {
    let (x, y, z) = (&blocks.x[..], &blocks.y[..], &blocks.z[..]);
    0.5 * (blocks.log_det(&[x, z]) + blocks.log_det(&[y, z]) - blocks.log_det(&[z]) - blocks.log_det(&[x, y, z]))
}

/// Gaussian CMI of the sample covariance of `[Y | X | Z]`.
pub fn gaussian_cmi_plugin(data: &TeDataset) -> Result<f64> {
    let n = data.len();
    if n < 2 {
        return Err(Error::SeriesTooShort { len: n, needed: 2 });
    }
    let joint = concatenate(Axis(1), &[data.y.view(), data.x.view(), data.z.view()])
        .map_err(|e| Error::Numeric(e.to_string()))?;
    let mean = joint.mean_axis(Axis(0)).expect("nonempty");
    let centered = &joint - &mean;
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let m = cov.nrows();
    let (ny, nx) = (data.y.ncols(), data.x.ncols());
    let blocks = GaussianBlocks::new(
        DMatrix::from_fn(m, m, |i, j| cov[[i, j]]),
        (ny..ny + nx).collect(),
        (0..ny).collect(),
        (ny + nx..m).collect(),
    )?;
    Ok(gaussian_cmi(&blocks))
}

/// Exact covariance of (target, source past, target past) for the stationary
/// bivariate VAR(1), with `k` source lags and `l` target lags.
pub fn linear_gaussian_blocks(
    p: &LinearGaussianParams,
    k: usize,
    l: usize,
    direction: Direction,
) -> Result<GaussianBlocks> {
    if k == 0 || l == 0 {
        return Err(Error::InvalidParameter("lags must be at least 1".into()));
    }
    let sigma = p.stationary_covariance()?;
    let a = p.transition();
    // state s_{t-i} for i = 0..=lags; Cov(s_{t-i}, s_{t-j}) = A^{j-i} Σ for j ≥ i
    let cov_states = |i: usize, j: usize| {
        if j >= i {
            a.pow((j - i) as u32) * sigma
        } else {
            (a.pow((i - j) as u32) * sigma).transpose()
        }
    };
    let (target, source) = match direction {
        Direction::YToX => (0, 1),
        Direction::XToY => (1, 0),
    };
    // coordinates as (lag, channel)
    let mut coords = vec![(0, target)];
    coords.extend((1..=k).map(|i| (i, source)));
    coords.extend((1..=l).map(|i| (i, target)));
    let m = coords.len();
    let cov = DMatrix::from_fn(m, m, |r, c| {
        let (li, ci) = coords[r];
        let (lj, cj) = coords[c];
        cov_states(li, lj)[(ci, cj)]
    });
    let cov = (&cov + cov.transpose()) * 0.5;
    GaussianBlocks::new(cov, (1..=k).collect(), vec![0], (k + 1..m).collect())
}

/// `ψ(k) - mean_i[ψ(n_xz,i + 1) + ψ(n_yz,i + 1) - ψ(n_z,i + 1)]`.
pub fn cmi_from_counts(k: usize, counts: &[[usize; 3]]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::Empty("neighbour counts"));
    }
    let psi = |n: usize| digamma(n as f64 + 1.0);
    let mean = counts.iter().map(|&[xz, yz, z]| psi(xz) + psi(yz) - psi(z)).sum::<f64>() / counts.len() as f64;
    Ok(digamma(k as f64) - mean)
}

fn block_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (u, v)| m.max((u - v).abs()))
}

/// Per-point `[n_xz, n_yz, n_z]` under the max norm, or `None` if some
/// k-th-neighbour radius is zero.
fn neighbor_counts(
    y: ArrayView2<f64>,
    x: ArrayView2<f64>,
    z: ArrayView2<f64>,
    k: usize,
) -> Option<Vec<[usize; 3]>> {
    let n = y.nrows();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d = Vec::with_capacity(n - 1);
            for j in (0..n).filter(|&j| j != i) {
                d.push([
                    block_dist(x.row(i), x.row(j)),
                    block_dist(y.row(i), y.row(j)),
                    block_dist(z.row(i), z.row(j)),
                ]);
            }
            let mut joint: Vec<f64> = d.iter().map(|[a, b, c]| a.max(*b).max(*c)).collect();
            let (_, eps, _) = joint.select_nth_unstable_by(k - 1, f64::total_cmp);
            let eps = *eps;
            if eps <= 0.0 {
                return None;
            }
            let mut c = [0usize; 3];
            for [dx, dy, dz] in &d {
                if dx.max(*dz) < eps {
                    c[0] += 1;
                }
                if dy.max(*dz) < eps {
                    c[1] += 1;
                }
                if *dz < eps {
                    c[2] += 1;
                }
            }
            Some(c)
        })
        .collect()
}

/// Frenzel–Pompe estimate of `I(Y; X | Z)` in nats.
pub fn knn_cmi(data: &TeDataset, k_neighbors: usize) -> Result<f64> {
    let n = data.len();
    if k_neighbors == 0 {
        return Err(Error::InvalidParameter("need at least one neighbour".into()));
    }
    if n <= k_neighbors {
        return Err(Error::SeriesTooShort { len: n, needed: k_neighbors + 1 });
    }
    if let Some(counts) = neighbor_counts(data.y.view(), data.x.view(), data.z.view(), k_neighbors) {
        return cmi_from_counts(k_neighbors, &counts);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a69_7474_6572);
    let mut jitter = |a: &Array2<f64>| a.mapv(|v| v + KNN_JITTER * rng.random_range(-1.0..1.0));
    let (y, x, z) = (jitter(&data.y), jitter(&data.x), jitter(&data.z));
    let counts = neighbor_counts(y.view(), x.view(), z.view(), k_neighbors)
        .ok_or_else(|| Error::Numeric("zero neighbour radius persists after jitter".into()))?;
    cmi_from_counts(k_neighbors, &counts)
}
