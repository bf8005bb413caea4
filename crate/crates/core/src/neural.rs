//! Feed-forward noise-prediction network with reverse-mode gradients and Adam.
//!
//! Input row layout: `[y | x | z | mask(3) | t | sin(2πf t)… | cos(2πf t)…]`.
//! Blocks whose mask entry is `-1` are zeroed before the first layer.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "tende-score-network";
pub const CHECKPOINT_VERSION: u32 = 1;
const MASK_WIDTH: usize = 3;

/// Widths of the target, source-past and target-past blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub y_dim: usize,
    pub x_dim: usize,
    pub z_dim: usize,
}

impl BlockLayout {
    pub fn new(y_dim: usize, x_dim: usize, z_dim: usize) -> Result<Self> {
        if y_dim == 0 {
            return Err(Error::InvalidParameter("target block must be nonempty".into()));
        }
        Ok(Self { y_dim, x_dim, z_dim })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    /// Number of Fourier frequencies; the embedding has twice as many entries.
    pub n_frequencies: usize,
    pub min_frequency: f64,
    pub max_frequency: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64, 64],
            n_frequencies: 8,
            min_frequency: 0.1,
            max_frequency: 8.0,
        }
    }
}

impl NetworkConfig {
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n_frequencies;
        if n == 0 {
            return Vec::new();
        }
        if n == 1 {
            return vec![self.min_frequency];
        }
        let (lo, hi) = (self.min_frequency.ln(), self.max_frequency.ln());
        (0..n)
            .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

/// `[sin(2π f_i t)…, cos(2π f_i t)…]`.
pub fn time_embed(t: f64, frequencies: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * frequencies.len()];
    write_time_embed(t, frequencies, &mut out);
    out
}

fn write_time_embed(t: f64, frequencies: &[f64], out: &mut [f64]) {
    let n = frequencies.len();
    for (i, f) in frequencies.iter().enumerate() {
        let (s, c) = (std::f64::consts::TAU * f * t).sin_cos();
        out[i] = s;
        out[n + i] = c;
    }
}

/// Largest relative gap between the backward pass and central differences
/// (step `1e-4`) of `Σ output²` over the probed parameter indices.
pub fn gradient_check(net: &mut ScoreNetwork, input: &Array2<f64>, probes: &[usize]) -> f64 {
    let h = 1e-4;
    let energy = |net: &ScoreNetwork| net.forward_encoded(input).mapv(|o| o * o).sum();
    let tape = net.forward_recorded(input.clone());
    let adj = tape.output.mapv(|o| 2.0 * o);
    let grads = net.backward(&tape, adj.view());
    let mut worst: f64 = 0.0;
    for &idx in probes {
        let p0 = net.param(idx);
        net.set_param(idx, p0 + h);
        let up = energy(net);
        net.set_param(idx, p0 - h);
        let down = energy(net);
        net.set_param(idx, p0);
        let fd = (up - down) / (2.0 * h);
        let an = grads.get(idx);
        worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
    }
    worst
}

pub fn validate_mask(mask: [i8; 3]) -> Result<()> {
    if mask[0] != 1 || mask.iter().any(|m| !(-1..=1).contains(m)) {
        return Err(Error::InvalidMask(mask));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `in × out`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: Array2::zeros((fan_in, fan_out)),
            b: Array1::zeros(fan_out),
        }
    }

    fn len(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNetwork {
    layout: BlockLayout,
    frequencies: Vec<f64>,
    layers: Vec<Dense>,
}

/// Intermediates recorded by [`ScoreNetwork::forward_recorded`].
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input to every layer (the first is the encoded batch).
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

/// Parameter gradients, shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::len).sum()
    }

    pub fn get(&self, index: usize) -> f64 {
        let (l, i) = locate(&self.layers, index);
        flat_get(&self.layers[l], i)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|d| d.w.iter().chain(d.b.iter()).all(|g| g.is_finite()))
    }
}

#[inline]
fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

#[inline]
fn silu_grad(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

impl ScoreNetwork {
    /// Hidden layers get `N(0, 1/fan_in)` weights; the output layer starts at zero.
    pub fn new<R: Rng + ?Sized>(layout: BlockLayout, cfg: &NetworkConfig, rng: &mut R) -> Result<Self> {
        if cfg.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidParameter("hidden widths must be positive".into()));
        }
        if cfg.n_frequencies > 0 && !(cfg.min_frequency > 0.0 && cfg.max_frequency >= cfg.min_frequency) {
            return Err(Error::InvalidParameter("bad time-embedding frequency range".into()));
        }
        let frequencies = cfg.frequencies();
        let in_dim = input_dim(&layout, frequencies.len());
        let mut dims = vec![in_dim];
        dims.extend(&cfg.hidden);
        dims.push(layout.y_dim);

        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, pair) in dims.windows(2).enumerate() {
            let mut layer = Dense::zeros(pair[0], pair[1]);
            if i + 2 < dims.len() {
                let scale = 1.0 / (pair[0] as f64).sqrt();
                layer
                    .w
                    .mapv_inplace(|_| {
                        let e: f64 = StandardNormal.sample(rng);
                        scale * e
                    });
            }
            layers.push(layer);
        }
        Ok(Self {
            layout,
            frequencies,
            layers,
        })
    }

    pub fn layout(&self) -> BlockLayout {
        self.layout
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.b.len()));
        dims
    }

    pub fn input_dim(&self) -> usize {
        input_dim(&self.layout, self.frequencies.len())
    }

    pub fn output_dim(&self) -> usize {
        self.layout.y_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::len).sum()
    }

    /// Flat parameter access, ordered layer by layer, weights (row-major) then biases.
    pub fn param(&self, index: usize) -> f64 {
        let (l, i) = locate(&self.layers, index);
        flat_get(&self.layers[l], i)
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let (l, i) = locate(&self.layers, index);
        let layer = &mut self.layers[l];
        let nw = layer.w.len();
        if i < nw {
            let cols = layer.w.ncols();
            layer.w[[i / cols, i % cols]] = value;
        } else {
            layer.b[i - nw] = value;
        }
    }

    pub fn params_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|d| d.w.iter().chain(d.b.iter()).all(|p| p.is_finite()))
    }

    /// Builds the input matrix for a batch. `masks[i]` applies to row `i`.
    pub fn encode_batch(
        &self,
        y: ArrayView2<f64>,
        x: ArrayView2<f64>,
        z: ArrayView2<f64>,
        t: &[f64],
        masks: &[[i8; 3]],
    ) -> Result<Array2<f64>> {
        let n = y.nrows();
        let BlockLayout { y_dim, x_dim, z_dim } = self.layout;
        check_dim(y.ncols(), y_dim, "target block width")?;
        check_dim(x.ncols(), x_dim, "source block width")?;
        check_dim(z.ncols(), z_dim, "conditioning block width")?;
        check_dim(x.nrows(), n, "source block rows")?;
        check_dim(z.nrows(), n, "conditioning block rows")?;
        check_dim(t.len(), n, "time values")?;
        check_dim(masks.len(), n, "masks")?;

        let mut input = Array2::zeros((n, self.input_dim()));
        let xo = y_dim;
        let zo = xo + x_dim;
        let mo = zo + z_dim;
        let to = mo + MASK_WIDTH;
        for (i, mut row) in input.axis_iter_mut(Axis(0)).enumerate() {
            let mask = masks[i];
            validate_mask(mask)?;
            let row = row.as_slice_mut().expect("contiguous row");
            for j in 0..y_dim {
                row[j] = y[[i, j]];
            }
            if mask[1] != -1 {
                for j in 0..x_dim {
                    row[xo + j] = x[[i, j]];
                }
            }
            if mask[2] != -1 {
                for j in 0..z_dim {
                    row[zo + j] = z[[i, j]];
                }
            }
            for (j, m) in mask.iter().enumerate() {
                row[mo + j] = f64::from(*m);
            }
            row[to] = t[i];
            write_time_embed(t[i], &self.frequencies, &mut row[to + 1..]);
        }
        Ok(input)
    }

    /// Forward pass without recording intermediates.
    pub fn forward_encoded(&self, input: &Array2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut a = self.affine(0, input);
        if last > 0 {
            a.mapv_inplace(silu);
        }
        for l in 1..=last {
            a = self.affine(l, &a);
            if l < last {
                a.mapv_inplace(silu);
            }
        }
        a
    }

    pub fn forward_batch(
        &self,
        y: ArrayView2<f64>,
        x: ArrayView2<f64>,
        z: ArrayView2<f64>,
        t: &[f64],
        masks: &[[i8; 3]],
    ) -> Result<Array2<f64>> {
        let input = self.encode_batch(y, x, z, t, masks)?;
        Ok(self.forward_encoded(&input))
    }

    /// Noise prediction for a single point.
    pub fn forward(&self, y: &[f64], x: &[f64], z: &[f64], t: f64, mask: [i8; 3]) -> Result<Vec<f64>> {
        let view = |v: &[f64]| ArrayView2::from_shape((1, v.len()), v).map(|a| a.to_owned());
        let (y, x, z) = (
            view(y).expect("row view"),
            view(x).expect("row view"),
            view(z).expect("row view"),
        );
        let out = self.forward_batch(y.view(), x.view(), z.view(), &[t], &[mask])?;
        Ok(out.into_raw_vec_and_offset().0)
    }

    /// Forward pass that keeps what [`ScoreNetwork::backward`] needs.
    pub fn forward_recorded(&self, input: Array2<f64>) -> Tape {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        inputs.push(input);
        for l in 0..last {
            let z = self.affine(l, &inputs[l]);
            inputs.push(z.mapv(silu));
            pre.push(z);
        }
        let output = self.affine(last, &inputs[last]);
        Tape { inputs, pre, output }
    }

    /// Reverse-mode gradients of a scalar loss whose adjoint with respect to
    /// the network output is `d_out`.
    pub fn backward(&self, tape: &Tape, d_out: ArrayView2<f64>) -> Gradients {
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut delta = d_out.to_owned();
        for l in (0..self.layers.len()).rev() {
            let a = &tape.inputs[l];
            let gw = a.t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            grads.push(Dense { w: gw, b: gb });
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].w.t());
                Zip::from(&mut back)
                    .and(&tape.pre[l - 1])
                    .for_each(|d, &z| *d *= silu_grad(z));
                delta = back;
            }
        }
        grads.reverse();
        Gradients { layers: grads }
    }

    fn affine(&self, l: usize, a: &Array2<f64>) -> Array2<f64> {
        let layer = &self.layers[l];
        let mut z = a.dot(&layer.w);
        z += &layer.b;
        z
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<checkpoint>", e);
        writeln!(w, "{CHECKPOINT_MAGIC}").map_err(io)?;
        writeln!(w, "format-version {CHECKPOINT_VERSION}").map_err(io)?;
        let BlockLayout { y_dim, x_dim, z_dim } = self.layout;
        writeln!(w, "layout {y_dim} {x_dim} {z_dim}").map_err(io)?;
        writeln!(w, "frequencies {}{}", self.frequencies.len(), join_exp(self.frequencies.iter())).map_err(io)?;
        writeln!(w, "layers {}", self.layers.len()).map_err(io)?;
        for layer in &self.layers {
            writeln!(w, "layer {} {}", layer.w.nrows(), layer.w.ncols()).map_err(io)?;
            for row in layer.w.rows() {
                writeln!(w, "w{}", join_exp(row.iter())).map_err(io)?;
            }
            writeln!(w, "b{}", join_exp(layer.b.iter())).map_err(io)?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
            match lines.next() {
                Some((i, Ok(line))) => Ok((i + 1, line.split_whitespace().map(str::to_owned).collect())),
                Some((_, Err(e))) => Err(Error::io("<checkpoint>", e)),
                None => Err(Error::parse("checkpoint", format!("unexpected end of file, wanted {what}"))),
            }
        };
        let bad = |line: usize, msg: &str| Error::parse(format!("checkpoint line {line}"), msg);

        let (ln, magic) = next("magic")?;
        if magic.first().map(String::as_str) != Some(CHECKPOINT_MAGIC) {
            return Err(bad(ln, "not a score-network checkpoint"));
        }
        let (ln, version) = next("format version")?;
        let v: u32 = field(&version, 1, "format-version").ok_or_else(|| bad(ln, "bad format version"))?;
        if v != CHECKPOINT_VERSION {
            return Err(bad(ln, &format!("unsupported format version {v}")));
        }
        let (ln, lay) = next("layout")?;
        let dims: Vec<usize> = (1..=3)
            .map(|i| field(&lay, i, "layout"))
            .collect::<Option<_>>()
            .ok_or_else(|| bad(ln, "bad layout"))?;
        let layout = BlockLayout::new(dims[0], dims[1], dims[2])?;
        let (ln, freq) = next("frequencies")?;
        let nf: usize = field(&freq, 1, "frequencies").ok_or_else(|| bad(ln, "bad frequency count"))?;
        let frequencies = parse_floats(&freq[2..], nf).ok_or_else(|| bad(ln, "bad frequencies"))?;
        let (ln, nl) = next("layer count")?;
        let nlayers: usize = field(&nl, 1, "layers").ok_or_else(|| bad(ln, "bad layer count"))?;
        if nlayers == 0 {
            return Err(bad(ln, "network needs at least one layer"));
        }
        let mut layers = Vec::with_capacity(nlayers);
        for _ in 0..nlayers {
            let (ln, head) = next("layer header")?;
            let (fi, fo): (usize, usize) = match (field(&head, 1, "layer"), field(&head, 2, "layer")) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(bad(ln, "bad layer header")),
            };
            let mut layer = Dense::zeros(fi, fo);
            for i in 0..fi {
                let (ln, row) = next("weight row")?;
                if row.first().map(String::as_str) != Some("w") {
                    return Err(bad(ln, "expected weight row"));
                }
                let vals = parse_floats(&row[1..], fo).ok_or_else(|| bad(ln, "bad weight row"))?;
                layer.w.row_mut(i).assign(&Array1::from(vals));
            }
            let (ln, brow) = next("bias row")?;
            if brow.first().map(String::as_str) != Some("b") {
                return Err(bad(ln, "expected bias row"));
            }
            layer.b = Array1::from(parse_floats(&brow[1..], fo).ok_or_else(|| bad(ln, "bad bias row"))?);
            layers.push(layer);
        }
        let net = Self {
            layout,
            frequencies,
            layers,
        };
        let dims = net.layer_dims();
        let chained = net.layers.iter().zip(dims.windows(2)).all(|(l, d)| l.w.nrows() == d[0]);
        if !chained || net.output_dim() != dims[dims.len() - 1] {
            return Err(Error::parse("checkpoint", "layer shapes do not chain"));
        }
        Ok(net)
    }
}

fn field<T: std::str::FromStr>(tokens: &[String], i: usize, key: &str) -> Option<T> {
    if tokens.first().map(String::as_str) != Some(key) {
        return None;
    }
    tokens.get(i)?.parse().ok()
}

fn parse_floats(tokens: &[String], n: usize) -> Option<Vec<f64>> {
    if tokens.len() != n {
        return None;
    }
    tokens.iter().map(|t| t.parse().ok()).collect()
}

fn join_exp<'a>(vals: impl Iterator<Item = &'a f64>) -> String {
    let mut s = String::new();
    for v in vals {
        s.push(' ');
        s.push_str(&format!("{v:e}"));
    }
    s
}

fn input_dim(layout: &BlockLayout, n_freq: usize) -> usize {
    layout.y_dim + layout.x_dim + layout.z_dim + MASK_WIDTH + 1 + 2 * n_freq
}

fn check_dim(got: usize, expected: usize, context: &'static str) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            got,
            context,
        })
    }
}

fn locate(layers: &[Dense], mut index: usize) -> (usize, usize) {
    for (l, layer) in layers.iter().enumerate() {
        if index < layer.len() {
            return (l, index);
        }
        index -= layer.len();
    }
    panic!("parameter index out of range");
}

fn flat_get(layer: &Dense, i: usize) -> f64 {
    let nw = layer.w.len();
    if i < nw {
        let cols = layer.w.ncols();
        layer.w[[i / cols, i % cols]]
    } else {
        layer.b[i - nw]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Dense>,
    v: Vec<Dense>,
}

impl AdamState {
    pub fn new(net: &ScoreNetwork, config: AdamConfig) -> Self {
        let zeros = || {
            net.layers
                .iter()
                .map(|l| Dense::zeros(l.w.nrows(), l.w.ncols()))
                .collect()
        };
        Self {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update. Fails without touching the network if
    /// the gradients are not finite.
    pub fn step(&mut self, net: &mut ScoreNetwork, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: net.layers.len(),
                got: grads.layers.len(),
                context: "gradient layers",
            });
        }
        for (p, g) in net.layers.iter().zip(&grads.layers) {
            if p.w.dim() != g.w.dim() || p.b.dim() != g.b.dim() {
                return Err(Error::InvalidParameter("gradient shape mismatch".into()));
            }
        }
        if !grads.is_finite() {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for ((p, g), (m, v)) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            Zip::from(&mut p.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .and(&g.w)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut p.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .and(&g.b)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        if !net.params_finite() {
            return Err(Error::Numeric("parameters became non-finite".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_net(seed: u64) -> ScoreNetwork {
        let cfg = NetworkConfig {
            hidden: vec![8, 6],
            n_frequencies: 3,
            ..NetworkConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScoreNetwork::new(BlockLayout::new(2, 3, 1).unwrap(), &cfg, &mut rng).unwrap()
    }

    fn randomize_all(net: &mut ScoreNetwork, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..net.num_params() {
            let v: f64 = StandardNormal.sample(&mut rng);
            net.set_param(i, 0.5 * v);
        }
    }

    fn random_batch(n: usize, seed: u64) -> (Array2<f64>, Array2<f64>, Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = |c: usize| Array2::from_shape_fn((n, c), |_| StandardNormal.sample(&mut rng));
        let (y, x, z) = (m(2), m(3), m(1));
        let t = (0..n).map(|i| 0.05 + 0.9 * i as f64 / n as f64).collect();
        (y, x, z, t)
    }

    #[test]
    fn zero_output_layer_gives_zero_prediction() {
        let net = small_net(1);
        let out = net
            .forward(&[1.0, 2.0], &[0.1, -0.2, 3.0], &[4.0], 0.3, [1, 0, 0])
            .unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn masked_block_is_ignored() {
        let mut net = small_net(2);
        randomize_all(&mut net, 3);
        let a = net.forward(&[1.0, 2.0], &[0.1, -0.2, 3.0], &[4.0], 0.3, [1, -1, 0]).unwrap();
        let b = net.forward(&[1.0, 2.0], &[9.0, 7.0, -5.0], &[4.0], 0.3, [1, -1, 0]).unwrap();
        assert_eq!(a, b);
        let c = net.forward(&[1.0, 2.0], &[9.0, 7.0, -5.0], &[4.0], 0.3, [1, 0, 0]).unwrap();
        assert_ne!(a, c);
        let d = net.forward(&[1.0, 2.0], &[9.0, 7.0, -5.0], &[-8.0], 0.3, [1, -1, -1]).unwrap();
        let e = net.forward(&[1.0, 2.0], &[0.0, 0.0, 1.0], &[0.5], 0.3, [1, -1, -1]).unwrap();
        assert_eq!(d, e);
    }

    #[test]
    fn rejects_bad_inputs() {
        let net = small_net(1);
        assert!(matches!(
            net.forward(&[1.0], &[0.0; 3], &[0.0], 0.3, [1, 0, 0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            net.forward(&[1.0, 2.0], &[0.0; 3], &[0.0], 0.3, [0, 0, 0]),
            Err(Error::InvalidMask(_))
        ));
        assert!(net.forward(&[1.0, 2.0], &[0.0; 3], &[0.0], 0.3, [1, 2, 0]).is_err());
    }

    #[test]
    fn time_embedding_properties() {
        let wide = NetworkConfig { n_frequencies: 32, max_frequency: 32.0, ..NetworkConfig::default() };
        for f in [NetworkConfig::default().frequencies(), wide.frequencies()] {
            let e0 = time_embed(0.0, &f);
            assert_eq!(e0.len(), 2 * f.len());
            assert!(e0[..f.len()].iter().all(|&s| s == 0.0));
            assert!(e0[f.len()..].iter().all(|&c| c == 1.0));

            let embeds: Vec<Vec<f64>> = (0..1000)
                .map(|i| time_embed(1e-5 + (1.0 - 1e-5) * i as f64 / 999.0, &f))
                .collect();
            for i in 0..embeds.len() {
                for j in i + 1..embeds.len() {
                    let d: f64 = embeds[i].iter().zip(&embeds[j]).map(|(a, b)| (a - b).powi(2)).sum();
                    assert!(d > 1e-12, "collision between grid points {i} and {j}");
                }
            }
        }
        assert_eq!(time_embed(0.5, &wide.frequencies()).len(), 64);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut net = small_net(4);
        randomize_all(&mut net, 5);
        let (y, x, z, t) = random_batch(5, 6);
        let masks = [[1, 0, 0], [1, -1, 0], [1, -1, -1], [1, 0, 0], [1, -1, 0]];
        let input = net.encode_batch(y.view(), x.view(), z.view(), &t, &masks).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // probe every layer: the output layer and both hidden layers
        let mut probes: Vec<usize> = (0..50).map(|_| rng.random_range(0..net.num_params())).collect();
        probes.extend([0, net.num_params() - 1]);
        let worst = gradient_check(&mut net, &input, &probes);
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn zero_network_has_zero_bias_gradient_and_gradients_are_linear() {
        let net = small_net(8);
        let (y, x, z, t) = random_batch(4, 9);
        let masks = [[1, 0, 0]; 4];
        let input = net.encode_batch(y.view(), x.view(), z.view(), &t, &masks).unwrap();
        let tape = net.forward_recorded(input);
        let g = net.backward(&tape, tape.output.mapv(|o| 2.0 * o).view());
        assert!(g.layers.last().unwrap().b.iter().all(|&v| v == 0.0));

        let mut net = net;
        randomize_all(&mut net, 10);
        let input = net.encode_batch(y.view(), x.view(), z.view(), &t, &masks).unwrap();
        let tape = net.forward_recorded(input);
        let adj = tape.output.mapv(|o| 2.0 * o);
        let g1 = net.backward(&tape, adj.view());
        let g2 = net.backward(&tape, (&adj * 2.0).view());
        for i in 0..g1.num_params() {
            assert!((g2.get(i) - 2.0 * g1.get(i)).abs() <= 1e-12 * g1.get(i).abs().max(1.0));
        }
    }

    #[test]
    fn adam_examples() {
        let mut net = small_net(11);
        randomize_all(&mut net, 12);
        let before = net.clone();
        let mut adam = AdamState::new(&net, AdamConfig::default());
        let zero = Gradients {
            layers: net.layers.iter().map(|l| Dense::zeros(l.w.nrows(), l.w.ncols())).collect(),
        };
        adam.step(&mut net, &zero).unwrap();
        assert_eq!(net, before);

        let mut constant = zero.clone();
        for l in &mut constant.layers {
            l.w.fill(0.37);
            l.b.fill(-2.0);
        }
        let mut adam = AdamState::new(&net, AdamConfig::default());
        adam.step(&mut net, &constant).unwrap();
        assert_eq!(adam.step_count(), 1);
        for i in 0..net.num_params() {
            let delta = (net.param(i) - before.param(i)).abs();
            assert!((delta - 1e-3).abs() < 1e-7, "step {delta}");
        }

        let mut bad = zero;
        bad.layers[0].b[0] = f64::NAN;
        assert!(matches!(adam.step(&mut net, &bad), Err(Error::Numeric(_))));
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut net = small_net(13);
        randomize_all(&mut net, 14);
        net.set_param(0, 1e-300);
        net.set_param(1, -0.1 + 1e-17);
        let mut buf = Vec::new();
        net.save(&mut buf).unwrap();
        let back = ScoreNetwork::load(buf.as_slice()).unwrap();
        assert_eq!(back, net);

        let text = String::from_utf8(buf).unwrap();
        let wrong = text.replacen("format-version 1", "format-version 9", 1);
        assert!(ScoreNetwork::load(wrong.as_bytes()).is_err());
        let truncated: String = text.lines().take(8).collect::<Vec<_>>().join("\n");
        assert!(ScoreNetwork::load(truncated.as_bytes()).is_err());
    }
}
