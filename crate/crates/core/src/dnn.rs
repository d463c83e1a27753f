//! Noisy feed-forward networks `T_l = f_l(T_{l-1}) + Z_l` and the plug-in
//! estimators of `I(X; T_l)` and `I(Y; T_l)`.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::entropy::{gaussian_entropy_analytic, kde_entropy, knn_kl_entropy, plugin_entropy, EstimateReport, McBudget};
use crate::error::{invalid, Error, Result};
use crate::math::{ln, sqrt};
use crate::mixture::SampleMatrix;
use crate::par::map_indexed;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(x),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "tanh" => Activation::Tanh,
            "relu" => Activation::Relu,
            "identity" | "linear" => Activation::Identity,
            _ => return None,
        })
    }
}

/// Affine map followed by an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(invalid!("layer dimensions must be positive"));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::DimensionMismatch { expected: in_dim * out_dim, found: weights.len() });
        }
        if bias.len() != out_dim {
            return Err(Error::DimensionMismatch { expected: out_dim, found: bias.len() });
        }
        if weights.iter().chain(&bias).any(|w| !w.is_finite()) {
            return Err(invalid!("layer parameters must be finite"));
        }
        Ok(Layer { in_dim, out_dim, weights, bias, activation })
    }

    /// `d x d` identity map with zero bias.
    pub fn identity(d: usize) -> Self {
        let mut w = alloc::vec![0.0; d * d];
        (0..d).for_each(|i| w[i * d + i] = 1.0);
        Layer { in_dim: d, out_dim: d, weights: w, bias: alloc::vec![0.0; d], activation: Activation::Identity }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn apply_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.in_dim).zip(&self.bias).map(|(row, &b)| {
            let s: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            self.activation.apply(s + b)
        }));
    }
}

/// Chain of layers sharing one noise width.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyNetwork {
    layers: Vec<Layer>,
    noise_sigma: f64,
}

impl NoisyNetwork {
    pub fn new(layers: Vec<Layer>, noise_sigma: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid!("network needs at least one layer"));
        }
        if !(noise_sigma > 0.0 && noise_sigma.is_finite()) {
            return Err(invalid!("noise sigma must be positive, got {noise_sigma}"));
        }
        for w in layers.windows(2) {
            if w[0].out_dim != w[1].in_dim {
                return Err(Error::DimensionMismatch { expected: w[0].out_dim, found: w[1].in_dim });
            }
        }
        Ok(NoisyNetwork { layers, noise_sigma })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    fn check_layer(&self, layer: usize) -> Result<()> {
        if layer == 0 || layer > self.layers.len() {
            return Err(invalid!("layer must be in 1..={}, got {layer}", self.layers.len()));
        }
        Ok(())
    }

    fn forward_stream(&self, x: &[f64], layer: usize, stream: Stream, out: &mut Vec<f64>) {
        let mut t: Vec<f64> = x.to_vec();
        let mut noise = Vec::new();
        for l in 1..layer {
            self.layers[l - 1].apply_into(&t, out);
            noise.resize(out.len(), 0.0);
            stream.derive(l as u64).rng().fill_normal(&mut noise);
            for (o, z) in out.iter_mut().zip(&noise) {
                *o += self.noise_sigma * z;
            }
            core::mem::swap(&mut t, out);
        }
        self.layers[layer - 1].apply_into(&t, out);
    }
}

/// `S_l = f_l(T_{l-1})`: noise is injected after layers `1..l-1` but not
/// after layer `l`.
pub fn forward_pre_noise(net: &NoisyNetwork, x: &[f64], layer: usize, seed: u64) -> Result<Vec<f64>> {
    net.check_layer(layer)?;
    if x.len() != net.input_dim() {
        return Err(Error::DimensionMismatch { expected: net.input_dim(), found: x.len() });
    }
    let mut out = Vec::new();
    net.forward_stream(x, layer, Stream::new(seed), &mut out);
    Ok(out)
}

/// Features with labels `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    d: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<f64>, d: usize, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if d == 0 || labels.is_empty() {
            return Err(invalid!("dataset needs d >= 1 and at least one row"));
        }
        if features.len() != labels.len() * d {
            return Err(Error::DimensionMismatch { expected: labels.len() * d, found: features.len() });
        }
        if n_classes == 0 {
            return Err(invalid!("label set must be nonempty"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(invalid!("label {bad} outside 0..{n_classes}"));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(invalid!("features must be finite"));
        }
        Ok(LabeledDataset { d, features, labels, n_classes })
    }

    /// Labels inferred as `0..=max`.
    pub fn from_labels(features: Vec<f64>, d: usize, labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().copied().max().map_or(0, |m| m + 1);
        Self::new(features, d, labels, k)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }
}

fn check_data(net: &NoisyNetwork, data: &LabeledDataset) -> Result<()> {
    if data.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch { expected: net.input_dim(), found: data.dim() });
    }
    Ok(())
}

/// One pre-noise output per dataset row, each with its own noise stream.
pub fn sample_unconditional(net: &NoisyNetwork, data: &LabeledDataset, layer: usize, seed: u64) -> Result<SampleMatrix> {
    net.check_layer(layer)?;
    check_data(net, data)?;
    let root = Stream::new(seed);
    let rows: Vec<Vec<f64>> = map_indexed(data.n(), Vec::new, |out, i| {
        net.forward_stream(data.row(i), layer, root.derive(i as u64), out);
        out.clone()
    });
    SampleMatrix::new(rows.concat(), net.layers[layer - 1].out_dim, seed)
}

/// `n_cond` pre-noise outputs for one input, fresh noise on every pass.
pub fn sample_conditional(net: &NoisyNetwork, x: &[f64], layer: usize, n_cond: usize, seed: u64) -> Result<SampleMatrix> {
    net.check_layer(layer)?;
    if layer < 2 {
        return Err(invalid!("conditional sampling needs layer >= 2; layer 1 is deterministic given x"));
    }
    if x.len() != net.input_dim() {
        return Err(Error::DimensionMismatch { expected: net.input_dim(), found: x.len() });
    }
    if n_cond == 0 {
        return Err(invalid!("n_cond must be at least 1"));
    }
    let root = Stream::new(seed);
    let mut out = Vec::new();
    let mut rows = Vec::with_capacity(n_cond * net.layers[layer - 1].out_dim);
    for j in 0..n_cond {
        net.forward_stream(x, layer, root.derive(j as u64), &mut out);
        rows.extend_from_slice(&out);
    }
    SampleMatrix::new(rows, net.layers[layer - 1].out_dim, seed)
}

/// Differential-entropy estimator used inside the MI estimators. The
/// plug-in is the reference choice; the others exist for comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HEstimator {
    Plugin(McBudget),
    Knn,
    /// Gaussian KDE of the noisy outputs `S + Z` with this bandwidth.
    Kde(f64),
}

impl HEstimator {
    fn estimate(&self, s: &SampleMatrix, sigma: f64, seed: u64) -> Result<EstimateReport> {
        match self {
            HEstimator::Plugin(b) => plugin_entropy(s, sigma, b, seed),
            HEstimator::Knn | HEstimator::Kde(_) => {
                // baselines see noisy observations T = S + Z
                let root = Stream::new(seed);
                let mut rows = s.data().to_vec();
                for (i, r) in rows.chunks_exact_mut(s.dim()).enumerate() {
                    let mut rng = root.derive(i as u64).rng();
                    r.iter_mut().for_each(|v| *v += sigma * rng.normal());
                }
                let t = SampleMatrix::new(rows, s.dim(), seed)?;
                match self {
                    HEstimator::Knn => knn_kl_entropy(&t),
                    HEstimator::Kde(h) => kde_entropy(&t, *h),
                    HEstimator::Plugin(_) => unreachable!(),
                }
            }
        }
    }
}

fn sub_seed(seed: u64, label: u64) -> u64 {
    Stream::new(seed).derive(label).rng().next_u64()
}

/// Options for [`mi_input_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiOptions {
    pub estimator: HEstimator,
    /// Conditional samples per input; `None` uses `n`.
    pub n_cond: Option<usize>,
}

/// `I(X; T_l)` estimate `h(S^n) - (1/n) sum_i h(S^n(X_i))` with the plug-in
/// estimator and `n_cond = n`.
pub fn mi_input(net: &NoisyNetwork, data: &LabeledDataset, layer: usize, budget: &McBudget, seed: u64) -> Result<EstimateReport> {
    mi_input_with(net, data, layer, &MiOptions { estimator: HEstimator::Plugin(*budget), n_cond: None }, seed)
}

/// [`mi_input`] with a chosen entropy estimator and conditional sample size.
///
/// At layer 1 the subtracted term is `h(Z)` exactly. The error bar is
/// `sqrt(se_u^2 + sum_i se_i^2 / n^2)`, a heuristic that treats the terms
/// as independent.
pub fn mi_input_with(net: &NoisyNetwork, data: &LabeledDataset, layer: usize, opts: &MiOptions, seed: u64) -> Result<EstimateReport> {
    let sigma = net.noise_sigma;
    let s = sample_unconditional(net, data, layer, sub_seed(seed, 0))?;
    let hu = opts.estimator.estimate(&s, sigma, sub_seed(seed, 1))?;
    let n = data.n();
    let (cond, cond_se) = if layer == 1 {
        (gaussian_entropy_analytic(s.dim(), sigma)?, 0.0)
    } else {
        let n_cond = opts.n_cond.unwrap_or(n);
        let cond_root = Stream::new(sub_seed(seed, 2));
        let parts: Vec<Result<EstimateReport>> = map_indexed(n, || (), |_, i| {
            let sample_seed = cond_root.derive(2 * i as u64).rng().next_u64();
            let est_seed = cond_root.derive(2 * i as u64 + 1).rng().next_u64();
            let si = sample_conditional(net, data.row(i), layer, n_cond, sample_seed)?;
            opts.estimator.estimate(&si, sigma, est_seed)
        });
        let parts: Vec<EstimateReport> = parts.into_iter().collect::<Result<_>>()?;
        let vals: Vec<f64> = parts.iter().map(|r| r.value).collect();
        let ses: Vec<f64> = parts.iter().map(|r| r.std_error * r.std_error).collect();
        (
            crate::math::pairwise_sum(&vals) / n as f64,
            sqrt(crate::math::pairwise_sum(&ses)) / n as f64,
        )
    };
    Ok(EstimateReport {
        value: hu.value - cond,
        std_error: sqrt(hu.std_error * hu.std_error + cond_se * cond_se),
        n,
        n_mc: hu.n_mc,
        seed,
    })
}

/// `I(Y; T_l)` estimate `h(S^n) - sum_y p(y) h(S^{n_y})`, where the class
/// samples are the unconditional samples whose label is `y`.
pub fn mi_label(net: &NoisyNetwork, data: &LabeledDataset, layer: usize, budget: &McBudget, seed: u64) -> Result<EstimateReport> {
    mi_label_with(net, data, layer, &HEstimator::Plugin(*budget), seed)
}

/// [`mi_label`] with a chosen entropy estimator.
pub fn mi_label_with(net: &NoisyNetwork, data: &LabeledDataset, layer: usize, est: &HEstimator, seed: u64) -> Result<EstimateReport> {
    let counts = class_counts(data);
    if let Some(y) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Degenerate(alloc::format!("label class {y} has no samples")));
    }
    let sigma = net.noise_sigma;
    let s = sample_unconditional(net, data, layer, sub_seed(seed, 0))?;
    let hu = est.estimate(&s, sigma, sub_seed(seed, 1))?;
    let n = data.n() as f64;
    let mut cond = 0.0;
    let mut var = hu.std_error * hu.std_error;
    for (y, &c) in counts.iter().enumerate() {
        let sy = s.select(|i| data.labels[i] == y).ok_or_else(|| Error::Degenerate(alloc::format!("label class {y} has no samples")))?;
        let hy = est.estimate(&sy, sigma, sub_seed(seed, 2 + y as u64))?;
        let p = c as f64 / n;
        cond += p * hy.value;
        var += p * p * hy.std_error * hy.std_error;
    }
    Ok(EstimateReport { value: hu.value - cond, std_error: sqrt(var), n: data.n(), n_mc: hu.n_mc, seed })
}

/// Rows per class.
pub fn class_counts(data: &LabeledDataset) -> Vec<usize> {
    let mut c = alloc::vec![0usize; data.n_classes];
    data.labels.iter().for_each(|&y| c[y] += 1);
    c
}

/// `2 delta + d ln(1 + 1/sigma^2) / (4 sqrt n)`.
pub fn mi_input_risk_bound(delta_n: f64, d: usize, sigma: f64, n: usize) -> Result<f64> {
    if !(sigma > 0.0) || n == 0 || d == 0 || !(delta_n >= 0.0) {
        return Err(invalid!("need delta >= 0, d >= 1, sigma > 0 and n >= 1"));
    }
    Ok(2.0 * delta_n + d as f64 * ln(1.0 + 1.0 / (sigma * sigma)) / (4.0 * sqrt(n as f64)))
}
