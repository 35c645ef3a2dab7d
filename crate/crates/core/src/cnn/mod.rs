//! Small deterministic CNN used as a feature extractor.
//!
//! Architecture (standard descriptor):
//!
//! ```text
//! 64×64×1 → conv 3×3×8 (same) → ReLU → maxpool 2×2
//!         → conv 3×3×16 (same) → ReLU → maxpool 2×2
//!         → flatten 4096 → dense 128 → ReLU → dense 2
//! ```
//!
//! The post-ReLU dense-128 activations are the feature vector handed to the
//! subspace classifier; the final dense layer yields two logits trained with
//! softmax cross-entropy. Reduced descriptors with the same layer pattern are
//! used for gradient checks and quick tests.

mod io;
mod layers;

pub use io::{
    load_network, network_from_bytes, network_to_bytes, save_network, NETWORK_MAGIC,
    NETWORK_VERSION,
};
pub use layers::{
    conv2d, conv2d_backward, maxpool2x2, maxpool2x2_backward, FeatureMap, Kernels, Padding,
};

use thiserror::Error;

use crate::rng::SplitMix64;
use crate::tensor::{dot, Matrix};

#[derive(Debug, Error)]
pub enum CnnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid architecture: {0}")]
    Descriptor(String),
    #[error("pixel value {value} at index {index} outside [0, 1]")]
    PixelRange { index: usize, value: f64 },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("learning rate must be positive and finite, got {0}")]
    LearningRate(f64),
    #[error("label {0} out of range for the output layer")]
    Label(u32),
    #[error("loss became non-finite during epoch {epoch}")]
    Diverged { epoch: usize },
}

/// Layer sizes of the fixed four-layer pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnnDescriptor {
    pub input_side: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl CnnDescriptor {
    pub const STANDARD: CnnDescriptor = CnnDescriptor {
        input_side: 64,
        conv1_filters: 8,
        conv2_filters: 16,
        hidden: 128,
        classes: 2,
    };

    /// The reduced instance used for gradient checks.
    pub const SMALL: CnnDescriptor = CnnDescriptor {
        input_side: 8,
        conv1_filters: 2,
        conv2_filters: 3,
        hidden: 6,
        classes: 2,
    };

    pub const KERNEL: usize = 3;

    pub fn flatten_len(&self) -> usize {
        let s = self.input_side / 4;
        s * s * self.conv2_filters
    }

    pub fn validate(&self) -> Result<(), CnnError> {
        if self.input_side == 0 || !self.input_side.is_multiple_of(4) {
            return Err(CnnError::Descriptor(format!(
                "input side {} must be a positive multiple of 4",
                self.input_side
            )));
        }
        if [self.conv1_filters, self.conv2_filters, self.hidden].contains(&0) || self.classes < 2 {
            return Err(CnnError::Descriptor(
                "layer widths must be positive, classes ≥ 2".into(),
            ));
        }
        Ok(())
    }
}

/// Fully connected layer; weights are `output × input` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.output)
            .map(|o| dot(&self.weights[o * self.input..(o + 1) * self.input], x) + self.bias[o])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv {
    pub kernels: Kernels,
    pub bias: Vec<f64>,
}

impl Conv {
    fn forward(&self, x: &FeatureMap) -> Result<FeatureMap, CnnError> {
        let mut out = conv2d(x, &self.kernels, Padding::Same)?;
        let f = self.kernels.filters;
        for (i, v) in out.data.iter_mut().enumerate() {
            *v += self.bias[i % f];
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnNetwork {
    pub descriptor: CnnDescriptor,
    pub seed: u64,
    pub conv1: Conv,
    pub conv2: Conv,
    pub dense1: Dense,
    pub dense2: Dense,
}

/// Post-ReLU activations of the hidden dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

/// Gradients laid out like the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    pub dense1_w: Vec<f64>,
    pub dense1_b: Vec<f64>,
    pub dense2_w: Vec<f64>,
    pub dense2_b: Vec<f64>,
}

impl Gradients {
    fn slices(&self) -> [&[f64]; 8] {
        [
            &self.conv1_w,
            &self.conv1_b,
            &self.conv2_w,
            &self.conv2_b,
            &self.dense1_w,
            &self.dense1_b,
            &self.dense2_w,
            &self.dense2_b,
        ]
    }
}

struct ForwardCache {
    input: FeatureMap,
    z1: FeatureMap,
    a1_len: usize,
    pool1_idx: Vec<usize>,
    p1: FeatureMap,
    z2: FeatureMap,
    a2_len: usize,
    pool2_idx: Vec<usize>,
    flat: Vec<f64>,
    hidden_pre: Vec<f64>,
    features: Vec<f64>,
    logits: Vec<f64>,
}

impl ForwardCache {
    /// Which ReLUs are active and which pooling inputs win. Loss is smooth in
    /// the parameters only while this stays fixed.
    fn pattern(&self) -> (Vec<bool>, Vec<usize>) {
        let active = self
            .z1
            .data
            .iter()
            .chain(&self.z2.data)
            .chain(&self.hidden_pre)
            .map(|&z| z > 0.0)
            .collect();
        let winners = self
            .pool1_idx
            .iter()
            .chain(&self.pool2_idx)
            .copied()
            .collect();
        (active, winners)
    }
}

fn relu_map(m: &FeatureMap) -> FeatureMap {
    FeatureMap {
        data: m.data.iter().map(|&v| v.max(0.0)).collect(),
        ..m.clone()
    }
}

/// Mean-free, numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax cross-entropy of `logits` against class `target`.
pub fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[target]
}

/// `∂loss/∂logits = softmax(logits) − onehot(target)`.
pub fn logit_gradient(logits: &[f64], target: usize) -> Vec<f64> {
    let mut g = softmax(logits);
    g[target] -= 1.0;
    g
}

impl CnnNetwork {
    /// He-initialized network: weights `N(0, 1)·sqrt(2/fan_in)` drawn in layer
    /// order (conv1, conv2, dense1, dense2) from [`SplitMix64`]; zero biases.
    pub fn init(descriptor: CnnDescriptor, seed: u64) -> Result<Self, CnnError> {
        descriptor.validate()?;
        let mut rng = SplitMix64::new(seed);
        let k = CnnDescriptor::KERNEL;
        let mut he = |n: usize, fan_in: usize| -> Vec<f64> {
            let scale = (2.0 / fan_in as f64).sqrt();
            (0..n).map(|_| rng.normal() * scale).collect()
        };
        let (c1, c2) = (descriptor.conv1_filters, descriptor.conv2_filters);
        let flat = descriptor.flatten_len();
        let conv1 = Conv {
            kernels: Kernels::new(k, k, 1, c1, he(k * k * c1, k * k))?,
            bias: vec![0.0; c1],
        };
        let conv2 = Conv {
            kernels: Kernels::new(k, k, c1, c2, he(k * k * c1 * c2, k * k * c1))?,
            bias: vec![0.0; c2],
        };
        let dense1 = Dense {
            input: flat,
            output: descriptor.hidden,
            weights: he(flat * descriptor.hidden, flat),
            bias: vec![0.0; descriptor.hidden],
        };
        let dense2 = Dense {
            input: descriptor.hidden,
            output: descriptor.classes,
            weights: he(descriptor.hidden * descriptor.classes, descriptor.hidden),
            bias: vec![0.0; descriptor.classes],
        };
        let net = Self {
            descriptor,
            seed,
            conv1,
            conv2,
            dense1,
            dense2,
        };
        net.check_shapes()?;
        Ok(net)
    }

    /// Verifies that every layer agrees with the descriptor.
    pub fn check_shapes(&self) -> Result<(), CnnError> {
        let d = self.descriptor;
        d.validate()?;
        let k = CnnDescriptor::KERNEL;
        let ok = self.conv1.kernels.kh == k
            && self.conv1.kernels.kw == k
            && self.conv1.kernels.in_channels == 1
            && self.conv1.kernels.filters == d.conv1_filters
            && self.conv1.bias.len() == d.conv1_filters
            && self.conv2.kernels.kh == k
            && self.conv2.kernels.kw == k
            && self.conv2.kernels.in_channels == d.conv1_filters
            && self.conv2.kernels.filters == d.conv2_filters
            && self.conv2.bias.len() == d.conv2_filters
            && self.dense1.input == d.flatten_len()
            && self.dense1.output == d.hidden
            && self.dense1.weights.len() == d.hidden * d.flatten_len()
            && self.dense1.bias.len() == d.hidden
            && self.dense2.input == d.hidden
            && self.dense2.output == d.classes
            && self.dense2.weights.len() == d.hidden * d.classes
            && self.dense2.bias.len() == d.classes;
        if !ok {
            return Err(CnnError::Descriptor(
                "layer shapes disagree with the descriptor".into(),
            ));
        }
        if self
            .parameters()
            .iter()
            .any(|p| p.iter().any(|v| !v.is_finite()))
        {
            return Err(CnnError::Descriptor("non-finite weight".into()));
        }
        Ok(())
    }

    fn parameters(&self) -> [&[f64]; 8] {
        [
            &self.conv1.kernels.data,
            &self.conv1.bias,
            &self.conv2.kernels.data,
            &self.conv2.bias,
            &self.dense1.weights,
            &self.dense1.bias,
            &self.dense2.weights,
            &self.dense2.bias,
        ]
    }

    fn parameters_mut(&mut self) -> [&mut Vec<f64>; 8] {
        [
            &mut self.conv1.kernels.data,
            &mut self.conv1.bias,
            &mut self.conv2.kernels.data,
            &mut self.conv2.bias,
            &mut self.dense1.weights,
            &mut self.dense1.bias,
            &mut self.dense2.weights,
            &mut self.dense2.bias,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    fn input_map(&self, image: &Matrix) -> Result<FeatureMap, CnnError> {
        let side = self.descriptor.input_side;
        if image.shape() != (side, side) {
            return Err(CnnError::Shape(format!(
                "expected a {side}x{side} image, got {}x{}",
                image.rows(),
                image.cols()
            )));
        }
        if let Some((index, &value)) = image
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(CnnError::PixelRange { index, value });
        }
        FeatureMap::new(side, side, 1, image.as_slice().to_vec())
    }

    fn forward_cached(&self, image: &Matrix) -> Result<ForwardCache, CnnError> {
        let input = self.input_map(image)?;
        let z1 = self.conv1.forward(&input)?;
        let a1 = relu_map(&z1);
        let (p1, pool1_idx) = maxpool2x2(&a1)?;
        let z2 = self.conv2.forward(&p1)?;
        let a2 = relu_map(&z2);
        let (p2, pool2_idx) = maxpool2x2(&a2)?;
        let flat = p2.data;
        let hidden_pre = self.dense1.forward(&flat);
        let features: Vec<f64> = hidden_pre.iter().map(|&v| v.max(0.0)).collect();
        let logits = self.dense2.forward(&features);
        Ok(ForwardCache {
            input,
            z1,
            a1_len: a1.data.len(),
            pool1_idx,
            p1,
            z2,
            a2_len: a2.data.len(),
            pool2_idx,
            flat,
            hidden_pre,
            features,
            logits,
        })
    }

    /// Feature vector (post-ReLU hidden layer) and logits for one image.
    pub fn forward_extract(&self, image: &Matrix) -> Result<(FeatureVector, Vec<f64>), CnnError> {
        let cache = self.forward_cached(image)?;
        Ok((FeatureVector(cache.features), cache.logits))
    }

    /// Loss and analytic gradients for one labeled image.
    pub fn loss_and_gradients(
        &self,
        image: &Matrix,
        target: u32,
    ) -> Result<(f64, Gradients), CnnError> {
        let target = target as usize;
        if target >= self.descriptor.classes {
            return Err(CnnError::Label(target as u32));
        }
        let c = self.forward_cached(image)?;
        let loss = cross_entropy(&c.logits, target);

        let d_logits = logit_gradient(&c.logits, target);
        let (dense2_w, dense2_b, d_features) = dense_backward(&self.dense2, &c.features, &d_logits);
        let d_hidden: Vec<f64> = d_features
            .iter()
            .zip(&c.hidden_pre)
            .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
            .collect();
        let (dense1_w, dense1_b, d_flat) = dense_backward(&self.dense1, &c.flat, &d_hidden);

        let d_a2 = maxpool2x2_backward(&d_flat, &c.pool2_idx, c.a2_len);
        let d_z2 = relu_backward(&c.z2, d_a2);
        let conv2_b = bias_gradient(&d_z2);
        let (conv2_w, d_p1) =
            conv2d_backward(&c.p1, &self.conv2.kernels, Padding::Same, &d_z2, true)?;
        let d_p1 = d_p1.expect("input gradient requested");

        let d_a1 = maxpool2x2_backward(&d_p1.data, &c.pool1_idx, c.a1_len);
        let d_z1 = relu_backward(&c.z1, d_a1);
        let conv1_b = bias_gradient(&d_z1);
        let (conv1_w, _) =
            conv2d_backward(&c.input, &self.conv1.kernels, Padding::Same, &d_z1, false)?;

        Ok((
            loss,
            Gradients {
                conv1_w,
                conv1_b,
                conv2_w,
                conv2_b,
                dense1_w,
                dense1_b,
                dense2_w,
                dense2_b,
            },
        ))
    }

    pub fn loss(&self, image: &Matrix, target: u32) -> Result<f64, CnnError> {
        let c = self.forward_cached(image)?;
        Ok(cross_entropy(&c.logits, target as usize))
    }

    /// One plain SGD update `θ ← θ − lr·∇θ`; returns the pre-update loss.
    pub fn sgd_step(
        &mut self,
        image: &Matrix,
        target: u32,
        learning_rate: f64,
    ) -> Result<f64, CnnError> {
        let (loss, grads) = self.loss_and_gradients(image, target)?;
        for (param, grad) in self.parameters_mut().into_iter().zip(grads.slices()) {
            for (p, g) in param.iter_mut().zip(grad) {
                *p -= learning_rate * g;
            }
        }
        Ok(loss)
    }
}

/// He-initialized network for `descriptor`; see [`CnnNetwork::init`].
pub fn init_weights(descriptor: CnnDescriptor, seed: u64) -> Result<CnnNetwork, CnnError> {
    CnnNetwork::init(descriptor, seed)
}

fn dense_backward(
    layer: &Dense,
    input: &[f64],
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut grad_w = vec![0.0; layer.weights.len()];
    let mut grad_in = vec![0.0; layer.input];
    for (o, &g) in grad_out.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        let row = o * layer.input..(o + 1) * layer.input;
        for ((gw, &x), (gi, &w)) in grad_w[row.clone()]
            .iter_mut()
            .zip(input)
            .zip(grad_in.iter_mut().zip(&layer.weights[row]))
        {
            *gw = g * x;
            *gi += g * w;
        }
    }
    (grad_w, grad_out.to_vec(), grad_in)
}

fn relu_backward(pre: &FeatureMap, grad: Vec<f64>) -> FeatureMap {
    FeatureMap {
        data: grad
            .into_iter()
            .zip(&pre.data)
            .map(|(g, &z)| if z > 0.0 { g } else { 0.0 })
            .collect(),
        ..pre.clone()
    }
}

fn bias_gradient(grad: &FeatureMap) -> Vec<f64> {
    let mut out = vec![0.0; grad.channels];
    for (i, &g) in grad.data.iter().enumerate() {
        out[i % grad.channels] += g;
    }
    out
}

/// [`CnnNetwork::forward_extract`] over a batch, in parallel; output order
/// follows `images`.
pub fn extract_batch(
    net: &CnnNetwork,
    images: &[Matrix],
) -> Result<Vec<(FeatureVector, Vec<f64>)>, CnnError> {
    use rayon::prelude::*;
    images
        .par_iter()
        .map(|img| net.forward_extract(img))
        .collect()
}

/// Trains with plain per-sample SGD on mean softmax cross-entropy.
///
/// Each epoch visits the samples in an order shuffled by a [`SplitMix64`]
/// seeded with `seed`. Returns the trained network and the mean pre-update
/// loss of every epoch.
pub fn train_sgd(
    net: &CnnNetwork,
    images: &[Matrix],
    labels: &[u32],
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<(CnnNetwork, Vec<f64>), CnnError> {
    if images.is_empty() {
        return Err(CnnError::EmptyDataset);
    }
    if images.len() != labels.len() {
        return Err(CnnError::Shape(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(CnnError::LearningRate(learning_rate));
    }
    let mut net = net.clone();
    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for &i in &order {
            total += net.sgd_step(&images[i], labels[i], learning_rate)?;
        }
        let mean = total / images.len() as f64;
        if !mean.is_finite()
            || net
                .parameters()
                .iter()
                .any(|p| p.iter().any(|v| !v.is_finite()))
        {
            return Err(CnnError::Diverged { epoch });
        }
        tracing::debug!(epoch, loss = mean, "cnn epoch");
        trace.push(mean);
    }
    Ok((net, trace))
}

/// Largest relative disagreement between analytic gradients and central
/// finite differences (step `1e-5`) over every parameter:
/// `|g_a − g_n| / max(1e-6, |g_a| + |g_n|)`. The floor sits above the
/// roundoff of the difference quotient itself (about `ε·|L| / step`, i.e.
/// 1e-11), so vanishing gradients are compared absolutely.
///
/// A parameter whose `±step` probes change the ReLU/max-pool pattern sits on
/// a kink where the difference quotient does not estimate the derivative
/// (a freshly initialized network with dead units has pre-activations of
/// exactly zero); such parameters are skipped.
pub fn gradient_check(net: &CnnNetwork, image: &Matrix, target: u32) -> Result<f64, CnnError> {
    const STEP: f64 = 1e-5;
    const FLOOR: f64 = 1e-6;
    let (_, grads) = net.loss_and_gradients(image, target)?;
    let analytic: Vec<f64> = grads
        .slices()
        .iter()
        .flat_map(|s| s.iter().copied())
        .collect();
    let base = net.forward_cached(image)?.pattern();
    let t = target as usize;

    let mut probe = net.clone();
    let mut worst = 0.0_f64;
    let mut flat_index = 0;
    for layer in 0..8 {
        let len = probe.parameters_mut()[layer].len();
        for i in 0..len {
            let original = probe.parameters_mut()[layer][i];
            probe.parameters_mut()[layer][i] = original + STEP;
            let plus = probe.forward_cached(image)?;
            probe.parameters_mut()[layer][i] = original - STEP;
            let minus = probe.forward_cached(image)?;
            probe.parameters_mut()[layer][i] = original;

            let a = analytic[flat_index];
            flat_index += 1;
            if plus.pattern() != base || minus.pattern() != base {
                continue;
            }
            let numeric =
                (cross_entropy(&plus.logits, t) - cross_entropy(&minus.logits, t)) / (2.0 * STEP);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(FLOOR);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
