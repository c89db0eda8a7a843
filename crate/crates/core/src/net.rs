//! A single-convolution network over spectral windows, trained from scratch.
//!
//! Layer chain with default shape: `30×2 → conv(10 filters, 10 taps) → 21×10
//! → max-pool(5) → 4×10 → flatten 40 → dense → 3 → softmax`. The convolution
//! is a valid cross-correlation along the bin axis that spans both input
//! channels, with no activation before pooling.
//!
//! Everything is `f64`. Gradients are exact; pooling routes the upstream
//! gradient only to the first maximum of each region.

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{FeatureMatrix, LabeledWindow};
use crate::model::{DatasetSplit, LabelClass, Prediction};

/// Floor applied to probabilities before taking the log in the loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Layer dimensions. Everything except `input_len`, `kernel_len` and
/// `pool_factor` is fixed by the architecture, but kept explicit so model
/// files can describe themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkShape {
    pub input_len: usize,
    pub channels: usize,
    pub filters: usize,
    pub kernel_len: usize,
    pub pool_factor: usize,
    pub classes: usize,
}

impl Default for NetworkShape {
    fn default() -> Self {
        Self { input_len: 30, channels: 2, filters: 10, kernel_len: 10, pool_factor: 5, classes: 3 }
    }
}

impl NetworkShape {
    pub fn with_kernel_len(kernel_len: usize) -> Self {
        Self { kernel_len, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels != FeatureMatrix::CHANNELS {
            return Err(Error::Shape(format!("{} input channels, expected 2", self.channels)));
        }
        if self.classes != LabelClass::COUNT {
            return Err(Error::Shape(format!("{} output classes, expected 3", self.classes)));
        }
        if self.filters == 0 || self.pool_factor == 0 {
            return Err(Error::Shape("filters and pool_factor must be positive".into()));
        }
        if self.kernel_len == 0 || self.kernel_len > self.input_len {
            return Err(Error::Shape(format!(
                "kernel_len {} not in [1, {}]",
                self.kernel_len, self.input_len
            )));
        }
        if self.pooled_len() == 0 {
            return Err(Error::Shape(format!(
                "convolution output of {} is shorter than the pool factor {}",
                self.conv_len(),
                self.pool_factor
            )));
        }
        Ok(())
    }

    pub fn conv_len(&self) -> usize {
        self.input_len + 1 - self.kernel_len
    }

    /// Pooling windows do not overlap; a ragged tail is dropped.
    pub fn pooled_len(&self) -> usize {
        self.conv_len() / self.pool_factor
    }

    pub fn flattened_dim(&self) -> usize {
        self.filters * self.pooled_len()
    }

    fn filter_size(&self) -> usize {
        self.kernel_len * self.channels
    }

    pub fn param_count(&self) -> usize {
        self.filters * self.filter_size() + self.filters + self.classes * self.flattened_dim() + self.classes
    }
}

/// All learnable weights.
///
/// * `conv_weights`: `[filter][tap][channel]`, row-major
/// * `conv_bias`: `[filter]`
/// * `dense_weights`: `[class][flat]` where `flat = pooled_row * filters + filter`
/// * `dense_bias`: `[class]`
///
/// The same struct doubles as a gradient or optimizer-moment container.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    shape: NetworkShape,
    pub conv_weights: Vec<f64>,
    pub conv_bias: Vec<f64>,
    pub dense_weights: Vec<f64>,
    pub dense_bias: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros(shape: NetworkShape) -> Result<Self> {
        shape.validate()?;
        Ok(Self {
            shape,
            conv_weights: vec![0.0; shape.filters * shape.filter_size()],
            conv_bias: vec![0.0; shape.filters],
            dense_weights: vec![0.0; shape.classes * shape.flattened_dim()],
            dense_bias: vec![0.0; shape.classes],
        })
    }

    pub fn from_parts(
        shape: NetworkShape,
        conv_weights: Vec<f64>,
        conv_bias: Vec<f64>,
        dense_weights: Vec<f64>,
        dense_bias: Vec<f64>,
    ) -> Result<Self> {
        let params = Self { shape, conv_weights, conv_bias, dense_weights, dense_bias };
        let template = Self::zeros(shape)?;
        for (name, (got, want)) in ["conv_weights", "conv_bias", "dense_weights", "dense_bias"]
            .iter()
            .zip(params.tensors().iter().zip(template.tensors().iter()))
        {
            if got.len() != want.len() {
                return Err(Error::Shape(format!("{name} has {} values, expected {}", got.len(), want.len())));
            }
        }
        if params.tensors().iter().flat_map(|t| t.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite weight".into()));
        }
        Ok(params)
    }

    pub fn shape(&self) -> &NetworkShape {
        &self.shape
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.conv_weights, &self.conv_bias, &self.dense_weights, &self.dense_bias]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.conv_weights, &mut self.conv_bias, &mut self.dense_weights, &mut self.dense_bias]
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.tensors().into_iter().flat_map(|t| t.iter())
    }

    fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.fill(value);
        }
    }

    fn check_input(&self, feature: &FeatureMatrix) -> Result<()> {
        if feature.rows() != self.shape.input_len {
            return Err(Error::Shape(format!(
                "feature has {} rows, network expects {}",
                feature.rows(),
                self.shape.input_len
            )));
        }
        Ok(())
    }

    pub fn forward(&self, feature: &FeatureMatrix) -> Result<ForwardPass> {
        self.check_input(feature)?;
        let mut pass = ForwardPass::new(&self.shape);
        self.forward_into(feature.as_slice(), &mut pass);
        #[cfg(debug_assertions)]
        {
            pass.fingerprint = fingerprint(self, feature.as_slice());
        }
        Ok(pass)
    }

    pub fn predict(&self, feature: &FeatureMatrix) -> Result<Prediction> {
        Ok(self.forward(feature)?.probs)
    }

    fn forward_into(&self, x: &[f64], pass: &mut ForwardPass) {
        let s = &self.shape;
        let fs = s.filter_size();

        for p in 0..s.conv_len() {
            let patch = &x[p * s.channels..p * s.channels + fs];
            for f in 0..s.filters {
                let w = &self.conv_weights[f * fs..(f + 1) * fs];
                let acc: f64 = w.iter().zip(patch).map(|(a, b)| a * b).sum();
                pass.conv[p * s.filters + f] = acc + self.conv_bias[f];
            }
        }

        for q in 0..s.pooled_len() {
            for f in 0..s.filters {
                let mut best_p = q * s.pool_factor;
                let mut best = pass.conv[best_p * s.filters + f];
                for p in best_p + 1..(q + 1) * s.pool_factor {
                    let v = pass.conv[p * s.filters + f];
                    if v > best {
                        best = v;
                        best_p = p;
                    }
                }
                pass.pooled[q * s.filters + f] = best;
                pass.argmax[q * s.filters + f] = best_p;
            }
        }

        let flat = s.flattened_dim();
        for c in 0..s.classes {
            let w = &self.dense_weights[c * flat..(c + 1) * flat];
            let acc: f64 = w.iter().zip(&pass.pooled).map(|(a, b)| a * b).sum();
            pass.logits[c] = acc + self.dense_bias[c];
        }
        pass.probs = softmax(&pass.logits);
    }

    /// Exact gradient of the cross-entropy loss for `truth`, using the
    /// activations recorded by [`NetworkParams::forward`] on the same input.
    pub fn backward(
        &self,
        feature: &FeatureMatrix,
        truth: LabelClass,
        cache: &ForwardPass,
    ) -> Result<NetworkParams> {
        self.check_input(feature)?;
        #[cfg(debug_assertions)]
        assert_eq!(
            cache.fingerprint,
            fingerprint(self, feature.as_slice()),
            "forward cache does not belong to these parameters and input"
        );
        let mut grads = NetworkParams::zeros(self.shape)?;
        self.accumulate_gradient(feature.as_slice(), truth, cache, 1.0, &mut grads);
        Ok(grads)
    }

    /// `grads += scale * ∂loss/∂params`.
    fn accumulate_gradient(
        &self,
        x: &[f64],
        truth: LabelClass,
        cache: &ForwardPass,
        scale: f64,
        grads: &mut NetworkParams,
    ) {
        let s = &self.shape;
        let fs = s.filter_size();
        let flat = s.flattened_dim();

        // d loss / d logits for softmax + cross-entropy
        let mut dz = *cache.probs.probs();
        dz[truth.index()] -= 1.0;
        for v in dz.iter_mut() {
            *v *= scale;
        }

        for c in 0..s.classes {
            grads.dense_bias[c] += dz[c];
            let gw = &mut grads.dense_weights[c * flat..(c + 1) * flat];
            for (g, &a) in gw.iter_mut().zip(&cache.pooled) {
                *g += dz[c] * a;
            }
        }

        for j in 0..flat {
            let mut dpool = 0.0;
            for c in 0..s.classes {
                dpool += self.dense_weights[c * flat + j] * dz[c];
            }
            let f = j % s.filters;
            let p = cache.argmax[j];
            grads.conv_bias[f] += dpool;
            let patch = &x[p * s.channels..p * s.channels + fs];
            let gw = &mut grads.conv_weights[f * fs..(f + 1) * fs];
            for (g, &xv) in gw.iter_mut().zip(patch) {
                *g += dpool * xv;
            }
        }
    }
}

#[cfg(debug_assertions)]
fn fingerprint(params: &NetworkParams, x: &[f64]) -> u64 {
    // FNV-1a over the raw bits
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in params.iter().chain(x) {
        h ^= v.to_bits();
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Activations of one forward pass, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub logits: [f64; 3],
    pub probs: Prediction,
    /// Convolution pre-activations, `[position][filter]`.
    pub conv: Vec<f64>,
    /// Pooled activations in flattened order.
    pub pooled: Vec<f64>,
    /// For each pooled cell, the convolution position that won.
    pub argmax: Vec<usize>,
    #[cfg(debug_assertions)]
    fingerprint: u64,
}

impl ForwardPass {
    fn new(shape: &NetworkShape) -> Self {
        Self {
            logits: [0.0; 3],
            probs: Prediction::uniform(),
            conv: vec![0.0; shape.conv_len() * shape.filters],
            pooled: vec![0.0; shape.flattened_dim()],
            argmax: vec![0; shape.flattened_dim()],
            #[cfg(debug_assertions)]
            fingerprint: 0,
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64; 3]) -> Prediction {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = logits.map(|z| (z - max).exp());
    let sum: f64 = e.iter().sum();
    Prediction::new(e.map(|v| v / sum)).expect("softmax of finite logits is a distribution")
}

/// `−ln p[truth]` with the probability floored at [`PROB_FLOOR`].
pub fn loss_cross_entropy(probs: &Prediction, truth: LabelClass) -> f64 {
    -probs.get(truth).max(PROB_FLOOR).ln()
}

/// Glorot-uniform weights, zero biases. Bounds are `√(6 / (fan_in + fan_out))`
/// with `fan_in = kernel_len · channels, fan_out = filters` for the
/// convolution and `fan_in = flattened_dim, fan_out = classes` for the dense
/// layer.
pub fn init_params(seed: u64, kernel_len: usize) -> Result<NetworkParams> {
    init_params_with_shape(NetworkShape::with_kernel_len(kernel_len), seed)
}

pub fn init_params_with_shape(shape: NetworkShape, seed: u64) -> Result<NetworkParams> {
    let mut params = NetworkParams::zeros(shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conv_bound = glorot_bound(shape.filter_size(), shape.filters);
    let dense_bound = glorot_bound(shape.flattened_dim(), shape.classes);
    let conv = Uniform::new_inclusive(-conv_bound, conv_bound).expect("finite bound");
    let dense = Uniform::new_inclusive(-dense_bound, dense_bound).expect("finite bound");
    for w in &mut params.conv_weights {
        *w = conv.sample(&mut rng);
    }
    for w in &mut params.dense_weights {
        *w = dense.sample(&mut rng);
    }
    Ok(params)
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub const PHASE1: AdamConfig = AdamConfig { alpha: 0.001, beta1: 0.9, beta2: 0.99, epsilon: 1e-8 };
    /// β₂ = 0.1 is deliberate: the second schedule phase uses it as published.
    pub const PHASE2: AdamConfig = AdamConfig { alpha: 0.002, beta1: 0.85, beta2: 0.1, epsilon: 1e-8 };

    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        if !(self.alpha > 0.0 && unit(self.beta1) && unit(self.beta2) && self.epsilon > 0.0) {
            return Err(Error::Config(format!("invalid Adam parameters {self:?}")));
        }
        Ok(())
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: NetworkParams,
    pub v: NetworkParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(shape: NetworkShape) -> Result<Self> {
        Ok(Self { m: NetworkParams::zeros(shape)?, v: NetworkParams::zeros(shape)?, t: 0 })
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut NetworkParams, grads: &NetworkParams, state: &mut AdamState, config: &AdamConfig) {
    state.t += 1;
    let t = i32::try_from(state.t).unwrap_or(i32::MAX);
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    let [m0, m1, m2, m3] = state.m.tensors_mut();
    let [v0, v1, v2, v3] = state.v.tensors_mut();
    for ((theta, g), (m, v)) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip([m0, m1, m2, m3].into_iter().zip([v0, v1, v2, v3]))
    {
        adam_update(theta, g, m, v, c1, c2, config);
    }
}

fn adam_update(theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], c1: f64, c2: f64, cfg: &AdamConfig) {
    for i in 0..theta.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        theta[i] -= cfg.alpha * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Epoch budget and optimizer settings for one schedule phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub epochs: usize,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl PhaseConfig {
    pub fn new(epochs: usize, adam: AdamConfig) -> Self {
        Self { epochs, alpha: adam.alpha, beta1: adam.beta1, beta2: adam.beta2, epsilon: adam.epsilon }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { alpha: self.alpha, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub phase1: PhaseConfig,
    pub phase2: PhaseConfig,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
    pub kernel_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            phase1: PhaseConfig::new(100, AdamConfig::PHASE1),
            phase2: PhaseConfig::new(200, AdamConfig::PHASE2),
            batch_size: 64,
            seed: 0,
            shuffle: true,
            kernel_len: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.phase1.adam().validate()?;
        self.phase2.adam().validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        NetworkShape::with_kernel_len(self.kernel_len).validate().map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1 or 2.
    pub phase: u8,
    /// 1-based within the phase.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    /// Phase-one epoch whose weights seeded phase two; `None` when phase one
    /// never beat the initialization (or did not run).
    pub best_epoch: Option<usize>,
    pub best_val_accuracy: f64,
}

/// Two-phase training: phase one keeps the weights with the best validation
/// accuracy; phase two continues from them with its own optimizer settings
/// and fresh moments, and its final weights are returned.
pub fn train(data: &DatasetSplit<LabeledWindow>, config: &TrainConfig) -> Result<(NetworkParams, TrainHistory)> {
    config.validate()?;
    if data.train.is_empty() || data.validation.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let input_len = data.train[0].feature.rows();
    let shape = NetworkShape { input_len, kernel_len: config.kernel_len, ..NetworkShape::default() };
    for w in data.train.iter().chain(&data.validation) {
        if w.feature.rows() != input_len {
            return Err(Error::Shape(format!("mixed window lengths {} and {}", input_len, w.feature.rows())));
        }
    }

    let mut params = init_params_with_shape(shape, config.seed)?;
    let mut trainer = Trainer::new(shape, config)?;
    let mut history = TrainHistory { best_val_accuracy: accuracy(&params, &data.validation), ..Default::default() };
    let mut best = params.clone();

    let mut state = AdamState::new(shape)?;
    let adam = config.phase1.adam();
    for epoch in 1..=config.phase1.epochs {
        let train_loss = trainer.epoch(&mut params, &data.train, &mut state, &adam);
        let val_accuracy = accuracy(&params, &data.validation);
        history.records.push(EpochRecord { phase: 1, epoch, train_loss, val_accuracy });
        if val_accuracy > history.best_val_accuracy {
            history.best_val_accuracy = val_accuracy;
            history.best_epoch = Some(epoch);
            best.clone_from(&params);
        }
    }

    params = best;
    let mut state = AdamState::new(shape)?;
    let adam = config.phase2.adam();
    for epoch in 1..=config.phase2.epochs {
        let train_loss = trainer.epoch(&mut params, &data.train, &mut state, &adam);
        let val_accuracy = accuracy(&params, &data.validation);
        history.records.push(EpochRecord { phase: 2, epoch, train_loss, val_accuracy });
    }
    Ok((params, history))
}

/// Fraction of windows whose arg-max prediction matches the label.
pub fn accuracy(params: &NetworkParams, windows: &[LabeledWindow]) -> f64 {
    if windows.is_empty() {
        return 0.0;
    }
    let mut pass = ForwardPass::new(params.shape());
    let correct = windows
        .iter()
        .filter(|w| {
            params.forward_into(w.feature.as_slice(), &mut pass);
            pass.probs.label() == w.label
        })
        .count();
    correct as f64 / windows.len() as f64
}

struct Trainer {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    grads: NetworkParams,
    pass: ForwardPass,
    batch_size: usize,
    shuffle: bool,
}

impl Trainer {
    fn new(shape: NetworkShape, config: &TrainConfig) -> Result<Self> {
        // separate stream from the one used for initialization
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Self {
            rng,
            order: Vec::new(),
            grads: NetworkParams::zeros(shape)?,
            pass: ForwardPass::new(&shape),
            batch_size: config.batch_size,
            shuffle: config.shuffle,
        })
    }

    /// One pass over `windows` in mini-batches; returns the mean loss seen.
    fn epoch(
        &mut self,
        params: &mut NetworkParams,
        windows: &[LabeledWindow],
        state: &mut AdamState,
        adam: &AdamConfig,
    ) -> f64 {
        self.order.clear();
        self.order.extend(0..windows.len());
        if self.shuffle {
            self.order.shuffle(&mut self.rng);
        }
        let mut total_loss = 0.0;
        for batch in self.order.chunks(self.batch_size) {
            self.grads.fill(0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let w = &windows[i];
                let x = w.feature.as_slice();
                params.forward_into(x, &mut self.pass);
                total_loss += loss_cross_entropy(&self.pass.probs, w.label);
                params.accumulate_gradient(x, w.label, &self.pass, scale, &mut self.grads);
            }
            adam_step(params, &self.grads, state, adam);
        }
        total_loss / windows.len() as f64
    }
}
