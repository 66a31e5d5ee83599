//! Fully connected surrogate network, trained with Adam on an L2-penalised
//! squared error.
//!
//! The network maps six normalized features to `C/c0` through a sigmoid head;
//! [`predict`] rescales by the sample's `c0`. Activations are stored
//! sample-major: a batch of `m` rows of width `n` is a flat `m × n` vector.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, Features, NormStats, Sample, Split, FEATURE_COUNT};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const LEAKY_SLOPE: f64 = 0.001;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u32 },
    #[error("malformed checkpoint: {0}")]
    MalformedFile(String),
    #[error("dataset has no {0} samples")]
    EmptySplit(&'static str),
    #[error("dataset carries no normalization statistics")]
    MissingNorm,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    LeakyRelu,
    Sigmoid,
    Identity,
}

pub fn activate(x: f64, kind: Activation) -> f64 {
    match kind {
        Activation::LeakyRelu => {
            if x >= 0.0 {
                x
            } else {
                LEAKY_SLOPE * x
            }
        }
        Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        Activation::Identity => x,
    }
}

pub fn activate_derivative(x: f64, kind: Activation) -> f64 {
    match kind {
        Activation::LeakyRelu => {
            if x >= 0.0 {
                1.0
            } else {
                LEAKY_SLOPE
            }
        }
        Activation::Sigmoid => {
            let s = activate(x, Activation::Sigmoid);
            s * (1.0 - s)
        }
        Activation::Identity => 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub lambda: f64,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub seed: u64,
    /// Samples per gradient step.
    pub batch_size: usize,
    /// Multiply the `[0, 1)` weight draw by `1/√fan_in`.
    pub scale_init: bool,
    /// Learning rate multiplier applied after every epoch.
    #[serde(default = "unit")]
    pub lr_decay: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            layer_sizes: vec![FEATURE_COUNT, 64, 64, 32, 1],
            hidden_activation: Activation::LeakyRelu,
            output_activation: Activation::Sigmoid,
            lambda: 1e-4,
            adam: AdamConfig::default(),
            epochs: 100,
            seed: 0,
            batch_size: 128,
            scale_init: true,
            lr_decay: 1.0,
        }
    }
}

impl NetworkConfig {
    pub fn with_hidden(hidden: &[usize]) -> Self {
        let mut layer_sizes = vec![FEATURE_COUNT];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(1);
        Self {
            layer_sizes,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |m: String| Err(MlpError::InvalidConfig(m));
        if self.layer_sizes.len() < 3 {
            return bad("at least one hidden layer is required".into());
        }
        if self.layer_sizes.iter().any(|&n| n == 0) {
            return bad(format!("layer sizes must be positive: {:?}", self.layer_sizes));
        }
        if self.layer_sizes.last() != Some(&1) {
            return bad("the output layer must have one unit".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda = {}", self.lambda));
        }
        let a = &self.adam;
        if !(a.alpha > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0) {
            return bad(format!("adam parameters {a:?}"));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay = {}", self.lr_decay));
        }
        Ok(())
    }

    fn activation(&self, layer: usize, n_layers: usize) -> Activation {
        if layer + 1 == n_layers {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }
}

/// One affine layer: `weights` is `n_out × n_in`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            biases: vec![0.0; n_out],
        }
    }

    fn is_consistent(&self) -> bool {
        self.weights.len() == self.n_in * self.n_out && self.biases.len() == self.n_out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layers: Vec<Layer>,
}

impl NetworkParams {
    pub fn zeros(layer_sizes: &[usize]) -> Self {
        Self {
            layers: layer_sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.layers.first().map(|l| vec![l.n_in]).unwrap_or_default();
        s.extend(self.layers.iter().map(|l| l.n_out));
        s
    }

    pub fn weight_sq_sum(&self) -> f64 {
        self.layers.iter().flat_map(|l| &l.weights).map(|w| w * w).sum()
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases))
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    fn check_against(&self, config: &NetworkConfig) -> Result<(), MlpError> {
        if self.shape() != config.layer_sizes || !self.layers.iter().all(Layer::is_consistent) {
            return Err(MlpError::ShapeMismatch(format!(
                "parameters {:?} vs configuration {:?}",
                self.shape(),
                config.layer_sizes
            )));
        }
        Ok(())
    }
}

/// Gradients share the parameter layout.
pub type Gradients = NetworkParams;

/// Weights uniform in `[0, 1)` (optionally scaled by `1/√fan_in`), biases
/// uniform in `[−0.1, 0)`.
pub fn init_params<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> NetworkParams {
    let mut params = NetworkParams::zeros(&config.layer_sizes);
    for layer in &mut params.layers {
        let scale = if config.scale_init {
            1.0 / (layer.n_in as f64).sqrt()
        } else {
            1.0
        };
        for w in &mut layer.weights {
            *w = rng.random::<f64>() * scale;
        }
        for b in &mut layer.biases {
            *b = -0.1 * (1.0 - rng.random::<f64>());
            if *b == 0.0 {
                *b = -f64::EPSILON;
            }
        }
    }
    params
}

/// Pre-activations and activations of every layer for one batch.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    m: usize,
    /// `acts[0]` is the input; `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }
}

/// Runs a batch of `inputs.len() / n_in` rows through the network.
pub fn forward(params: &NetworkParams, config: &NetworkConfig, inputs: &[f64]) -> Result<ForwardCache, MlpError> {
    let n_in = params.layers.first().map(|l| l.n_in).unwrap_or(0);
    if n_in == 0 || inputs.len() % n_in != 0 {
        return Err(MlpError::ShapeMismatch(format!("{} inputs for width {n_in}", inputs.len())));
    }
    let m = inputs.len() / n_in;
    let n_layers = params.layers.len();
    let mut acts = Vec::with_capacity(n_layers + 1);
    let mut pre = Vec::with_capacity(n_layers);
    acts.push(inputs.to_vec());
    for (l, layer) in params.layers.iter().enumerate() {
        let kind = config.activation(l, n_layers);
        let a_prev = &acts[l];
        let mut z = vec![0.0; m * layer.n_out];
        for i in 0..m {
            let row = &a_prev[i * layer.n_in..(i + 1) * layer.n_in];
            let zi = &mut z[i * layer.n_out..(i + 1) * layer.n_out];
            for (j, zj) in zi.iter_mut().enumerate() {
                let w = &layer.weights[j * layer.n_in..(j + 1) * layer.n_in];
                *zj = layer.biases[j] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        let a: Vec<f64> = z.iter().map(|&v| activate(v, kind)).collect();
        if !a.iter().all(|v| v.is_finite()) {
            return Err(MlpError::NonFinite { epoch: 0, batch: 0 });
        }
        pre.push(z);
        acts.push(a);
    }
    Ok(ForwardCache { m, acts, pre })
}

/// `(1/m)‖Y′ − Y‖² + (λ/2m)ΣW²`; biases are not penalised.
pub fn loss(predictions: &[f64], targets: &[f64], params: &NetworkParams, lambda: f64) -> f64 {
    let m = predictions.len() as f64;
    data_loss(predictions, targets) + lambda / (2.0 * m) * params.weight_sq_sum()
}

/// Mean squared error without the penalty.
pub fn data_loss(predictions: &[f64], targets: &[f64]) -> f64 {
    assert_eq!(predictions.len(), targets.len(), "prediction and target lengths differ");
    let m = predictions.len() as f64;
    predictions.iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / m
}

/// Exact gradient of [`loss`] with respect to every weight and bias.
pub fn backward(
    params: &NetworkParams,
    config: &NetworkConfig,
    cache: &ForwardCache,
    targets: &[f64],
    lambda: f64,
) -> Result<Gradients, MlpError> {
    let m = cache.m;
    if targets.len() != m || m == 0 {
        return Err(MlpError::ShapeMismatch(format!("{} targets for {m} rows", targets.len())));
    }
    let n_layers = params.layers.len();
    let mut grads = NetworkParams::zeros(&params.shape());
    let mf = m as f64;
    // dJ/dA for the output layer
    let mut delta: Vec<f64> = cache.output().iter().zip(targets).map(|(p, y)| 2.0 * (p - y) / mf).collect();
    for l in (0..n_layers).rev() {
        let layer = &params.layers[l];
        let kind = config.activation(l, n_layers);
        for (d, &z) in delta.iter_mut().zip(&cache.pre[l]) {
            *d *= activate_derivative(z, kind);
        }
        let a_prev = &cache.acts[l];
        let g = &mut grads.layers[l];
        for i in 0..m {
            let row = &a_prev[i * layer.n_in..(i + 1) * layer.n_in];
            for j in 0..layer.n_out {
                let dz = delta[i * layer.n_out + j];
                g.biases[j] += dz;
                if dz != 0.0 {
                    for (gw, a) in g.weights[j * layer.n_in..(j + 1) * layer.n_in].iter_mut().zip(row) {
                        *gw += dz * a;
                    }
                }
            }
        }
        if lambda != 0.0 {
            for (gw, w) in g.weights.iter_mut().zip(&layer.weights) {
                *gw += lambda * w / mf;
            }
        }
        if l > 0 {
            let mut next = vec![0.0; m * layer.n_in];
            for i in 0..m {
                let out = &mut next[i * layer.n_in..(i + 1) * layer.n_in];
                for j in 0..layer.n_out {
                    let dz = delta[i * layer.n_out + j];
                    if dz != 0.0 {
                        for (o, w) in out.iter_mut().zip(&layer.weights[j * layer.n_in..(j + 1) * layer.n_in]) {
                            *o += dz * w;
                        }
                    }
                }
            }
            delta = next;
        }
    }
    Ok(grads)
}

/// Central-difference gradient of [`loss`], one parameter at a time.
pub fn numerical_gradients(
    params: &NetworkParams,
    config: &NetworkConfig,
    inputs: &[f64],
    targets: &[f64],
    epsilon: f64,
) -> Result<Gradients, MlpError> {
    let mut probe = params.clone();
    let mut grads = NetworkParams::zeros(&params.shape());
    let eval = |p: &NetworkParams| -> Result<f64, MlpError> {
        let cache = forward(p, config, inputs)?;
        Ok(loss(cache.output(), targets, p, config.lambda))
    };
    let count = params.values().count();
    for idx in 0..count {
        let original = *params.values().nth(idx).expect("index in range");
        *probe.values_mut().nth(idx).expect("index in range") = original + epsilon;
        let plus = eval(&probe)?;
        *probe.values_mut().nth(idx).expect("index in range") = original - epsilon;
        let minus = eval(&probe)?;
        *probe.values_mut().nth(idx).expect("index in range") = original;
        *grads.values_mut().nth(idx).expect("index in range") = (plus - minus) / (2.0 * epsilon);
    }
    Ok(grads)
}

/// `‖a − b‖ / (‖a‖ + ‖b‖)` over all entries, zero when both are zero.
///
/// Normalizing by the whole gradient keeps entries far below the
/// central-difference round-off level (about `ε_mach |J| / ε`) from dominating.
pub fn relative_error(a: &Gradients, b: &Gradients) -> f64 {
    let norm = |g: &Gradients| g.values().map(|v| v * v).sum::<f64>().sqrt();
    let diff = a.values().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    if diff == 0.0 {
        0.0
    } else {
        diff / (norm(a) + norm(b))
    }
}

/// Compares [`backward`] with central differences of the loss.
pub fn grad_check(
    params: &NetworkParams,
    config: &NetworkConfig,
    inputs: &[f64],
    targets: &[f64],
    epsilon: f64,
) -> Result<f64, MlpError> {
    if targets.is_empty() {
        return Err(MlpError::EmptySplit("gradient-check"));
    }
    let cache = forward(params, config, inputs)?;
    let analytic = backward(params, config, &cache, targets, config.lambda)?;
    let numeric = numerical_gradients(params, config, inputs, targets, epsilon)?;
    Ok(relative_error(&analytic, &numeric))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: NetworkParams,
    pub v: NetworkParams,
    pub step: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(params: &NetworkParams, config: AdamConfig) -> Self {
        Self {
            m: NetworkParams::zeros(&params.shape()),
            v: NetworkParams::zeros(&params.shape()),
            step: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update with learning rate `state.config.alpha`.
pub fn adam_step(params: &mut NetworkParams, grads: &Gradients, state: &mut AdamState) {
    state.step += 1;
    let AdamConfig {
        alpha,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let c1 = 1.0 - beta1.powf(state.step as f64);
    let c2 = 1.0 - beta2.powf(state.step as f64);
    for (((p, g), m), v) in params
        .values_mut()
        .zip(grads.values())
        .zip(state.m.values_mut())
        .zip(state.v.values_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        *p -= alpha * (*m / c1) / ((*v / c2).sqrt() + epsilon);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean penalised mini-batch loss per epoch.
    pub train_loss: Vec<f64>,
    /// Validation mean squared error of `C/c0` per epoch.
    pub val_loss: Vec<f64>,
    pub initial_val_loss: f64,
    /// Index into `val_loss` of the retained parameters, if any epoch ran.
    pub best_epoch: Option<usize>,
    pub wall_time_secs: f64,
}

/// Normalized inputs and `C/c0` targets of a sample set.
pub fn design_matrix(samples: &[Sample], norm: &NormStats) -> (Vec<f64>, Vec<f64>) {
    let mut inputs = Vec::with_capacity(samples.len() * FEATURE_COUNT);
    let mut targets = Vec::with_capacity(samples.len());
    for s in samples {
        inputs.extend_from_slice(&norm.normalize(&s.features));
        targets.push(if s.features.c0 > 0.0 { s.label / s.features.c0 } else { 0.0 });
    }
    (inputs, targets)
}

fn set_loss(params: &NetworkParams, config: &NetworkConfig, inputs: &[f64], targets: &[f64]) -> Result<f64, MlpError> {
    const CHUNK: usize = 4096;
    let mut total = 0.0;
    for (x, y) in inputs.chunks(CHUNK * FEATURE_COUNT).zip(targets.chunks(CHUNK)) {
        let cache = forward(params, config, x)?;
        total += data_loss(cache.output(), y) * y.len() as f64;
    }
    Ok(total / targets.len() as f64)
}

/// Mini-batch Adam over the shuffled training split, keeping the parameters
/// with the lowest validation loss.
pub fn train(dataset: &Dataset, config: &NetworkConfig) -> Result<(NetworkParams, TrainReport), MlpError> {
    config.validate()?;
    let norm = dataset.norm.ok_or(MlpError::MissingNorm)?;
    let train_set = dataset.split_samples(Split::Train);
    let val_set = dataset.split_samples(Split::Validation);
    if train_set.is_empty() {
        return Err(MlpError::EmptySplit("training"));
    }
    if val_set.is_empty() {
        return Err(MlpError::EmptySplit("validation"));
    }
    train_on(&train_set, &val_set, &norm, config)
}

pub fn train_on(
    train_set: &[Sample],
    val_set: &[Sample],
    norm: &NormStats,
    config: &NetworkConfig,
) -> Result<(NetworkParams, TrainReport), MlpError> {
    config.validate()?;
    if config.layer_sizes[0] != FEATURE_COUNT {
        return Err(MlpError::InvalidConfig(format!("input width must be {FEATURE_COUNT}")));
    }
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init_params(config, &mut rng);
    let (x_train, y_train) = design_matrix(train_set, norm);
    let (x_val, y_val) = design_matrix(val_set, norm);
    let initial_val_loss = set_loss(&params, config, &x_val, &y_val)?;

    let mut state = AdamState::new(&params, config.adam);
    let mut best = (initial_val_loss, params.clone());
    let mut report = TrainReport {
        train_loss: Vec::with_capacity(config.epochs),
        val_loss: Vec::with_capacity(config.epochs),
        initial_val_loss,
        best_epoch: None,
        wall_time_secs: 0.0,
    };
    let mut order: Vec<usize> = (0..y_train.len()).collect();
    let mut xb = Vec::with_capacity(config.batch_size * FEATURE_COUNT);
    let mut yb = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            xb.clear();
            yb.clear();
            for &i in idx {
                xb.extend_from_slice(&x_train[i * FEATURE_COUNT..(i + 1) * FEATURE_COUNT]);
                yb.push(y_train[i]);
            }
            let diverged = || MlpError::NonFinite { epoch, batch };
            let cache = forward(&params, config, &xb).map_err(|_| diverged())?;
            let l = loss(cache.output(), &yb, &params, config.lambda);
            let grads = backward(&params, config, &cache, &yb, config.lambda)?;
            adam_step(&mut params, &grads, &mut state);
            if !l.is_finite() || !params.is_finite() {
                return Err(diverged());
            }
            epoch_loss += l * idx.len() as f64;
        }
        let val = set_loss(&params, config, &x_val, &y_val).map_err(|_| MlpError::NonFinite {
            epoch,
            batch: order.len().div_ceil(config.batch_size),
        })?;
        report.train_loss.push(epoch_loss / y_train.len() as f64);
        report.val_loss.push(val);
        if val < best.0 {
            best = (val, params.clone());
            report.best_epoch = Some(epoch);
        }
        state.config.alpha *= config.lr_decay;
    }
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok((best.1, report))
}

/// Network output for normalized inputs, without rescaling.
pub fn forward_one(params: &NetworkParams, config: &NetworkConfig, normalized: &[f64; FEATURE_COUNT]) -> Result<f64, MlpError> {
    Ok(forward(params, config, normalized)?.output()[0])
}

/// Concentration in mol/m³: `c0 · net(normalize(features))`.
pub fn predict(params: &NetworkParams, config: &NetworkConfig, norm: &NormStats, features: &Features) -> Result<f64, MlpError> {
    if features.c0 == 0.0 {
        return Ok(0.0);
    }
    Ok(features.c0 * forward_one(params, config, &norm.normalize(features))?)
}

/// Batched [`predict`].
pub fn predict_many(
    params: &NetworkParams,
    config: &NetworkConfig,
    norm: &NormStats,
    features: &[Features],
) -> Result<Vec<f64>, MlpError> {
    let mut inputs = Vec::with_capacity(features.len() * FEATURE_COUNT);
    for f in features {
        inputs.extend_from_slice(&norm.normalize(f));
    }
    let cache = forward(params, config, &inputs)?;
    Ok(cache.output().iter().zip(features).map(|(y, f)| if f.c0 == 0.0 { 0.0 } else { f.c0 * y }).collect())
}

/// Trained network with everything needed to reproduce its predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: NetworkConfig,
    pub layers: Vec<Layer>,
    pub norm: NormStats,
    pub seed: u64,
}

impl Checkpoint {
    pub fn new(params: NetworkParams, config: NetworkConfig, norm: NormStats) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            seed: config.seed,
            config,
            layers: params.layers,
            norm,
        }
    }

    pub fn params(&self) -> NetworkParams {
        NetworkParams {
            layers: self.layers.clone(),
        }
    }

    pub fn predict(&self, features: &Features) -> Result<f64, MlpError> {
        predict(&self.params(), &self.config, &self.norm, features)
    }

    pub fn predict_many(&self, features: &[Features]) -> Result<Vec<f64>, MlpError> {
        predict_many(&self.params(), &self.config, &self.norm, features)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MlpError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| MlpError::MalformedFile(e.to_string()))?;
        match value.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(CHECKPOINT_VERSION) => {}
            Some(found) => {
                return Err(MlpError::VersionMismatch {
                    found,
                    expected: CHECKPOINT_VERSION,
                })
            }
            None => return Err(MlpError::MalformedFile("missing format_version".into())),
        }
        let ck: Checkpoint = serde_json::from_value(value).map_err(|e| MlpError::MalformedFile(e.to_string()))?;
        ck.config.validate().map_err(|e| MlpError::MalformedFile(e.to_string()))?;
        ck.params()
            .check_against(&ck.config)
            .map_err(|e| MlpError::MalformedFile(e.to_string()))?;
        Ok(ck)
    }
}

pub fn save_checkpoint(
    params: &NetworkParams,
    config: &NetworkConfig,
    norm: &NormStats,
    path: &Path,
) -> Result<(), MlpError> {
    let ck = Checkpoint::new(params.clone(), config.clone(), *norm);
    std::fs::write(path, ck.to_json() + "\n")?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, MlpError> {
    Checkpoint::from_json(&std::fs::read_to_string(path)?)
}
