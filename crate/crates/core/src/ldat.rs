//! Latent-domain-aware feedforward classifier.
//!
//! The network input is the acoustic feature vector `v0`, optionally
//! followed by a K-dimensional UBIC vector `d`. The first-layer weight matrix
//! is stored as one row-major block over `[v0 | d]`; its first `input_dim`
//! columns form `W_v` and the last `domain_dim` columns form `W_d`. Because
//! `d` is one-hot, `W_d · d` is a single column of `W_d`, so the first layer
//! computes `W_v · v0 + (W_d[:, j] + b)`: a bias selected by the domain.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domains::UbicVector;
use crate::error::{Error, Result};
use crate::math::{argmax_first, log_sum_exp};
use crate::rng::{derive, seeded};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Sigmoid,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative given the pre-activation `z` and the activation `a = f(z)`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub input_dim: usize,
    /// Number of LDA domains K appended as UBIC; 0 for a baseline network.
    pub domain_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl NetworkConfig {
    /// Baseline configuration with two hidden layers of 64 sigmoid units.
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            domain_dim: 0,
            hidden_dims: vec![64, 64],
            output_dim,
            activation: Activation::Sigmoid,
            seed: 0,
        }
    }
}

/// Affine layer `z = W x + b` with `W` stored row-major (`rows` outputs × `cols` inputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        Self {
            rows,
            cols,
            weights: (0..rows * cols)
                .map(|_| rng.random_range(-limit..limit))
                .collect(),
            bias: vec![0.0; rows],
        }
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.rows {
            let w = &self.weights[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (wi, xi) in w.iter().zip(x) {
                acc += wi * xi;
            }
            out.push(acc + self.bias[r]);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdatNetwork {
    pub input_dim: usize,
    pub domain_dim: usize,
    pub activation: Activation,
    pub layers: Vec<DenseLayer>,
}

/// One labelled frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub ubic: Option<UbicVector>,
    pub label: usize,
}

/// Parameter gradients, shaped like [`LdatNetwork::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &LdatNetwork) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }
}

struct ForwardCache {
    /// `inputs[l]` is the input of layer l (so `inputs[0]` is `[v0 | d]`).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<Vec<f64>>,
}

impl LdatNetwork {
    pub fn new(config: &NetworkConfig) -> Result<Self> {
        if config.input_dim == 0 || config.output_dim == 0 {
            return Err(Error::InvalidArgument(
                "input_dim and output_dim must be >= 1".into(),
            ));
        }
        if config.hidden_dims.contains(&0) {
            return Err(Error::InvalidArgument("hidden layer widths must be >= 1".into()));
        }
        let mut rng = seeded(config.seed);
        let mut widths = vec![config.input_dim + config.domain_dim];
        widths.extend(&config.hidden_dims);
        widths.push(config.output_dim);
        let layers = widths
            .windows(2)
            .map(|w| DenseLayer::glorot(w[1], w[0], &mut rng))
            .collect();
        Ok(Self {
            input_dim: config.input_dim,
            domain_dim: config.domain_dim,
            activation: config.activation,
            layers,
        })
    }

    /// Width of the first layer's input, `input_dim + domain_dim`.
    pub fn input_width(&self) -> usize {
        self.input_dim + self.domain_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.rows).unwrap_or(0)
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .layers
            .first()
            .ok_or_else(|| Error::InvalidArgument("network has no layers".into()))?;
        if first.cols != self.input_width() {
            return Err(Error::dims("first layer columns", self.input_width(), first.cols));
        }
        let mut prev = first.cols;
        for (i, l) in self.layers.iter().enumerate() {
            if l.cols != prev {
                return Err(Error::dims(format!("layer {i} columns"), prev, l.cols));
            }
            if l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(Error::dims(format!("layer {i} parameters"), l.rows * l.cols, l.weights.len()));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("layer {i} has non-finite parameters")));
            }
            prev = l.rows;
        }
        Ok(())
    }

    /// Concatenates `[v0 | d]`, checking that the UBIC is present exactly
    /// when the network is domain-aware and has the right width.
    fn assemble_input(&self, features: &[f64], ubic: Option<&UbicVector>) -> Result<Vec<f64>> {
        if features.len() != self.input_dim {
            return Err(Error::dims("feature vector", self.input_dim, features.len()));
        }
        let mut x = Vec::with_capacity(self.input_width());
        x.extend_from_slice(features);
        match (self.domain_dim, ubic) {
            (0, None) => {}
            (0, Some(_)) => {
                return Err(Error::InvalidArgument(
                    "UBIC supplied to a network without domain inputs".into(),
                ))
            }
            (_, None) => {
                return Err(Error::InvalidArgument(
                    "domain-aware network requires a UBIC vector".into(),
                ))
            }
            (k, Some(u)) => {
                if u.num_domains() != k {
                    return Err(Error::dims("UBIC vector", k, u.num_domains()));
                }
                x.extend(u.to_dense());
            }
        }
        Ok(x)
    }

    fn forward_cached(&self, x: Vec<f64>) -> ForwardCache {
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut current = x;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.rows);
            layer.affine(&current, &mut z);
            let next = if i + 1 < n {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            } else {
                Vec::new()
            };
            inputs.push(current);
            pre.push(z);
            current = next;
        }
        ForwardCache { inputs, pre }
    }

    /// Softmax class posteriors for one frame.
    pub fn forward(&self, features: &[f64], ubic: Option<&UbicVector>) -> Result<Vec<f64>> {
        let x = self.assemble_input(features, ubic)?;
        let cache = self.forward_cached(x);
        let logits = cache.pre.last().expect("network has layers");
        let lse = log_sum_exp(logits);
        Ok(logits.iter().map(|z| (z - lse).exp()).collect())
    }

    pub fn predict(&self, features: &[f64], ubic: Option<&UbicVector>) -> Result<usize> {
        let x = self.assemble_input(features, ubic)?;
        let cache = self.forward_cached(x);
        Ok(argmax_first(cache.pre.last().expect("network has layers")))
    }

    /// Pre-activations of every layer (the last one holds the logits).
    pub fn preactivations(
        &self,
        features: &[f64],
        ubic: Option<&UbicVector>,
    ) -> Result<Vec<Vec<f64>>> {
        let x = self.assemble_input(features, ubic)?;
        Ok(self.forward_cached(x).pre)
    }

    /// `W_v · v0 + W_d · d + b` for the first layer.
    pub fn first_layer_preactivation(
        &self,
        features: &[f64],
        ubic: Option<&UbicVector>,
    ) -> Result<Vec<f64>> {
        let x = self.assemble_input(features, ubic)?;
        let mut z = Vec::new();
        self.layers[0].affine(&x, &mut z);
        Ok(z)
    }

    /// Column `j` of the domain block `W_d` of the first layer.
    pub fn domain_column(&self, j: usize) -> Result<Vec<f64>> {
        if j >= self.domain_dim {
            return Err(Error::InvalidArgument(format!(
                "domain column {j} out of range for K={}",
                self.domain_dim
            )));
        }
        let l = &self.layers[0];
        Ok((0..l.rows).map(|r| l.weight(r, self.input_dim + j)).collect())
    }

    /// Cross-entropy loss and its gradient for one example.
    pub fn loss_and_gradients(&self, example: &Example) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros_like(self);
        let loss = self.accumulate_gradients(example, &mut grads)?;
        Ok((loss, grads))
    }

    pub fn loss(&self, example: &Example) -> Result<f64> {
        self.check_label(example.label)?;
        let x = self.assemble_input(&example.features, example.ubic.as_ref())?;
        let cache = self.forward_cached(x);
        let logits = cache.pre.last().expect("network has layers");
        Ok(log_sum_exp(logits) - logits[example.label])
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.output_dim() {
            return Err(Error::InvalidArgument(format!(
                "label {label} out of range for {} classes",
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// Backpropagation; adds this example's gradient into `grads` and returns its loss.
    fn accumulate_gradients(&self, example: &Example, grads: &mut Gradients) -> Result<f64> {
        self.check_label(example.label)?;
        let x = self.assemble_input(&example.features, example.ubic.as_ref())?;
        let cache = self.forward_cached(x);
        let logits = cache.pre.last().expect("network has layers");
        let lse = log_sum_exp(logits);
        let loss = lse - logits[example.label];

        // softmax − onehot
        let mut delta: Vec<f64> = logits.iter().map(|z| (z - lse).exp()).collect();
        delta[example.label] -= 1.0;

        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.inputs[l];
            let gw = &mut grads.weights[l];
            for r in 0..layer.rows {
                let dr = delta[r];
                grads.bias[l][r] += dr;
                if dr == 0.0 {
                    continue;
                }
                let row = &mut gw[r * layer.cols..(r + 1) * layer.cols];
                for (g, xi) in row.iter_mut().zip(input) {
                    *g += dr * xi;
                }
            }
            if l == 0 {
                break;
            }
            let prev_pre = &cache.pre[l - 1];
            let mut next = vec![0.0; layer.cols];
            for r in 0..layer.rows {
                let dr = delta[r];
                let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                for (n, w) in next.iter_mut().zip(row) {
                    *n += w * dr;
                }
            }
            for (c, n) in next.iter_mut().enumerate() {
                *n *= self.activation.derivative(prev_pre[c], input[c]);
            }
            delta = next;
        }
        Ok(loss)
    }

    fn apply_update(&mut self, grads: &Gradients, step: f64) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (w, g) in layer.weights.iter_mut().zip(&grads.weights[l]) {
                *w -= step * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(&grads.bias[l]) {
                *b -= step * g;
            }
        }
    }
}

/// Builds a domain-aware network from a trained baseline: `W_v`, the
/// first-layer bias and all later layers are copied, and `W_d` starts at
/// zero, so the new network computes exactly what the baseline computes.
pub fn init_augmented_from_baseline(
    baseline: &LdatNetwork,
    num_domains: usize,
) -> Result<LdatNetwork> {
    if baseline.domain_dim != 0 {
        return Err(Error::InvalidArgument(format!(
            "baseline already has {} domain inputs",
            baseline.domain_dim
        )));
    }
    if num_domains == 0 {
        return Err(Error::InvalidArgument("number of domains must be >= 1".into()));
    }
    baseline.validate()?;
    let mut net = baseline.clone();
    net.domain_dim = num_domains;
    let old = &baseline.layers[0];
    let cols = old.cols + num_domains;
    let mut weights = Vec::with_capacity(old.rows * cols);
    for r in 0..old.rows {
        weights.extend_from_slice(&old.weights[r * old.cols..(r + 1) * old.cols]);
        weights.extend(std::iter::repeat_n(0.0, num_domains));
    }
    net.layers[0] = DenseLayer {
        rows: old.rows,
        cols,
        weights,
        bias: old.bias.clone(),
    };
    Ok(net)
}

/// Largest relative-error denominator floor; gradients smaller than this
/// are compared in absolute terms.
pub const GRADIENT_CHECK_FLOOR: f64 = 1e-6;

/// Compares backprop gradients with central finite differences for every
/// parameter (including `W_d`) and returns the largest relative error
/// `|a − n| / max(|a|, |n|, GRADIENT_CHECK_FLOOR)`.
pub fn gradient_check(net: &LdatNetwork, example: &Example, epsilon: f64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    let (_, analytic) = net.loss_and_gradients(example)?;
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    let mut compare = |a: f64, n: f64| {
        let denom = a.abs().max(n.abs()).max(GRADIENT_CHECK_FLOOR);
        worst = worst.max((a - n).abs() / denom);
    };
    for l in 0..net.layers.len() {
        for i in 0..net.layers[l].weights.len() {
            let orig = probe.layers[l].weights[i];
            probe.layers[l].weights[i] = orig + epsilon;
            let up = probe.loss(example)?;
            probe.layers[l].weights[i] = orig - epsilon;
            let down = probe.loss(example)?;
            probe.layers[l].weights[i] = orig;
            compare(analytic.weights[l][i], (up - down) / (2.0 * epsilon));
        }
        for i in 0..net.layers[l].bias.len() {
            let orig = probe.layers[l].bias[i];
            probe.layers[l].bias[i] = orig + epsilon;
            let up = probe.loss(example)?;
            probe.layers[l].bias[i] = orig - epsilon;
            let down = probe.loss(example)?;
            probe.layers[l].bias[i] = orig;
            compare(analytic.bias[l][i], (up - down) / (2.0 * epsilon));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Halve the learning rate after an epoch whose held-out loss went up.
    pub halve_on_cv_increase: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 0.1,
            batch_size: 32,
            halve_on_cv_increase: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub cv_loss: f64,
    pub cv_accuracy: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

/// Mean cross-entropy and frame accuracy. An empty set evaluates to NaN.
pub fn evaluate(net: &LdatNetwork, data: &[Example]) -> Result<Evaluation> {
    if data.is_empty() {
        return Ok(Evaluation {
            loss: f64::NAN,
            accuracy: f64::NAN,
        });
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for ex in data {
        net.check_label(ex.label)?;
        let x = net.assemble_input(&ex.features, ex.ubic.as_ref())?;
        let cache = net.forward_cached(x);
        let logits = cache.pre.last().expect("network has layers");
        loss += log_sum_exp(logits) - logits[ex.label];
        if argmax_first(logits) == ex.label {
            correct += 1;
        }
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        loss: loss / n,
        accuracy: correct as f64 / n,
    })
}

/// Minibatch SGD on per-frame cross-entropy. The sample order of every epoch
/// is drawn from `config.seed`, so runs are reproducible.
pub fn train(
    mut net: LdatNetwork,
    train_set: &[Example],
    cv_set: &[Example],
    config: &TrainConfig,
) -> Result<(LdatNetwork, Vec<EpochMetrics>)> {
    net.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set has no examples".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    if !(config.learning_rate >= 0.0) || !config.learning_rate.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be >= 0, got {}",
            config.learning_rate
        )));
    }
    for ex in train_set.iter().chain(cv_set) {
        net.check_label(ex.label)?;
        net.assemble_input(&ex.features, ex.ubic.as_ref())?;
    }

    let mut lr = config.learning_rate;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut grads = Gradients::zeros_like(&net);
    let mut metrics = Vec::with_capacity(config.epochs);
    let mut prev_cv_loss = f64::INFINITY;
    for epoch in 0..config.epochs {
        order.sort_unstable();
        // stream 0 of a seed is what `LdatNetwork::new` draws from
        order.shuffle(&mut derive(config.seed, epoch as u64 + 1));
        let mut total_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.weights.iter_mut().flatten().for_each(|g| *g = 0.0);
            grads.bias.iter_mut().flatten().for_each(|g| *g = 0.0);
            for &i in batch {
                let loss = net.accumulate_gradients(&train_set[i], &mut grads)?;
                if !loss.is_finite() {
                    return Err(Error::Numerical(format!(
                        "training loss became {loss} in epoch {epoch} (learning rate {lr})"
                    )));
                }
                total_loss += loss;
            }
            net.apply_update(&grads, lr / batch.len() as f64);
        }
        let train_loss = total_loss / train_set.len() as f64;
        let cv = evaluate(&net, cv_set)?;
        metrics.push(EpochMetrics {
            epoch,
            train_loss,
            cv_loss: cv.loss,
            cv_accuracy: cv.accuracy,
            learning_rate: lr,
        });
        log::debug!(
            "epoch {epoch}: train loss {train_loss:.5}, cv accuracy {:.4}",
            cv.accuracy
        );
        if config.halve_on_cv_increase && cv.loss.is_finite() {
            if cv.loss > prev_cv_loss {
                lr /= 2.0;
            }
            prev_cv_loss = cv.loss;
        }
    }
    Ok((net, metrics))
}
