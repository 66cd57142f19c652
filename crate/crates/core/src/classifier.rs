//! Softmax classifier over precomputed sentence vectors.
//!
//! The network is zero to two ReLU hidden layers followed by a linear layer
//! onto the four classes. Training uses mini-batch Adam with global L2
//! gradient clipping and early stopping on dev Macro-F1. Two losses are
//! available: mean cross-entropy, and gold-distance-weighted cross-entropy,
//! which sums each example's cross-entropy scaled by its annotation
//! confidence `alpha`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval;
use crate::polarity::SentimentLabel;
use crate::seed;

const N_CLASSES: usize = SentimentLabel::COUNT;
/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum LossKind {
    #[default]
    #[serde(rename = "ce")]
    CrossEntropy,
    #[serde(rename = "gdw-ce")]
    GoldDistanceWeighted,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ce" | "cross-entropy" => Ok(LossKind::CrossEntropy),
            "gdw-ce" | "gdwce" => Ok(LossKind::GoldDistanceWeighted),
            other => Err(Error::invalid(format!("unknown loss `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainExample {
    pub features: Vec<f64>,
    pub label: SentimentLabel,
    /// Annotation confidence, 1.0 when the data carries none.
    pub alpha: f64,
}

impl TrainExample {
    pub fn new(features: Vec<f64>, label: SentimentLabel) -> Self {
        TrainExample {
            features,
            label,
            alpha: 1.0,
        }
    }
}

/// Dense layer, `weights` row-major with shape `output_dim x input_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub input_dim: usize,
    pub output_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Layer {
            input_dim,
            output_dim,
            weights: vec![0.0; input_dim * output_dim],
            bias: vec![0.0; output_dim],
        }
    }

    fn apply(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.input_dim)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
}

impl ModelParams {
    pub fn zeros(input_dim: usize, hidden_sizes: &[usize]) -> Self {
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden_sizes);
        dims.push(N_CLASSES);
        ModelParams {
            layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        }
    }

    /// Weights and biases uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init(input_dim: usize, hidden_sizes: &[usize], seed_value: u64) -> Self {
        let mut params = Self::zeros(input_dim, hidden_sizes);
        let mut rng = seed::rng_from_seed(seed_value);
        for layer in &mut params.layers {
            let bound = 1.0 / (layer.input_dim as f64).sqrt();
            for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *v = (2.0 * seed::uniform_unit(&mut rng) - 1.0) * bound;
            }
        }
        params
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.output_dim)
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    fn value_mut(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            if index < nw {
                return &mut layer.weights[index];
            }
            index -= nw;
            if index < layer.bias.len() {
                return &mut layer.bias[index];
            }
            index -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn l2_norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let Some(last) = self.layers.last() else {
            return Err(Error::invalid("model has no layers"));
        };
        if last.output_dim != N_CLASSES {
            return Err(Error::invalid(format!("final layer must have {N_CLASSES} outputs")));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.input_dim == 0 || l.weights.len() != l.input_dim * l.output_dim || l.bias.len() != l.output_dim {
                return Err(Error::invalid(format!("layer {i} has inconsistent shapes")));
            }
            if i > 0 && self.layers[i - 1].output_dim != l.input_dim {
                return Err(Error::invalid(format!(
                    "layer {i} input does not chain from layer {}",
                    i - 1
                )));
            }
        }
        if self.values().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameter".into()));
        }
        Ok(())
    }
}

fn softmax(logits: &[f64]) -> [f64; N_CLASSES] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; N_CLASSES];
    let mut sum = 0.0;
    for (o, z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// Layer inputs (post-activation) for backprop, plus the output distribution.
struct Trace {
    inputs: Vec<Vec<f64>>,
    probs: [f64; N_CLASSES],
}

fn forward_trace(params: &ModelParams, features: &[f64]) -> Trace {
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut h = features.to_vec();
    let last = params.layers.len() - 1;
    for (i, layer) in params.layers.iter().enumerate() {
        let mut z = layer.apply(&h);
        if i < last {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        inputs.push(h);
        h = z;
    }
    Trace {
        inputs,
        probs: softmax(&h),
    }
}

pub fn forward(params: &ModelParams, features: &[f64]) -> Result<[f64; N_CLASSES]> {
    if features.len() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            found: features.len(),
        });
    }
    Ok(forward_trace(params, features).probs)
}

pub fn predict(params: &ModelParams, features: &[f64]) -> Result<SentimentLabel> {
    let p = forward(params, features)?;
    Ok(SentimentLabel::ALL[crate::gmm::argmax(p)])
}

fn cross_entropy(probs: &[f64; N_CLASSES], gold: SentimentLabel) -> f64 {
    -probs[gold.index()].max(PROB_FLOOR).ln()
}

/// `sum_i alpha_i * H(predicted_i, gold_i)`.
pub fn loss_gdwce(predicted: &[[f64; N_CLASSES]], gold: &[SentimentLabel], alphas: &[f64]) -> Result<f64> {
    if predicted.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: gold.len(),
        });
    }
    if predicted.len() != alphas.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: alphas.len(),
        });
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::invalid(format!("alpha {a} outside [0, 1]")));
    }
    Ok(predicted
        .iter()
        .zip(gold)
        .zip(alphas)
        .map(|((p, g), a)| a * cross_entropy(p, *g))
        .sum())
}

/// Mean cross-entropy over the batch.
pub fn loss_ce(predicted: &[[f64; N_CLASSES]], gold: &[SentimentLabel]) -> Result<f64> {
    let ones = vec![1.0; predicted.len()];
    let total = loss_gdwce(predicted, gold, &ones)?;
    if predicted.is_empty() {
        return Ok(0.0);
    }
    Ok(total / predicted.len() as f64)
}

/// Batch loss and its gradient with respect to every parameter.
pub fn loss_and_gradient(params: &ModelParams, batch: &[&TrainExample], kind: LossKind) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut grad = ModelParams::zeros(params.input_dim(), &params.hidden_sizes());
    let mut loss = 0.0;
    let last = params.layers.len() - 1;
    for ex in batch {
        if ex.features.len() != params.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: params.input_dim(),
                found: ex.features.len(),
            });
        }
        let weight = match kind {
            LossKind::CrossEntropy => 1.0 / batch.len() as f64,
            LossKind::GoldDistanceWeighted => ex.alpha,
        };
        let trace = forward_trace(params, &ex.features);
        let g = ex.label.index();
        loss += weight * cross_entropy(&trace.probs, ex.label);
        if weight == 0.0 || trace.probs[g] < PROB_FLOOR {
            // floored loss is constant in the parameters
            continue;
        }
        let mut delta: Vec<f64> = trace
            .probs
            .iter()
            .enumerate()
            .map(|(k, p)| weight * (p - if k == g { 1.0 } else { 0.0 }))
            .collect();
        for i in (0..=last).rev() {
            let layer = &params.layers[i];
            let input = &trace.inputs[i];
            let gl = &mut grad.layers[i];
            for (o, d) in delta.iter().enumerate() {
                gl.bias[o] += d;
                let row = &mut gl.weights[o * layer.input_dim..(o + 1) * layer.input_dim];
                for (w, x) in row.iter_mut().zip(input) {
                    *w += d * x;
                }
            }
            if i == 0 {
                break;
            }
            // input[j] > 0 exactly when the ReLU below was active
            delta = (0..layer.input_dim)
                .map(|j| {
                    if input[j] > 0.0 {
                        delta
                            .iter()
                            .enumerate()
                            .map(|(o, d)| d * layer.weights[o * layer.input_dim + j])
                            .sum()
                    } else {
                        0.0
                    }
                })
                .collect();
        }
    }
    Ok((loss, grad))
}

fn batch_loss(params: &ModelParams, batch: &[&TrainExample], kind: LossKind) -> f64 {
    let mut loss = 0.0;
    for ex in batch {
        let w = match kind {
            LossKind::CrossEntropy => 1.0 / batch.len() as f64,
            LossKind::GoldDistanceWeighted => ex.alpha,
        };
        loss += w * cross_entropy(&forward_trace(params, &ex.features).probs, ex.label);
    }
    loss
}

/// Largest relative difference between analytic and central-difference
/// gradients (step `1e-5`) over a seeded sample of at least 50 parameters.
pub fn gradient_check(params: &ModelParams, batch: &[TrainExample], kind: LossKind) -> Result<f64> {
    const H: f64 = 1e-5;
    let refs: Vec<&TrainExample> = batch.iter().collect();
    let (_, grad) = loss_and_gradient(params, &refs, kind)?;
    let analytic: Vec<f64> = grad.values().copied().collect();
    let n = params.num_params();
    let mut indices: Vec<usize> = (0..n).collect();
    seed::shuffle(
        &mut indices,
        &mut seed::rng_from_seed(seed::derive_seed(0, "gradient-check")),
    );
    indices.truncate(n.min(50.max(n / 10)));

    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for i in indices {
        let original = *probe.value_mut(i);
        *probe.value_mut(i) = original + H;
        let plus = batch_loss(&probe, &refs, kind);
        *probe.value_mut(i) = original - H;
        let minus = batch_loss(&probe, &refs, kind);
        *probe.value_mut(i) = original;
        let numeric = (plus - minus) / (2.0 * H);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub clip_norm: f64,
    pub loss_kind: LossKind,
    pub hidden_sizes: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            max_epochs: 100,
            patience: 10,
            clip_norm: 1.0,
            loss_kind: LossKind::CrossEntropy,
            hidden_sizes: Vec::new(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::invalid("batch_size, max_epochs and patience must be positive"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::invalid("clip_norm must be positive"));
        }
        if self.hidden_sizes.len() > 2 || self.hidden_sizes.contains(&0) {
            return Err(Error::invalid("at most two non-empty hidden layers"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// 1-based.
    pub best_epoch: usize,
    pub best_dev_macro_f1: f64,
    pub per_epoch_dev_macro_f1: Vec<f64>,
    pub stopped_early: bool,
}

/// One optimizer step as seen by a training observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub clipped_grad_norm: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut ModelParams, grad: &ModelParams, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (((p, g), m), v) in params
            .values_mut()
            .zip(grad.values())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

fn check_examples(set: &[TrainExample], dim: usize, name: &str) -> Result<()> {
    if set.is_empty() {
        return Err(Error::invalid(format!("{name} set is empty")));
    }
    for ex in set {
        if ex.features.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: ex.features.len(),
            });
        }
        if !(0.0..=1.0).contains(&ex.alpha) {
            return Err(Error::invalid(format!("alpha {} outside [0, 1]", ex.alpha)));
        }
        if ex.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature in {name} set")));
        }
    }
    Ok(())
}

pub fn dev_macro_f1(params: &ModelParams, set: &[TrainExample]) -> Result<f64> {
    let gold: Vec<SentimentLabel> = set.iter().map(|e| e.label).collect();
    let pred = set
        .iter()
        .map(|e| predict(params, &e.features))
        .collect::<Result<Vec<_>>>()?;
    eval::macro_f1(&gold, &pred)
}

pub fn train(
    train_set: &[TrainExample],
    dev_set: &[TrainExample],
    config: &TrainConfig,
) -> Result<(ModelParams, TrainReport)> {
    train_with_observer(train_set, dev_set, config, |_| {})
}

/// As [`train`], calling `observer` after every clipped gradient.
pub fn train_with_observer(
    train_set: &[TrainExample],
    dev_set: &[TrainExample],
    config: &TrainConfig,
    mut observer: impl FnMut(&StepInfo),
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    let dim = train_set.first().map_or(0, |e| e.features.len());
    if dim == 0 {
        return Err(Error::invalid("train set is empty or has zero-width features"));
    }
    check_examples(train_set, dim, "train")?;
    check_examples(dev_set, dim, "dev")?;
    for label in SentimentLabel::ALL {
        if !train_set.iter().any(|e| e.label == label) {
            log::warn!("class `{label}` has no training examples");
        }
    }

    let mut params = ModelParams::init(dim, &config.hidden_sizes, seed::derive_seed(config.seed, "train-init"));
    let mut adam = Adam::new(params.num_params());
    let mut rng = seed::rng_from_seed(seed::derive_seed(config.seed, "train-shuffle"));
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut best = params.clone();
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut stale = 0;
    let mut stopped_early = false;
    let mut step = 0;

    for epoch in 1..=config.max_epochs {
        seed::shuffle(&mut order, &mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&TrainExample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, mut grad) = loss_and_gradient(&params, &batch, config.loss_kind)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}, step {step}")));
            }
            let norm = grad.l2_norm();
            if !norm.is_finite() {
                return Err(Error::NonFinite(format!("gradient at epoch {epoch}, step {step}")));
            }
            if norm > config.clip_norm {
                let scale = config.clip_norm / norm;
                grad.values_mut().for_each(|g| *g *= scale);
            }
            step += 1;
            observer(&StepInfo {
                epoch,
                step,
                loss,
                grad_norm: norm,
                clipped_grad_norm: grad.l2_norm(),
            });
            adam.step(&mut params, &grad, config.learning_rate);
        }

        let f1 = dev_macro_f1(&params, dev_set)?;
        history.push(f1);
        if f1 > best_f1 {
            best_f1 = f1;
            best_epoch = epoch;
            best = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }

    Ok((
        best,
        TrainReport {
            epochs_run: history.len(),
            best_epoch,
            best_dev_macro_f1: best_f1,
            per_epoch_dev_macro_f1: history,
            stopped_early,
        },
    ))
}

/// Ranges sampled by [`random_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub learning_rate_min: f64,
    pub learning_rate_max: f64,
    pub hidden_sizes: Vec<usize>,
    pub layer_counts: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            learning_rate_min: 1e-5,
            learning_rate_max: 1e-2,
            hidden_sizes: vec![64, 128, 256, 512],
            layer_counts: vec![0, 1, 2],
        }
    }
}

impl SearchSpace {
    /// Log-uniform learning rate, uniform hidden size and layer count.
    pub fn sample(&self, base: &TrainConfig, trial: usize, master_seed: u64) -> TrainConfig {
        let mut rng = seed::rng_from_seed(seed::derive_seed(master_seed, &format!("trial-{trial}")));
        let (lo, hi) = (self.learning_rate_min.ln(), self.learning_rate_max.ln());
        let learning_rate = (lo + seed::uniform_unit(&mut rng) * (hi - lo)).exp();
        let hidden = self.hidden_sizes[seed::uniform_index(&mut rng, self.hidden_sizes.len())];
        let layers = self.layer_counts[seed::uniform_index(&mut rng, self.layer_counts.len())];
        TrainConfig {
            learning_rate,
            hidden_sizes: vec![hidden; layers],
            seed: seed::derive_seed(master_seed, &format!("trial-{trial}-train")),
            ..base.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.learning_rate_min > 0.0 && self.learning_rate_min <= self.learning_rate_max) {
            return Err(Error::invalid("learning rate range must be positive and ordered"));
        }
        if self.hidden_sizes.is_empty() || self.layer_counts.is_empty() {
            return Err(Error::invalid("search space choices must be non-empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub config: TrainConfig,
    pub dev_macro_f1: Option<f64>,
    pub eval_macro_f1: Option<f64>,
    pub epochs_run: Option<usize>,
    pub error: Option<String>,
}

/// Trains `n_trials` sampled configurations and keeps the one scoring best
/// on `eval_set`. Failed trials are logged and skipped.
pub fn random_search(
    train_set: &[TrainExample],
    dev_set: &[TrainExample],
    eval_set: &[TrainExample],
    base: &TrainConfig,
    space: &SearchSpace,
    n_trials: usize,
    master_seed: u64,
) -> Result<(ModelParams, Vec<TrialRecord>)> {
    if n_trials == 0 {
        return Err(Error::invalid("n_trials must be at least 1"));
    }
    space.validate()?;
    let mut log = Vec::with_capacity(n_trials);
    let mut best: Option<(f64, ModelParams)> = None;
    for trial in 0..n_trials {
        let config = space.sample(base, trial, master_seed);
        let outcome = train(train_set, dev_set, &config)
            .and_then(|(params, report)| Ok((dev_macro_f1(&params, eval_set)?, params, report)));
        match outcome {
            Ok((eval_f1, params, report)) => {
                log.push(TrialRecord {
                    trial,
                    config,
                    dev_macro_f1: Some(report.best_dev_macro_f1),
                    eval_macro_f1: Some(eval_f1),
                    epochs_run: Some(report.epochs_run),
                    error: None,
                });
                if best.as_ref().is_none_or(|(s, _)| eval_f1 > *s) {
                    best = Some((eval_f1, params));
                }
            }
            Err(e) => {
                log::warn!("trial {trial} failed: {e}");
                log.push(TrialRecord {
                    trial,
                    config,
                    dev_macro_f1: None,
                    eval_macro_f1: None,
                    epochs_run: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let (_, params) = best.ok_or_else(|| Error::invalid("every search trial failed"))?;
    Ok((params, log))
}
