//! Fully connected ReLU network with a softmax output, trained on mean
//! cross-entropy with Adam.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_rows, check_training, cross_entropy, softmax, LearnError, Standardizer};

pub const MLP_VERSION: &str = "bs-mlp-1";

/// Hidden biases start slightly positive so no unit sits exactly on the ReLU kink.
const HIDDEN_BIAS_INIT: f64 = 0.01;
const GRAD_CHECK_STEP: f64 = 1e-5;
const GRAD_CHECK_SAMPLES: usize = 200;
/// Denominator floor for relative gradient error.
const GRAD_CHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    /// Hidden layer widths; input and output widths come from the data.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64],
            epochs: 20,
            learning_rate: 1e-4,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidConfig(m.into()));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("need at least one non-empty hidden layer");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0) {
            return bad("Adam moments must lie in [0, 1) and epsilon be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `[n_out × n_in]`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn forward(&self, a: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.n_in).zip(&self.bias).map(|(w, b)| {
            b + w.iter().zip(a).map(|(wi, ai)| wi * ai).sum::<f64>()
        }));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub version: String,
    pub n_inputs: usize,
    pub n_classes: usize,
    pub layers: Vec<Layer>,
    /// Applied to raw rows before the first layer.
    pub standardizer: Standardizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of the initial parameters.
    pub initial_loss: f64,
    /// Mean mini-batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Validation loss after each epoch, when a validation set was given.
    pub val_losses: Vec<f64>,
    /// Epoch (0-based) whose parameters were kept: lowest validation loss, or
    /// the last epoch without validation data.
    pub best_epoch: usize,
}

/// Gradients shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros(model: &MlpModel) -> Self {
        Self {
            weights: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn scale(&mut self, s: f64) {
        for v in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            v.iter_mut().for_each(|g| *g *= s);
        }
    }

    fn flat(&self, at: usize) -> f64 {
        let mut k = at;
        for (w, b) in self.weights.iter().zip(&self.bias) {
            if k < w.len() {
                return w[k];
            }
            k -= w.len();
            if k < b.len() {
                return b[k];
            }
            k -= b.len();
        }
        panic!("parameter index {at} out of range")
    }
}

impl MlpModel {
    /// Freshly initialised network with an identity standardiser. Weights are
    /// uniform in `±sqrt(6 / fan_in)`.
    pub fn init(n_inputs: usize, n_classes: usize, cfg: &MlpConfig) -> Result<Self, LearnError> {
        cfg.validate()?;
        if n_inputs == 0 || n_classes < 2 {
            return Err(LearnError::InvalidConfig("need inputs and at least two classes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut sizes = vec![n_inputs];
        sizes.extend(&cfg.hidden);
        sizes.push(n_classes);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let bound = (6.0 / w[0] as f64).sqrt();
                Layer {
                    n_in: w[0],
                    n_out: w[1],
                    weights: (0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)).collect(),
                    bias: vec![if i < last { HIDDEN_BIAS_INIT } else { 0.0 }; w[1]],
                }
            })
            .collect();
        Ok(Self {
            version: MLP_VERSION.into(),
            n_inputs,
            n_classes,
            layers,
            standardizer: Standardizer {
                mean: vec![0.0; n_inputs],
                std: vec![1.0; n_inputs],
            },
        })
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn param_mut(&mut self, at: usize) -> &mut f64 {
        let mut k = at;
        for l in &mut self.layers {
            if k < l.weights.len() {
                return &mut l.weights[k];
            }
            k -= l.weights.len();
            if k < l.bias.len() {
                return &mut l.bias[k];
            }
            k -= l.bias.len();
        }
        panic!("parameter index {at} out of range")
    }

    /// Class probabilities for one already-standardised row.
    fn forward_std(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let mut z = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            l.forward(&a, &mut z);
            if i + 1 < self.layers.len() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut a, &mut z);
        }
        softmax(&mut a);
        a
    }

    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, LearnError> {
        check_rows(x, Some(self.n_inputs))?;
        Ok(x.par_iter()
            .map(|r| self.forward_std(&self.standardizer.transform_row(r)))
            .collect())
    }

    /// Mean cross-entropy and its gradient over standardised rows.
    pub fn loss_and_grad(&self, xs: &[&[f64]], ys: &[usize]) -> (f64, Gradients) {
        let mut grads = Gradients::zeros(self);
        let mut loss = 0.0;
        let n_layers = self.layers.len();
        let mut acts: Vec<Vec<f64>> = vec![Vec::new(); n_layers + 1];
        for (x, &y) in xs.iter().zip(ys) {
            acts[0].clear();
            acts[0].extend_from_slice(x);
            for (i, l) in self.layers.iter().enumerate() {
                let (head, tail) = acts.split_at_mut(i + 1);
                l.forward(&head[i], &mut tail[0]);
                if i + 1 < n_layers {
                    tail[0].iter_mut().for_each(|v| *v = v.max(0.0));
                }
            }
            let mut delta = acts[n_layers].clone();
            softmax(&mut delta);
            loss -= delta[y].max(f64::MIN_POSITIVE).ln();
            delta[y] -= 1.0;
            for i in (0..n_layers).rev() {
                let l = &self.layers[i];
                let a_prev = &acts[i];
                let gw = &mut grads.weights[i];
                for (o, d) in delta.iter().enumerate() {
                    if *d != 0.0 {
                        let row = &mut gw[o * l.n_in..(o + 1) * l.n_in];
                        row.iter_mut().zip(a_prev).for_each(|(g, a)| *g += d * a);
                    }
                    grads.bias[i][o] += d;
                }
                if i > 0 {
                    let mut prev = vec![0.0; l.n_in];
                    for (o, d) in delta.iter().enumerate() {
                        let row = &l.weights[o * l.n_in..(o + 1) * l.n_in];
                        prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
                    }
                    // ReLU derivative, zero at the kink
                    prev.iter_mut().zip(a_prev).for_each(|(p, a)| {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    });
                    delta = prev;
                }
            }
        }
        let n = xs.len().max(1) as f64;
        grads.scale(1.0 / n);
        (loss / n, grads)
    }

    /// Reorder output classes: class `c` of the result is class `perm[c]` of `self`.
    pub fn permute_classes(&self, perm: &[usize]) -> MlpModel {
        let mut m = self.clone();
        let last = m.layers.last_mut().expect("at least one layer");
        let src = self.layers.last().expect("at least one layer");
        for (c, &p) in perm.iter().enumerate() {
            last.weights[c * src.n_in..(c + 1) * src.n_in]
                .copy_from_slice(&src.weights[p * src.n_in..(p + 1) * src.n_in]);
            last.bias[c] = src.bias[p];
        }
        m
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let m: MlpModel = serde_json::from_str(text)?;
        if m.version != MLP_VERSION {
            return Err(LearnError::Version(m.version));
        }
        Ok(m)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, model: &mut MlpModel, grads: &Gradients, cfg: &MlpConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let params = model
            .layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()));
        let g = grads
            .weights
            .iter()
            .zip(&grads.bias)
            .flat_map(|(w, b)| w.iter().chain(b.iter()));
        for (((p, g), m), v) in params.zip(g).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
        }
    }
}

fn mean_loss(model: &MlpModel, xs: &[Vec<f64>], ys: &[usize]) -> f64 {
    let probs: Vec<Vec<f64>> = xs.iter().map(|r| model.forward_std(r)).collect();
    cross_entropy(&probs, ys)
}

/// Continue training `model` on `(x, y)`. The standardiser is refitted on `x`.
/// With validation data the parameters of the lowest-validation-loss epoch are
/// returned.
pub fn train_mlp_from(
    mut model: MlpModel,
    x: &[Vec<f64>],
    y: &[usize],
    val: Option<(&[Vec<f64>], &[usize])>,
    cfg: &MlpConfig,
) -> Result<(MlpModel, TrainReport), LearnError> {
    cfg.validate()?;
    let width = check_training(x, y, model.n_classes)?;
    if width != model.n_inputs {
        return Err(LearnError::ShapeMismatch {
            expected: model.n_inputs,
            got: width,
        });
    }
    model.standardizer = Standardizer::fit(x);
    let xs = model.standardizer.transform(x);
    let val_std = match val {
        Some((vx, vy)) => {
            check_rows(vx, Some(model.n_inputs))?;
            Some((model.standardizer.transform(vx), vy))
        }
        None => None,
    };

    let initial_loss = mean_loss(&model, &xs, y);
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order_rng.set_stream(1);
    let mut adam = Adam::new(model.n_params());
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut report = TrainReport {
        initial_loss,
        epoch_losses: Vec::with_capacity(cfg.epochs),
        val_losses: Vec::new(),
        best_epoch: cfg.epochs - 1,
    };
    let mut best: Option<(f64, MlpModel)> = None;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let bx: Vec<&[f64]> = batch.iter().map(|&i| xs[i].as_slice()).collect();
            let by: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let (loss, grads) = model.loss_and_grad(&bx, &by);
            if !loss.is_finite() {
                return Err(LearnError::NonFiniteLoss { epoch });
            }
            total += loss * batch.len() as f64;
            adam.step(&mut model, &grads, cfg);
        }
        report.epoch_losses.push(total / xs.len() as f64);
        if let Some((vx, vy)) = &val_std {
            let vl = mean_loss(&model, vx, vy);
            report.val_losses.push(vl);
            if best.as_ref().is_none_or(|(b, _)| vl < *b) {
                best = Some((vl, model.clone()));
                report.best_epoch = epoch;
            }
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    Ok((model, report))
}

pub fn train_mlp(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    cfg: &MlpConfig,
) -> Result<(MlpModel, TrainReport), LearnError> {
    cfg.validate()?;
    let width = check_training(x, y, n_classes)?;
    train_mlp_from(MlpModel::init(width, n_classes, cfg)?, x, y, None, cfg)
}

pub fn train_mlp_with_validation(
    x: &[Vec<f64>],
    y: &[usize],
    val_x: &[Vec<f64>],
    val_y: &[usize],
    n_classes: usize,
    cfg: &MlpConfig,
) -> Result<(MlpModel, TrainReport), LearnError> {
    cfg.validate()?;
    let width = check_training(x, y, n_classes)?;
    let val = (!val_x.is_empty()).then_some((val_x, val_y));
    train_mlp_from(MlpModel::init(width, n_classes, cfg)?, x, y, val, cfg)
}

/// Largest relative error between back-propagated gradients and central
/// differences (step 1e-5) over a seeded sample of at least 100 parameters
/// (all of them when the model is smaller). Rows are standardised with the
/// model's standardiser first. Relative error is `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check(model: &MlpModel, x: &[Vec<f64>], y: &[usize]) -> f64 {
    assert!(!x.is_empty(), "grad_check needs a non-empty batch");
    let xs = model.standardizer.transform(x);
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let (_, grads) = model.loss_and_grad(&refs, y);
    let n = model.n_params();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
    let picks = sample(&mut rng, n, GRAD_CHECK_SAMPLES.min(n)).into_vec();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for at in picks {
        let orig = *probe.param_mut(at);
        *probe.param_mut(at) = orig + GRAD_CHECK_STEP;
        let up = probe.loss_and_grad(&refs, y).0;
        *probe.param_mut(at) = orig - GRAD_CHECK_STEP;
        let down = probe.loss_and_grad(&refs, y).0;
        *probe.param_mut(at) = orig;
        let numeric = (up - down) / (2.0 * GRAD_CHECK_STEP);
        let analytic = grads.flat(at);
        let denom = analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    worst
}
