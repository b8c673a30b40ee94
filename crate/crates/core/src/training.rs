//! Losses, the adaptive-moment optimizer and the epoch loop.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{backward, forward, NetworkParams, NetworkSpec, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Target {
    Regression(f64),
    Class(usize),
}

/// One input sequence (`T x C`) with its target.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Array2<f64>,
    pub target: Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Squared error on the final readout potential.
    #[default]
    Mse,
    /// Softmax cross-entropy on per-class peak readout potential.
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub loss: LossKind,
    /// Multiplier on the uniform weight-init bound.
    pub init_gain: f64,
    /// Global gradient-norm clip applied per batch.
    pub clip_norm: Option<f64>,
    /// Stop once the epoch loss falls below this value.
    pub target_loss: Option<f64>,
    /// Learning rate is multiplied by this factor after every epoch.
    pub lr_decay: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            batch_size: 32,
            epochs: 10,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            loss: LossKind::Mse,
            init_gain: 1.0,
            clip_norm: None,
            target_loss: None,
            lr_decay: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config("lr_decay must lie in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("moment coefficients must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// `(u_T - target)^2` on the last readout potential. Returns the loss and
/// `dL/du` for every step.
pub fn loss_mse_readout(readout: &Array2<f64>, target: f64) -> Result<(f64, Array2<f64>)> {
    if readout.ncols() != 1 {
        return Err(Error::Contract(format!(
            "squared-error readout expects one neuron, got {}",
            readout.ncols()
        )));
    }
    let last = readout.nrows() - 1;
    let diff = readout[[last, 0]] - target;
    let mut grad = Array2::zeros(readout.dim());
    grad[[last, 0]] = 2.0 * diff;
    Ok((diff * diff, grad))
}

/// Per-class peak readout potential and the step where it occurs.
pub fn class_scores(readout: &Array2<f64>) -> Vec<(f64, usize)> {
    readout
        .columns()
        .into_iter()
        .map(|col| {
            col.iter()
                .enumerate()
                .fold((f64::NEG_INFINITY, 0), |(best, at), (k, &v)| if v > best { (v, k) } else { (best, at) })
        })
        .collect()
}

/// Cross-entropy over the per-class peak potentials.
pub fn loss_classification(readout: &Array2<f64>, label: usize) -> Result<(f64, Array2<f64>)> {
    let classes = readout.ncols();
    if label >= classes {
        return Err(Error::Data(format!("label {label} outside {classes} classes")));
    }
    let scores = class_scores(readout);
    let max = scores.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s.0 - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    let loss = z.ln() + max - scores[label].0;
    let mut grad = Array2::zeros(readout.dim());
    for (c, (&e, &(_, at))) in exp.iter().zip(&scores).enumerate() {
        let p = e / z;
        grad[[at, c]] = p - if c == label { 1.0 } else { 0.0 };
    }
    Ok((loss, grad))
}

pub fn predict_class(readout: &Array2<f64>) -> usize {
    class_scores(readout)
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, s)| if s.0 > bv { (i, s.0) } else { (bi, bv) })
        .0
}

pub fn sample_loss(kind: LossKind, readout: &Array2<f64>, target: Target) -> Result<(f64, Array2<f64>)> {
    match (kind, target) {
        (LossKind::Mse, Target::Regression(y)) => loss_mse_readout(readout, y),
        (LossKind::CrossEntropy, Target::Class(c)) => loss_classification(readout, c),
        (LossKind::Mse, Target::Class(c)) => loss_mse_readout(readout, c as f64),
        (LossKind::CrossEntropy, Target::Regression(_)) => Err(Error::Config(
            "cross-entropy loss needs class labels".into(),
        )),
    }
}

/// Adaptive-moment optimizer over the flattened parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(params: &NetworkParams, hp: &Hyperparams) -> Self {
        let n = params.len();
        Self {
            lr: hp.learning_rate,
            beta1: hp.beta1,
            beta2: hp.beta2,
            eps: hp.eps,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    /// Applies one update. Masked entries are forced back to zero.
    pub fn step(&mut self, params: &mut NetworkParams, grads: &NetworkParams) {
        self.step += 1;
        let g = grads.to_flat();
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let (lr, b1, b2, eps) = (self.lr, self.beta1, self.beta2, self.eps);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut off = 0;
        params.for_each_tensor_mut(|t, mask| {
            for (i, x) in t.iter_mut().enumerate() {
                let idx = off + i;
                if mask.is_some_and(|mk| !mk[i]) {
                    *x = 0.0;
                    continue;
                }
                m[idx] = b1 * m[idx] + (1.0 - b1) * g[idx];
                v[idx] = b2 * v[idx] + (1.0 - b2) * g[idx] * g[idx];
                let mh = m[idx] / bc1;
                let vh = v[idx] / bc2;
                *x -= lr * mh / (vh.sqrt() + eps);
            }
            off += t.len();
        });
    }
}

/// Loss and gradient for one sample.
pub fn sample_gradient(
    spec: &NetworkSpec,
    params: &NetworkParams,
    sample: &Sample,
    loss: LossKind,
) -> Result<(f64, NetworkParams, Tape)> {
    let tape = forward(spec, params, &sample.input)?;
    let (l, g) = sample_loss(loss, &tape.readout, sample.target)?;
    let grads = backward(spec, params, &tape, &g)?;
    Ok((l, grads, tape))
}

/// Mean loss and mean gradient over a batch. Per-sample work runs in
/// parallel; the reduction is an ordered sum so the result does not depend
/// on the worker count.
pub fn batch_gradient(
    spec: &NetworkSpec,
    params: &NetworkParams,
    batch: &[&Sample],
    loss: LossKind,
) -> Result<(f64, NetworkParams)> {
    let parts: Vec<(f64, NetworkParams)> = batch
        .par_iter()
        .map(|s| sample_gradient(spec, params, s, loss).map(|(l, g, _)| (l, g)))
        .collect::<Result<_>>()?;
    let mut total = params.zeros_like();
    let mut loss_sum = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for (l, g) in &parts {
        loss_sum += l;
        total.add_scaled(g, scale);
    }
    Ok((loss_sum * scale, total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: Option<f64>,
    /// Mean spikes per timestep for each hidden layer.
    pub spikes_per_step: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub metrics: Vec<EpochMetrics>,
}

/// Trains freshly initialised parameters.
pub fn train(spec: &NetworkSpec, data: &[Sample], hp: &Hyperparams) -> Result<TrainOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let params = NetworkParams::init(spec, hp.init_gain, &mut rng)?;
    train_from(spec, params, data, hp)
}

/// Continues training from `params`. Metrics for each epoch are measured on
/// the full training set with the parameters at the end of that epoch.
pub fn train_from(
    spec: &NetworkSpec,
    mut params: NetworkParams,
    data: &[Sample],
    hp: &Hyperparams,
) -> Result<TrainOutcome> {
    hp.validate()?;
    spec.validate()?;
    params.check(spec)?;
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed ^ 0x5eed_0f_da7a);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut opt = Adam::new(&params, hp);
    let mut metrics = Vec::with_capacity(hp.epochs);

    for epoch in 0..hp.epochs {
        opt.set_learning_rate(hp.learning_rate * hp.lr_decay.powi(epoch as i32));
        order.shuffle(&mut rng);
        for chunk in order.chunks(hp.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, mut grads) = batch_gradient(spec, &params, &batch, hp.loss)?;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite loss {loss} in epoch {epoch}"
                )));
            }
            if let Some(max_norm) = hp.clip_norm {
                clip_gradient(&mut grads, max_norm);
            }
            opt.step(&mut params, &grads);
            if !params.all_finite() {
                return Err(Error::Divergence(format!(
                    "parameters became non-finite in epoch {epoch}"
                )));
            }
        }
        let eval = evaluate(spec, &params, data, hp.loss)?;
        let m = EpochMetrics {
            epoch,
            loss: eval.loss,
            accuracy: eval.accuracy,
            spikes_per_step: eval.spikes_per_step,
        };
        let done = hp.target_loss.is_some_and(|t| m.loss < t);
        metrics.push(m);
        if done {
            break;
        }
    }
    Ok(TrainOutcome { params, metrics })
}

fn clip_gradient(grads: &mut NetworkParams, max_norm: f64) {
    let mut sq = 0.0;
    grads.for_each_tensor(|t, _| sq += t.iter().map(|x| x * x).sum::<f64>());
    let norm = sq.sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.for_each_tensor_mut(|t, _| t.iter_mut().for_each(|x| *x *= s));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalMetrics {
    pub loss: f64,
    pub accuracy: Option<f64>,
    pub spikes_per_step: Vec<f64>,
    pub activity: crate::hwcost::ActivityTrace,
}

/// Mean loss, accuracy (for labelled data) and spiking activity.
pub fn evaluate(spec: &NetworkSpec, params: &NetworkParams, data: &[Sample], loss: LossKind) -> Result<EvalMetrics> {
    if data.is_empty() {
        return Err(Error::Data("evaluation set is empty".into()));
    }
    let results: Vec<(f64, Option<bool>, Tape)> = data
        .par_iter()
        .map(|s| {
            let tape = forward(spec, params, &s.input)?;
            let (l, _) = sample_loss(loss, &tape.readout, s.target)?;
            let hit = match s.target {
                Target::Class(c) => Some(predict_class(&tape.readout) == c),
                Target::Regression(_) => None,
            };
            Ok((l, hit, tape))
        })
        .collect::<Result<_>>()?;
    let n = results.len() as f64;
    let loss_mean = results.iter().map(|r| r.0).sum::<f64>() / n;
    let accuracy = if results.iter().all(|r| r.1.is_some()) {
        Some(results.iter().filter(|r| r.1 == Some(true)).count() as f64 / n)
    } else {
        None
    };
    let tapes: Vec<&Tape> = results.iter().map(|r| &r.2).collect();
    let activity = crate::hwcost::ActivityTrace::from_tapes(&tapes);
    let spikes_per_step = activity.layers.iter().map(|l| l.avg_per_step).collect();
    Ok(EvalMetrics {
        loss: loss_mean,
        accuracy,
        spikes_per_step,
        activity,
    })
}
