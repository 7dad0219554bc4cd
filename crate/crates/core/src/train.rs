//! Minibatch SGD with momentum, softmax cross-entropy, and top-1 evaluation.

use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{BatchIter, Dataset};
use crate::error::{Error, Result};
use crate::mlp::{MlpModel, Params, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    /// `lr0 · ½(1 + cos(π · step / total_steps))`.
    #[default]
    Cosine,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    /// f64: exact enough for finite-difference checks.
    Double,
    /// f32: experiment runs.
    #[default]
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr_schedule: LrSchedule,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 128,
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 5e-4,
            lr_schedule: LrSchedule::Cosine,
            seed: 0,
            precision: Precision::Single,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::Config("weight decay must be non-negative".into()));
        }
        Ok(())
    }

    /// Learning rate for 0-based `step` out of `total_steps`.
    pub fn lr_at(&self, step: usize, total_steps: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::Cosine => {
                let t = step as f64 / total_steps.max(1) as f64;
                self.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub top1_error_percent: f64,
    pub loss: f64,
    pub n_examples: usize,
}

/// One line of the per-epoch JSON-lines log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_top1: f64,
    pub lr: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub final_eval: EvalResult,
    pub log: Vec<EpochLog>,
    pub steps: usize,
}

/// Per-row cross-entropy and the gradient of the mean loss w.r.t. logits.
fn softmax_cross_entropy<F: Scalar>(logits: ArrayView2<F>, labels: &[usize]) -> (Vec<F>, Array2<F>) {
    let batch = F::cast_from(logits.nrows() as f64);
    let mut d_logits = Array2::<F>::zeros(logits.raw_dim());
    let mut losses = Vec::with_capacity(labels.len());
    for ((row, mut d_row), &y) in logits.rows().into_iter().zip(d_logits.rows_mut()).zip(labels) {
        let max = row.iter().fold(F::neg_infinity(), |m, &v| m.max(v));
        let mut sum = F::zero();
        for (d, &v) in d_row.iter_mut().zip(row.iter()) {
            *d = (v - max).exp();
            sum += *d;
        }
        losses.push(sum.ln() + max - row[y]);
        for d in d_row.iter_mut() {
            *d = *d / sum / batch;
        }
        d_row[y] -= F::one() / batch;
    }
    (losses, d_logits)
}

/// Mean softmax cross-entropy over the batch and its exact gradients.
pub fn loss_and_grads<F: Scalar>(
    model: &MlpModel<F>,
    x: ArrayView2<F>,
    labels: &[usize],
) -> Result<(F, Params<F>)> {
    check_labels(model, x.nrows(), labels)?;
    let cache = model.forward(x)?;
    let (losses, d_logits) = softmax_cross_entropy(cache.logits.view(), labels);
    let mut total = F::zero();
    for l in &losses {
        total += *l;
    }
    let loss = total / F::cast_from(losses.len() as f64);
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("loss is {loss}")));
    }
    let grads = model.backward(&cache, d_logits.view());
    Ok((loss, grads))
}

/// Mean loss without gradients.
pub fn batch_loss<F: Scalar>(model: &MlpModel<F>, x: ArrayView2<F>, labels: &[usize]) -> Result<F> {
    check_labels(model, x.nrows(), labels)?;
    let logits = model.logits(x)?;
    let (losses, _) = softmax_cross_entropy(logits.view(), labels);
    let mut total = F::zero();
    for l in &losses {
        total += *l;
    }
    Ok(total / F::cast_from(losses.len() as f64))
}

fn check_labels<F: Scalar>(model: &MlpModel<F>, rows: usize, labels: &[usize]) -> Result<()> {
    if rows != labels.len() || rows == 0 {
        return Err(Error::Shape(format!("{rows} rows for {} labels", labels.len())));
    }
    let out = model.config().out_dim;
    if let Some(&bad) = labels.iter().find(|&&y| y >= out) {
        return Err(Error::Shape(format!("label {bad} outside 0..{out}")));
    }
    Ok(())
}

/// SGD with heavy-ball momentum and decoupled-from-bias weight decay:
/// `v ← μ v + g + λ w`, `w ← w − lr v`.
#[derive(Debug, Clone)]
pub struct Sgd<F> {
    velocity: Params<F>,
    momentum: F,
    weight_decay: F,
}

impl<F: Scalar> Sgd<F> {
    pub fn new(model: &MlpModel<F>, config: &TrainConfig) -> Self {
        Sgd {
            velocity: model.params().zeros_like(),
            momentum: F::cast_from(config.momentum),
            weight_decay: F::cast_from(config.weight_decay),
        }
    }

    pub fn velocity(&self) -> &Params<F> {
        &self.velocity
    }

    /// Applies one update with learning rate `lr` and restores the mask.
    pub fn step(&mut self, model: &mut MlpModel<F>, grads: &Params<F>, lr: f64) -> Result<()> {
        let lr = F::cast_from(lr);
        let params = model.params_mut();
        for id in params.ids() {
            let g = grads.get(id);
            let v = self.velocity.get_mut(id);
            let w = params.get_mut(id);
            if g.len() != w.len() {
                return Err(Error::Shape(format!("gradient for {id:?} has wrong size")));
            }
            let decay = if id.is_bias() { F::zero() } else { self.weight_decay };
            for ((w, v), &g) in w.iter_mut().zip(v.iter_mut()).zip(g) {
                *v = self.momentum * *v + g + decay * *w;
                *w -= lr * *v;
            }
        }
        model.apply_mask();
        Ok(())
    }
}

/// One optimizer update at 0-based `step` of `total_steps`.
pub fn sgd_step<F: Scalar>(
    model: &mut MlpModel<F>,
    optimizer: &mut Sgd<F>,
    grads: &Params<F>,
    config: &TrainConfig,
    step: usize,
    total_steps: usize,
) -> Result<()> {
    optimizer.step(model, grads, config.lr_at(step, total_steps))
}

const EVAL_CHUNK: usize = 1000;

/// Index of the largest logit; ties resolve to the lowest class index.
pub fn argmax<F: Scalar>(row: ndarray::ArrayView1<F>) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

pub fn evaluate<F: Scalar>(model: &MlpModel<F>, ds: &Dataset) -> Result<EvalResult> {
    if ds.is_empty() {
        return Err(Error::Shape("cannot evaluate on an empty dataset".into()));
    }
    let mut wrong = 0usize;
    let mut loss_sum = 0f64;
    let mut start = 0;
    while start < ds.len() {
        let end = (start + EVAL_CHUNK).min(ds.len());
        let (x, y) = ds.slice::<F>(start, end);
        check_labels(model, x.nrows(), &y)?;
        let logits = model.logits(x.view())?;
        let (losses, _) = softmax_cross_entropy(logits.view(), &y);
        loss_sum += losses.iter().map(|l| l.as_f64()).sum::<f64>();
        wrong += logits
            .axis_iter(Axis(0))
            .zip(&y)
            .filter(|(row, &label)| argmax(row.view()) != label)
            .count();
        start = end;
    }
    Ok(EvalResult {
        top1_error_percent: 100.0 * wrong as f64 / ds.len() as f64,
        loss: loss_sum / ds.len() as f64,
        n_examples: ds.len(),
    })
}

pub fn train<F: Scalar>(
    model: &mut MlpModel<F>,
    train_set: &Dataset,
    test_set: &Dataset,
    config: &TrainConfig,
) -> Result<TrainReport> {
    train_with(model, train_set, test_set, config, |_, _| {})
}

/// [`train`] with a callback after every epoch's evaluation.
pub fn train_with<F: Scalar>(
    model: &mut MlpModel<F>,
    train_set: &Dataset,
    test_set: &Dataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog, &MlpModel<F>),
) -> Result<TrainReport> {
    config.validate()?;
    let cfg = model.config();
    if train_set.dim() != cfg.in_dim || test_set.dim() != cfg.in_dim {
        return Err(Error::Shape(format!(
            "dataset dimension {} / {} does not match model input {}",
            train_set.dim(),
            test_set.dim(),
            cfg.in_dim
        )));
    }
    if train_set.classes() > cfg.out_dim {
        return Err(Error::Shape(format!(
            "{} classes exceed model output {}",
            train_set.classes(),
            cfg.out_dim
        )));
    }
    let steps_per_epoch = train_set.len().div_ceil(config.batch_size);
    let total_steps = steps_per_epoch * config.epochs;
    let mut optimizer = Sgd::new(model, config);
    let mut log = Vec::with_capacity(config.epochs);
    let mut step = 0;
    let mut last_eval = None;
    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut loss_sum = 0f64;
        let mut lr = config.lr_at(step, total_steps);
        for idx in BatchIter::new(train_set.len(), config.batch_size, config.seed, epoch)? {
            let (x, y) = train_set.gather::<F>(&idx);
            let (loss, grads) = loss_and_grads(model, x.view(), &y).map_err(|e| match e {
                Error::Numeric(msg) => {
                    Error::Numeric(format!("epoch {epoch}, step {step}: {msg}"))
                }
                other => other,
            })?;
            loss_sum += loss.as_f64() * idx.len() as f64;
            lr = config.lr_at(step, total_steps);
            optimizer.step(model, &grads, lr)?;
            step += 1;
        }
        let eval = evaluate(model, test_set)?;
        let entry = EpochLog {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            test_top1: eval.top1_error_percent,
            lr,
            wall_ms: started.elapsed().as_millis() as u64,
        };
        log::debug!(
            "epoch {epoch}: train loss {:.4}, test top-1 error {:.2}%",
            entry.train_loss,
            entry.test_top1
        );
        on_epoch(&entry, model);
        log.push(entry);
        last_eval = Some(eval);
    }
    Ok(TrainReport {
        final_eval: last_eval.expect("at least one epoch"),
        log,
        steps: step,
    })
}
