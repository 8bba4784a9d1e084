use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::curve::{MetricCurve, Recording};
use crate::nn::model::{init_model, row_losses_and_predictions, Network};
use crate::nn::optim::{optimizer_step, AdamState};
use crate::seed;
use crate::topology::LabeledDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub init_scale: f64,
    pub hidden: Vec<usize>,
    pub max_epochs: usize,
    /// 0 selects full-batch training.
    pub batch_size: usize,
    pub eval_interval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            init_scale: 8.0,
            hidden: vec![200, 200],
            max_epochs: 50_000,
            batch_size: 0,
            eval_interval: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(
                "learning_rate",
                format!("must be positive, got {}", self.learning_rate),
            ));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid(
                "weight_decay",
                format!("must be non-negative, got {}", self.weight_decay),
            ));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::invalid(
                "init_scale",
                format!("must be positive, got {}", self.init_scale),
            ));
        }
        if self.eval_interval == 0 {
            return Err(Error::invalid("eval_interval", "must be at least 1"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden", "layer widths must be positive"));
        }
        Ok(())
    }

    pub fn widths(&self, input: usize, classes: usize) -> Vec<usize> {
        std::iter::once(input)
            .chain(self.hidden.iter().copied())
            .chain(std::iter::once(classes))
            .collect()
    }

    fn records_at(&self, epoch: usize) -> bool {
        epoch.is_multiple_of(self.eval_interval) || epoch == self.max_epochs
    }
}

/// A run that stopped early on a non-finite value; `partial` holds every
/// recording made before the failure.
#[derive(Debug)]
pub struct TrainError {
    pub error: Error,
    pub partial: Box<MetricCurve>,
}

impl std::fmt::Display for TrainError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} recordings kept)", self.error, self.partial.len())
    }
}

impl std::error::Error for TrainError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for TrainError {
    fn from(error: Error) -> Self {
        TrainError {
            error,
            partial: Box::default(),
        }
    }
}

/// Mean loss, accuracy and per-subclass accuracy of `model` on a dataset.
pub fn evaluate<N: Network>(model: &N, data: &LabeledDataset) -> Result<(f64, f64, Vec<f64>)> {
    let n = data.len();
    let m = data.num_subclasses();
    if n == 0 {
        return Ok((0.0, 0.0, vec![f64::NAN; m]));
    }
    let logits = model.logits(data.points.view())?;
    let (losses, preds) = row_losses_and_predictions(&logits, &data.classes);
    let errors = preds.iter().zip(&data.classes).filter(|(p, y)| p != y).count();
    let mut hits = vec![0usize; m];
    let mut totals = vec![0usize; m];
    for ((p, y), &s) in preds.iter().zip(&data.classes).zip(&data.subclasses) {
        totals[s] += 1;
        if p == y {
            hits[s] += 1;
        }
    }
    let per_subclass = hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| if t == 0 { f64::NAN } else { h as f64 / t as f64 })
        .collect();
    let loss = losses.iter().sum::<f64>() / n as f64;
    Ok((loss, 1.0 - errors as f64 / n as f64, per_subclass))
}

/// Trains a freshly initialized MLP.
pub fn train(
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    config: &TrainConfig,
) -> std::result::Result<MetricCurve, TrainError> {
    config.validate()?;
    let widths = config.widths(train_set.dim(), train_set.num_classes());
    let model = init_model(
        &widths,
        config.init_scale,
        seed::derive(config.seed, seed::stream::INIT),
    )?;
    train_model(model, train_set, test_set, config).map(|(curve, _)| curve)
}

/// Trains `model` for `config.max_epochs` epochs; never stops early on its own.
///
/// Returns the curve and the final model.
pub fn train_model<N: Network>(
    mut model: N,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    config: &TrainConfig,
) -> std::result::Result<(MetricCurve, N), TrainError> {
    config.validate()?;
    if test_set.is_empty() {
        return Err(Error::invalid("test_set", "must not be empty").into());
    }
    for ds in [train_set, test_set] {
        if ds.dim() != model.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.input_dim(),
                found: ds.dim(),
            }
            .into());
        }
    }
    let mut curve = MetricCurve::default();
    let record = |model: &N, epoch: usize, curve: &mut MetricCurve| -> Result<()> {
        let (train_loss, train_accuracy, _) = evaluate(model, train_set)?;
        let (test_loss, test_accuracy, subclass_accuracy) = evaluate(model, test_set)?;
        if !train_loss.is_finite() || !test_loss.is_finite() {
            return Err(Error::NonFinite { epoch, what: "loss" });
        }
        curve.push(Recording {
            epoch,
            train_loss,
            train_accuracy,
            test_loss,
            test_accuracy,
            subclass_accuracy,
        });
        Ok(())
    };
    let fail = |error: Error, curve: MetricCurve| TrainError {
        error,
        partial: Box::new(curve),
    };

    if let Err(e) = record(&model, 0, &mut curve) {
        return Err(fail(e, curve));
    }
    let n = train_set.len();
    let mut state = AdamState::new(&model);
    let full_batch = config.batch_size == 0 || config.batch_size >= n;
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch_rng = seed::rng(seed::derive(config.seed, seed::stream::BATCH_ORDER));

    for epoch in 1..=config.max_epochs {
        if n > 0 {
            if full_batch {
                if let Err(e) = step(
                    &mut model,
                    train_set.points.view(),
                    &train_set.classes,
                    &mut state,
                    config,
                    epoch,
                ) {
                    return Err(fail(e, curve));
                }
            } else {
                order.shuffle(&mut batch_rng);
                for chunk in order.chunks(config.batch_size) {
                    let x: Array2<f64> = train_set.points.select(Axis(0), chunk);
                    let y: Vec<usize> = chunk.iter().map(|&i| train_set.classes[i]).collect();
                    if let Err(e) = step(&mut model, x.view(), &y, &mut state, config, epoch) {
                        return Err(fail(e, curve));
                    }
                }
            }
        }
        if config.records_at(epoch) {
            if let Err(e) = record(&model, epoch, &mut curve) {
                return Err(fail(e, curve));
            }
        }
    }
    Ok((curve, model))
}

fn step<N: Network>(
    model: &mut N,
    x: ArrayView2<'_, f64>,
    y: &[usize],
    state: &mut AdamState,
    config: &TrainConfig,
    epoch: usize,
) -> Result<()> {
    let (loss, grads) = model.loss_and_grad(x, y)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite { epoch, what: "loss" });
    }
    optimizer_step(model, &grads, state, config.learning_rate, config.weight_decay, epoch)
}
