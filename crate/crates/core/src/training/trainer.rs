use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{adam_step, save_checkpoint, AdamHyper, AdamState, Checkpoint};
use crate::network::{GradientSet, NetworkModel, Pass};
use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

const DROPOUT_STREAM_KEY: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    /// `(train, eval)` shares used by the split.
    pub split_fractions: (f64, f64),
    /// Best-model checkpoint destination; `None` keeps it in memory only.
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamHyper::default();
        Self {
            epochs: 10,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            batch_size: 32,
            dropout_rate: 0.5,
            seed: 0,
            split_fractions: (0.7, 0.3),
            checkpoint_path: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("betas must lie in [0, 1), got {} and {}", self.beta1, self.beta2));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        crate::tensor::reshape_check_rate(self.dropout_rate)?;
        let (a, b) = self.split_fractions;
        if a < 0.0 || b < 0.0 || (a + b - 1.0).abs() > 1e-9 {
            return bad(format!("split fractions must sum to 1, got {a} + {b}"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<S> {
    pub input: Tensor<S>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet<S> {
    pub train: Vec<Sample<S>>,
    pub eval: Vec<Sample<S>>,
}

/// Per-epoch statistics. Train figures are running means over the epoch's
/// batches (dropout active); eval figures cover the whole held-out set in
/// inference mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Index of the largest probability; ties resolve to the lowest index.
pub fn argmax<S: Scalar>(probs: &Tensor<S>) -> usize {
    let mut best = 0;
    for (i, &p) in probs.data().iter().enumerate() {
        if p > probs.data()[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
    pub probabilities: Vec<Vec<f64>>,
}

/// Inference-mode loss, accuracy and predictions over `samples`.
pub fn evaluate<S: Scalar>(model: &NetworkModel<S>, samples: &[Sample<S>]) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Config("cannot evaluate an empty sample set".into()));
    }
    let mut loss = 0.0;
    let mut correct = 0;
    let mut predictions = Vec::with_capacity(samples.len());
    let mut probabilities = Vec::with_capacity(samples.len());
    for s in samples {
        let probs = model.predict(&s.input)?;
        loss += crate::tensor::cross_entropy(&probs, s.label)?.to_f64_lossless();
        let p = argmax(&probs);
        correct += usize::from(p == s.label);
        predictions.push(p);
        probabilities.push(probs.data().iter().map(|v| v.to_f64_lossless()).collect());
    }
    let n = samples.len() as f64;
    Ok(Evaluation {
        loss: loss / n,
        accuracy: correct as f64 / n,
        predictions,
        probabilities,
    })
}

/// Epoch-at-a-time training state.
#[derive(Debug, Clone)]
pub struct Trainer<S> {
    model: NetworkModel<S>,
    adam: AdamState<S>,
    config: TrainConfig,
    epoch: usize,
    best: Option<Checkpoint<S>>,
    logs: Vec<EpochLog>,
}

impl<S: Scalar> Trainer<S> {
    pub fn new(mut model: NetworkModel<S>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        model.set_dropout_rate(config.dropout_rate)?;
        let adam = AdamState::for_model(&model);
        Ok(Self {
            model,
            adam,
            config,
            epoch: 0,
            best: None,
            logs: Vec::new(),
        })
    }

    pub fn model(&self) -> &NetworkModel<S> {
        &self.model
    }

    pub fn adam(&self) -> &AdamState<S> {
        &self.adam
    }

    pub fn logs(&self) -> &[EpochLog] {
        &self.logs
    }

    /// Snapshot taken at the highest validation accuracy so far (earliest
    /// epoch on ties).
    pub fn best(&self) -> Option<&Checkpoint<S>> {
        self.best.as_ref()
    }

    pub fn into_parts(self) -> (NetworkModel<S>, Vec<EpochLog>, Option<Checkpoint<S>>) {
        (self.model, self.logs, self.best)
    }

    fn check_data(&self, data: &LabeledSet<S>) -> Result<()> {
        if data.train.is_empty() || data.eval.is_empty() {
            return Err(Error::Config(format!(
                "training needs non-empty train and eval splits (got {} / {})",
                data.train.len(),
                data.eval.len()
            )));
        }
        let k = self.model.num_classes();
        let mut seen = vec![false; k];
        for s in data.train.iter().chain(&data.eval) {
            if s.label >= k {
                return Err(Error::Input(format!("label {} out of range for {k} classes", s.label)));
            }
        }
        for s in &data.train {
            seen[s.label] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::Config(format!(
                "class {missing} has no training samples"
            )));
        }
        Ok(())
    }

    /// Runs one epoch of shuffled mini-batch Adam and evaluates on the
    /// held-out split; saves a checkpoint when validation accuracy strictly
    /// improves.
    pub fn run_epoch(&mut self, data: &LabeledSet<S>) -> Result<EpochLog> {
        self.check_data(data)?;
        let epoch = self.epoch + 1;
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        shuffle_rng.set_stream(epoch as u64);
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ DROPOUT_STREAM_KEY);
        dropout_rng.set_stream(epoch as u64);

        let mut order: Vec<usize> = (0..data.train.len()).collect();
        order.shuffle(&mut shuffle_rng);

        let hyper = self.config.adam();
        let names = self.model.param_tensor_names();
        let mut batch_losses = Vec::new();
        let mut correct = 0usize;
        for (batch, chunk) in order.chunks(self.config.batch_size).enumerate() {
            let mut grads = GradientSet::zeros_like(&self.model);
            let mut loss_sum = 0.0;
            for &i in chunk {
                let sample = &data.train[i];
                let (probs, cache) = self
                    .model
                    .forward(&sample.input, Pass::Training(&mut dropout_rng))?;
                let loss = cache.loss(sample.label)?.to_f64_lossless();
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite loss at epoch {epoch}, batch {batch}, sample {i}"
                    )));
                }
                loss_sum += loss;
                correct += usize::from(argmax(&probs) == sample.label);
                grads.add_assign(&self.model.backward(&cache, sample.label)?)?;
            }
            grads.scale(S::lit(1.0 / chunk.len() as f64));
            let grad_refs = grads.tensors();
            let mut params = self.model.param_tensors_mut();
            adam_step(&mut params, &grad_refs, &mut self.adam, &hyper, &names).map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!("epoch {epoch}, batch {batch}: {m}")),
                other => other,
            })?;
            batch_losses.push(loss_sum / chunk.len() as f64);
        }

        let val = evaluate(&self.model, &data.eval)?;
        let log = EpochLog {
            epoch,
            train_loss: batch_losses.iter().sum::<f64>() / batch_losses.len() as f64,
            train_acc: correct as f64 / data.train.len() as f64,
            val_loss: val.loss,
            val_acc: val.accuracy,
        };
        self.epoch = epoch;
        self.logs.push(log);

        let improved = self
            .best
            .as_ref()
            .map_or(true, |b| log.val_acc > b.best_val_accuracy);
        if improved {
            let ckpt = Checkpoint {
                model: self.model.clone(),
                adam: self.adam.clone(),
                epoch: epoch as u32,
                best_val_accuracy: log.val_acc,
            };
            if let Some(path) = &self.config.checkpoint_path {
                save_checkpoint(path, &ckpt)?;
                log::info!("epoch {epoch}: val_acc {} improved, checkpoint written", log.val_acc);
            }
            self.best = Some(ckpt);
        }
        log::info!(
            "epoch {epoch}: train_loss {:.6} train_acc {:.4} val_loss {:.6} val_acc {:.4}",
            log.train_loss,
            log.train_acc,
            log.val_loss,
            log.val_acc
        );
        Ok(log)
    }
}

/// Trains for `config.epochs` epochs; returns the final model and the
/// epoch log.
pub fn train<S: Scalar>(
    model: NetworkModel<S>,
    data: &LabeledSet<S>,
    config: &TrainConfig,
) -> Result<(NetworkModel<S>, Vec<EpochLog>)> {
    let mut trainer = Trainer::new(model, config.clone())?;
    for _ in 0..config.epochs {
        trainer.run_epoch(data)?;
    }
    let (model, logs, _) = trainer.into_parts();
    Ok((model, logs))
}

pub const CURVES_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

pub fn write_curves_csv(path: &Path, logs: &[EpochLog]) -> Result<()> {
    let mut out = String::from(CURVES_HEADER);
    out.push('\n');
    for l in logs {
        writeln!(
            out,
            "{},{},{},{},{}",
            l.epoch, l.train_loss, l.train_acc, l.val_loss, l.val_acc
        )
        .expect("string write");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_curves_csv(path: &Path) -> Result<Vec<EpochLog>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(CURVES_HEADER) {
        return Err(Error::Input(format!("{} lacks the curves header", path.display())));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Input(format!("malformed curves row {line:?}"));
            if f.len() != 5 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(EpochLog {
                epoch: f[0].parse().map_err(|_| bad())?,
                train_loss: num(f[1])?,
                train_acc: num(f[2])?,
                val_loss: num(f[3])?,
                val_acc: num(f[4])?,
            })
        })
        .collect()
}
