//! Mini-batch training with periodic validation and best-parameter tracking.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optimizer::{step_params, OptimizerKind, OptimizerState};
use super::{Checkpoint, TrainError};
use crate::model::{batch_gradient, batch_loss, LoadCNNConfig, LoadCNNParams, Sample};
use crate::rng::{stream_seed, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    /// Per-epoch multiplicative decay of the learning rate.
    pub decay_rate: f64,
    pub validation_interval_steps: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Validate on the whole validation set instead of one random batch.
    #[serde(default)]
    pub full_validation: bool,
    /// Stop after this many optimization steps, if set.
    #[serde(default)]
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            max_epochs: 65,
            learning_rate: 0.0015,
            decay_rate: 0.96,
            validation_interval_steps: 100,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            full_validation: false,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return bad("decay_rate must be in (0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.validation_interval_steps == 0 {
            return bad("validation_interval_steps must be at least 1");
        }
        Ok(())
    }
}

/// Staircase decay: `base_lr * decay_rate^epoch`.
pub fn lr_schedule(base_lr: f64, decay_rate: f64, epoch: usize) -> f64 {
    base_lr * decay_rate.powi(epoch as i32)
}

/// Training-set indices for one epoch: a seeded shuffle cut into batches,
/// with the final short batch kept.
pub fn epoch_batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    /// Optimization steps taken so far; 0 is the initial validation.
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    /// Mean batch loss of this step, measured before the update.
    pub train_loss: Option<f64>,
    pub val_loss: Option<f64>,
    /// Milliseconds since training started.
    pub timestamp_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
}

pub const LOG_CSV_HEADER: &str = "step,epoch,lr,train_loss,val_loss,timestamp_ms";

impl TrainLog {
    pub fn train_losses(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.train_loss).collect()
    }

    pub fn val_losses(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.val_loss).collect()
    }

    /// Wall-clock hours between the first and last record.
    pub fn training_hours(&self) -> f64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => (b.timestamp_ms - a.timestamp_ms) / 3.6e6,
            _ => 0.0,
        }
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.10}")).unwrap_or_default();
        let mut s = String::from(LOG_CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{:.10},{},{},{:.3}",
                r.step,
                r.epoch,
                r.lr,
                opt(r.train_loss),
                opt(r.val_loss),
                r.timestamp_ms
            );
        }
        s
    }
}

struct Best {
    params: LoadCNNParams,
    loss: f64,
    step: usize,
    epoch: usize,
}

struct Validator<'a> {
    config: &'a LoadCNNConfig,
    set: &'a [Sample],
    batch_size: usize,
    full: bool,
    rng: ChaCha8Rng,
}

impl Validator<'_> {
    fn loss(&mut self, params: &LoadCNNParams) -> Result<f64, TrainError> {
        let batch: Vec<&Sample> = if self.full || self.set.len() <= self.batch_size {
            self.set.iter().collect()
        } else {
            sample(&mut self.rng, self.set.len(), self.batch_size)
                .into_iter()
                .map(|i| &self.set[i])
                .collect()
        };
        Ok(batch_loss(self.config, params, &batch)?)
    }
}

/// Trains from a seeded initialization and returns the parameters with the
/// lowest validation loss seen, together with the full log.
pub fn train(
    train_set: &[Sample],
    validation_set: &[Sample],
    model_config: &LoadCNNConfig,
    train_config: &TrainConfig,
) -> Result<(Checkpoint, TrainLog), TrainError> {
    let params = LoadCNNParams::init(model_config, stream_seed(train_config.seed, Stream::Init))?;
    train_from(params, train_set, validation_set, model_config, train_config)
}

/// As [`train`], starting from the given parameters.
pub fn train_from(
    mut params: LoadCNNParams,
    train_set: &[Sample],
    validation_set: &[Sample],
    model_config: &LoadCNNConfig,
    tc: &TrainConfig,
) -> Result<(Checkpoint, TrainLog), TrainError> {
    tc.validate()?;
    model_config.validate()?;
    params.check_shapes(model_config)?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset("training"));
    }
    if validation_set.is_empty() {
        return Err(TrainError::EmptyDataset("validation"));
    }
    for s in train_set.iter().chain(validation_set) {
        s.check(model_config)?;
    }

    let start = Instant::now();
    let elapsed_ms = || start.elapsed().as_secs_f64() * 1e3;
    let mut log = TrainLog::default();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(stream_seed(tc.seed, Stream::Shuffle));
    let mut validator = Validator {
        config: model_config,
        set: validation_set,
        batch_size: tc.batch_size,
        full: tc.full_validation,
        rng: ChaCha8Rng::seed_from_u64(stream_seed(tc.seed, Stream::Validation)),
    };
    let mut opt = OptimizerState::new(tc.optimizer);

    let initial = validator.loss(&params)?;
    log.records.push(LogRecord {
        step: 0,
        epoch: 0,
        lr: lr_schedule(tc.learning_rate, tc.decay_rate, 0),
        train_loss: None,
        val_loss: Some(initial),
        timestamp_ms: elapsed_ms(),
    });
    let mut best = Best {
        params: params.clone(),
        loss: f64::INFINITY,
        step: 0,
        epoch: 0,
    };
    if initial < best.loss {
        best.loss = initial;
    }

    let max_steps = tc.max_steps.unwrap_or(usize::MAX);
    let mut step = 0;
    let mut last_epoch = 0;
    'epochs: for epoch in 0..tc.max_epochs {
        let lr = lr_schedule(tc.learning_rate, tc.decay_rate, epoch);
        for batch_ids in epoch_batches(train_set.len(), tc.batch_size, &mut shuffle_rng) {
            if step >= max_steps {
                break 'epochs;
            }
            last_epoch = epoch;
            let batch: Vec<&Sample> = batch_ids.iter().map(|&i| &train_set[i]).collect();
            let (loss, grads) = batch_gradient(model_config, &params, &batch)?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(TrainError::NonFinite {
                    step: step + 1,
                    lr,
                    batch: batch_ids,
                });
            }
            step_params(&mut params, &grads, &mut opt, lr)?;
            step += 1;

            let val_loss = if step % tc.validation_interval_steps == 0 {
                Some(validator.loss(&params)?)
            } else {
                None
            };
            if let Some(v) = val_loss {
                if v < best.loss {
                    best = Best {
                        params: params.clone(),
                        loss: v,
                        step,
                        epoch,
                    };
                }
            }
            log.records.push(LogRecord {
                step,
                epoch,
                lr,
                train_loss: Some(loss),
                val_loss,
                timestamp_ms: elapsed_ms(),
            });
        }
    }

    // Give the final parameters a chance if training did not end on a
    // validation step.
    if step > 0 && step % tc.validation_interval_steps != 0 {
        let v = validator.loss(&params)?;
        if v < best.loss {
            best = Best {
                params: params.clone(),
                loss: v,
                step,
                epoch: last_epoch,
            };
        }
        if let Some(last) = log.records.last_mut() {
            last.val_loss = Some(v);
            last.timestamp_ms = elapsed_ms();
        }
    }

    let checkpoint = Checkpoint {
        model_config: model_config.clone(),
        train_config: tc.clone(),
        params: best.params,
        loss_best: best.loss,
        step: best.step,
        epoch: best.epoch,
        total_steps: step,
        id_map_hash: None,
        extra: Default::default(),
    };
    Ok((checkpoint, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        assert_eq!(lr_schedule(0.0015, 0.96, 0), 0.0015);
        assert!((lr_schedule(0.0015, 0.96, 1) - 0.00144).abs() < 1e-15);
        // Repeated multiplication as the oracle.
        let mut expect = 0.0015;
        for _ in 0..64 {
            expect *= 0.96;
        }
        let e64 = lr_schedule(0.0015, 0.96, 64);
        assert!((e64 - expect).abs() < 1e-15, "{e64}");
        assert!((e64 - 1.1001e-4).abs() < 1e-8, "{e64}");
    }

    #[test]
    fn batches_cover_every_index_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let b = epoch_batches(70, 64, &mut rng);
            assert_eq!(b.len(), 2);
            assert_eq!(b[1].len(), 6);
            let mut all: Vec<usize> = b.concat();
            all.sort();
            assert_eq!(all, (0..70).collect::<Vec<_>>());
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { decay_rate: 0.0, ..Default::default() },
            TrainConfig { decay_rate: 1.5, ..Default::default() },
            TrainConfig { learning_rate: -1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn csv_has_header_and_blank_optional_fields() {
        let log = TrainLog {
            records: vec![LogRecord {
                step: 0,
                epoch: 0,
                lr: 0.5,
                train_loss: None,
                val_loss: Some(1.0),
                timestamp_ms: 2.0,
            }],
        };
        let csv = log.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(LOG_CSV_HEADER));
        assert_eq!(lines.next(), Some("0,0,0.5000000000,,1.0000000000,2.000"));
    }
}
