use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::Loss;
use super::network::{Network, Sample};
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EarlyStoppingConfig {
    pub patience: usize,
    pub min_delta: f64,
    pub validation_fraction: f64,
}

impl Default for EarlyStoppingConfig {
    fn default() -> Self {
        EarlyStoppingConfig {
            patience: 3,
            min_delta: 1e-4,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub early_stopping: Option<EarlyStoppingConfig>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if let Some(es) = &self.early_stopping {
            if es.patience == 0 {
                return Err(Error::config("early stopping patience must be positive"));
            }
            if !(es.min_delta >= 0.0) {
                return Err(Error::config("early stopping min_delta must be >= 0"));
            }
            if !(es.validation_fraction > 0.0 && es.validation_fraction < 1.0) {
                return Err(Error::config(format!(
                    "validation_fraction must lie strictly in (0, 1), got {}",
                    es.validation_fraction
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Patience-based stopping rule over a validation-loss trace.
///
/// The restore point is always the epoch with the lowest loss seen so far;
/// `min_delta` only governs when the patience counter resets.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    min_delta: f64,
    best: Option<(usize, f64)>,
    since_improvement: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopping {
            patience,
            min_delta,
            best: None,
            since_improvement: 0,
        }
    }

    /// Records the loss of `epoch`. Returns whether it is the new best and
    /// whether training should stop.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> (bool, StopDecision) {
        let (is_best, improved) = match self.best {
            None => (true, true),
            Some((_, best)) => (loss < best, loss < best - self.min_delta),
        };
        if is_best {
            self.best = Some((epoch, loss));
        }
        if improved {
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
        }
        let decision = if self.since_improvement >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        };
        (is_best, decision)
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
}

/// Mini-batch SGD over `train`, shuffled each epoch from the config seed.
///
/// With early stopping configured, `validation` must be non-empty; the
/// returned network carries the parameters of the best validation epoch.
pub fn fit(
    net: &mut Network,
    train: &[Sample],
    validation: Option<&[Sample]>,
    loss: &Loss,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let mut report = TrainReport {
        epochs_run: 0,
        best_epoch: None,
        train_loss: Vec::new(),
        validation_loss: Vec::new(),
    };
    if cfg.epochs == 0 {
        if cfg.early_stopping.is_some() {
            return Err(Error::config(
                "early stopping needs at least one epoch to evaluate validation loss",
            ));
        }
        return Ok(report);
    }
    if train.is_empty() {
        return Err(Error::invalid("no training samples"));
    }
    let mut stopper = match (&cfg.early_stopping, validation) {
        (Some(es), Some(v)) if !v.is_empty() => {
            Some((EarlyStopping::new(es.patience, es.min_delta), v))
        }
        (Some(_), _) => {
            return Err(Error::config(
                "early stopping configured but no validation samples available",
            ))
        }
        (None, _) => None,
    };

    let mut rng = seeded(cfg.seed, crate::rng::stream::SHUFFLE);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best_net = None;
    let mut batch = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            total += net.backward_and_step(&batch, loss, cfg.learning_rate)?;
            batches += 1;
        }
        report.train_loss.push(total / batches as f64);
        report.epochs_run = epoch + 1;

        if let Some((stop, val)) = stopper.as_mut() {
            let v = net.batch_loss(val, loss)?;
            if !v.is_finite() {
                return Err(Error::TrainingDiverged {
                    layer: net.layers.len().saturating_sub(1),
                    detail: format!("non-finite validation loss at epoch {epoch}"),
                });
            }
            report.validation_loss.push(v);
            let (is_best, decision) = stop.observe(epoch, v);
            if is_best {
                best_net = Some(net.clone());
            }
            if decision == StopDecision::Stop {
                break;
            }
        }
    }
    if let Some((stop, _)) = stopper {
        report.best_epoch = stop.best_epoch();
        if let Some(best) = best_net {
            *net = best;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_trace(trace: &[f64], patience: usize, min_delta: f64) -> (usize, Option<usize>) {
        let mut es = EarlyStopping::new(patience, min_delta);
        for (i, &v) in trace.iter().enumerate() {
            if es.observe(i, v).1 == StopDecision::Stop {
                return (i, es.best_epoch());
            }
        }
        (trace.len() - 1, es.best_epoch())
    }

    #[test]
    fn stopping_rule_hand_trace() {
        // best at 1 (2.0); epochs 2 and 3 do not improve -> stop after 3
        let (stopped, best) = run_trace(&[3.0, 2.0, 2.5, 2.4, 2.6], 2, 0.0);
        assert_eq!(stopped, 3);
        assert_eq!(best, Some(1));
    }

    #[test]
    fn large_patience_runs_everything() {
        let (stopped, best) = run_trace(&[3.0, 2.0, 2.5, 2.4, 2.6], 10, 0.0);
        assert_eq!(stopped, 4);
        assert_eq!(best, Some(1));
    }

    #[test]
    fn restore_point_is_true_minimum_under_min_delta() {
        // 1.95 is not a min_delta improvement, but is still the best seen
        let (_, best) = run_trace(&[2.0, 1.95, 1.97, 1.99], 2, 0.1);
        assert_eq!(best, Some(1));
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig {
            learning_rate: 0.1,
            epochs: 1,
            batch_size: 4,
            seed: 0,
            early_stopping: Some(EarlyStoppingConfig {
                validation_fraction: 1.0,
                ..Default::default()
            }),
        };
        assert!(cfg.validate().is_err());
        cfg.early_stopping = None;
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        cfg.batch_size = 1;
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn early_stopping_without_epochs_is_config_error() {
        let cfg = TrainConfig {
            learning_rate: 0.1,
            epochs: 0,
            batch_size: 4,
            seed: 0,
            early_stopping: Some(EarlyStoppingConfig::default()),
        };
        let err = fit(&mut Network::default(), &[], None, &Loss::Mse, &cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
