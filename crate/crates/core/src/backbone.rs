//! The biased base classifier trained on the skewed split, and its
//! penultimate-layer truncation.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fsutil::sha256_hex;
use crate::nn::{build_mlp, fit, Activation, Checkpoint, Loss, Network, Sample, TrainConfig};
use crate::rng::{seeded, stream};

pub const DEFAULT_HIDDEN: [usize; 2] = [32, 16];

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneModel {
    network: Network,
    frozen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneReport {
    pub epochs_run: usize,
    pub train_loss: Vec<f64>,
    pub train_accuracy: f64,
}

impl BackboneModel {
    /// Wraps a hidden stack plus a final classification layer.
    pub fn new(network: Network) -> Result<Self> {
        if network.layers.len() < 2 {
            return Err(Error::invalid(
                "a backbone needs at least one hidden layer and a classification layer",
            ));
        }
        Ok(BackboneModel {
            network,
            frozen: false,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn network_mut(&mut self) -> Result<&mut Network> {
        if self.frozen {
            return Err(Error::FrozenModel);
        }
        Ok(&mut self.network)
    }

    pub fn freeze(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Unfrozen copy with the same parameters.
    pub fn thawed_copy(&self) -> Self {
        BackboneModel {
            network: self.network.clone(),
            frozen: false,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.network.input_dim().expect("non-empty network")
    }

    pub fn num_classes(&self) -> usize {
        self.network.output_dim().expect("non-empty network")
    }

    pub fn penultimate_dim(&self) -> usize {
        let n = self.network.layers.len();
        self.network.layers[n - 2].output_dim()
    }

    /// Post-activation output of the last hidden layer.
    pub fn penultimate(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "backbone expects {} features, got {}",
                self.input_dim(),
                features.len()
            )));
        }
        let n = self.network.layers.len();
        let mut x = features.to_vec();
        for layer in &self.network.layers[..n - 1] {
            x = layer.apply(&x);
        }
        Ok(x)
    }

    /// Final-layer logits (pre-softmax).
    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.network.predict(features)
    }

    pub fn predict_class(&self, features: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(features)?))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(self.network.clone())
            .with_meta("kind", "backbone")
            .with_meta("frozen", self.frozen)
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.meta.get("kind").map(String::as_str) != Some("backbone") {
            return Err(Error::invalid("checkpoint is not a backbone"));
        }
        let frozen = ckpt.meta.get("frozen").map(String::as_str) == Some("true");
        let mut model = BackboneModel::new(ckpt.network)?;
        model.frozen = frozen;
        Ok(model)
    }

    /// SHA-256 of the serialized parameters.
    pub fn checksum(&self) -> String {
        sha256_hex(Checkpoint::new(self.network.clone()).to_text().as_bytes())
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn class_samples(data: &Dataset) -> Result<Vec<Sample>> {
    data.examples()
        .iter()
        .map(|e| {
            let l = e
                .label
                .ok_or_else(|| Error::invalid(format!("example {} is unlabeled", e.id)))?;
            Ok(Sample::class(e.features.clone(), l))
        })
        .collect()
}

/// Trains a fresh classifier with plain cross-entropy.
pub fn train_backbone(
    train: &Dataset,
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<(BackboneModel, BackboneReport)> {
    if train.is_empty() {
        return Err(Error::invalid(
            "cannot train a backbone on an empty dataset",
        ));
    }
    if hidden.is_empty() {
        return Err(Error::config("backbone needs at least one hidden layer"));
    }
    let dim = train.feature_dim().expect("non-empty");
    let mut rng = seeded(cfg.seed, stream::INIT);
    let network = build_mlp(
        dim,
        hidden,
        train.num_classes(),
        Activation::Identity,
        &mut rng,
    );
    let mut model = BackboneModel::new(network)?;
    let report = continue_training(&mut model, train, cfg)?;
    Ok((model, report))
}

/// Further cross-entropy epochs on an existing, unfrozen model.
pub fn continue_training(
    model: &mut BackboneModel,
    train: &Dataset,
    cfg: &TrainConfig,
) -> Result<BackboneReport> {
    if train.num_classes() != model.num_classes() {
        return Err(Error::invalid(
            "dataset and backbone disagree on the class count",
        ));
    }
    let samples = class_samples(train)?;
    let net = model.network_mut()?;
    let cfg = TrainConfig {
        early_stopping: None,
        ..cfg.clone()
    };
    let fit_report = fit(net, &samples, None, &Loss::CrossEntropy, &cfg)?;
    Ok(BackboneReport {
        epochs_run: fit_report.epochs_run,
        train_loss: fit_report.train_loss,
        train_accuracy: accuracy(model, train)?,
    })
}

pub fn accuracy(model: &BackboneModel, data: &Dataset) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for e in data.examples() {
        if let Some(l) = e.label {
            total += 1;
            if model.predict_class(&e.features)? == l {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::invalid("no labeled examples to score"));
    }
    Ok(correct as f64 / total as f64)
}

/// Accuracy per class; `None` for classes absent from `data`.
pub fn per_class_accuracy(model: &BackboneModel, data: &Dataset) -> Result<Vec<Option<f64>>> {
    let c = data.num_classes();
    let mut hits = vec![0usize; c];
    let mut totals = vec![0usize; c];
    for e in data.examples() {
        if let Some(l) = e.label {
            totals[l] += 1;
            if model.predict_class(&e.features)? == l {
                hits[l] += 1;
            }
        }
    }
    Ok(hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
        .collect())
}
