//! Recalibration layer: a fresh final layer trained on frozen penultimate
//! activations with focal loss and early stopping.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::backbone::BackboneModel;
use crate::data::{compute_catalog, ClassCatalog, Dataset, Example, DEFAULT_TAIL_THRESHOLD};
use crate::error::{Error, Result};
use crate::nn::{
    fit, Activation, Checkpoint, DenseLayer, FocalLossConfig, Loss, Network, Sample, TrainConfig,
};
use crate::rng::{seeded, stream};

pub const DEFAULT_GAMMA: f64 = 2.0;
pub const DEFAULT_EPOCHS: usize = 50;

/// How the per-class focal weights are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPolicy {
    InverseFrequency,
    Uniform,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecalibReport {
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub validation_loss: Vec<f64>,
    pub train_loss: Vec<f64>,
    pub holdout_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecalibrationLayer {
    pub layer: DenseLayer,
    pub focal: FocalLossConfig,
    pub report: RecalibReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedLogits {
    pub example_id: u64,
    pub z: Vec<f64>,
}

/// `α_k ∝ 1 / count_k`, scaled so the largest weight is 1.
pub fn inverse_frequency_alphas(catalog: &ClassCatalog) -> Result<Vec<f64>> {
    if let Some(k) = catalog.counts.iter().position(|&n| n == 0) {
        return Err(Error::invalid(format!(
            "class {} has no training examples; drop or smooth it before weighting",
            catalog.names.get(k).map_or("?", String::as_str)
        )));
    }
    let min = *catalog.counts.iter().min().expect("non-empty catalog") as f64;
    Ok(catalog.counts.iter().map(|&n| min / n as f64).collect())
}

impl RecalibrationLayer {
    pub fn apply(&self, penultimate: &[f64]) -> Result<Vec<f64>> {
        if penultimate.len() != self.layer.input_dim() {
            return Err(Error::invalid(format!(
                "recalibration layer expects {} inputs, got {}",
                self.layer.input_dim(),
                penultimate.len()
            )));
        }
        Ok(self.layer.apply(penultimate))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let alphas: Vec<String> = self
            .focal
            .alphas
            .iter()
            .map(|a| crate::fsutil::fmt_f64(*a))
            .collect();
        Checkpoint::new(Network {
            layers: vec![self.layer.clone()],
        })
        .with_meta("kind", "recalibration")
        .with_meta("gamma", crate::fsutil::fmt_f64(self.focal.gamma))
        .with_meta("alphas", alphas.join(","))
    }

    /// Restores the layer and its focal configuration. The training report is
    /// not part of the weights file.
    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.meta.get("kind").map(String::as_str) != Some("recalibration") {
            return Err(Error::invalid("checkpoint is not a recalibration layer"));
        }
        let bad = || Error::invalid("recalibration checkpoint has malformed focal metadata");
        let gamma: f64 = ckpt
            .meta
            .get("gamma")
            .ok_or_else(bad)?
            .parse()
            .map_err(|_| bad())?;
        let alphas = ckpt
            .meta
            .get("alphas")
            .ok_or_else(bad)?
            .split(',')
            .map(|a| a.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let mut layers = ckpt.network.layers;
        if layers.len() != 1 {
            return Err(Error::invalid(
                "recalibration checkpoint must hold exactly one layer",
            ));
        }
        Ok(RecalibrationLayer {
            layer: layers.remove(0),
            focal: FocalLossConfig::new(gamma, alphas)?,
            report: RecalibReport {
                epochs_run: 0,
                best_epoch: None,
                validation_loss: Vec::new(),
                train_loss: Vec::new(),
                holdout_size: 0,
            },
        })
    }
}

/// Splits indices per class into (train, holdout), putting at least one
/// example of every class with two or more members into the holdout.
pub(crate) fn stratified_holdout(
    labels: &[usize],
    num_classes: usize,
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = seeded(seed, stream::HOLDOUT);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for mut idx in by_class {
        idx.shuffle(&mut rng);
        let n = idx.len();
        let take = if n >= 2 {
            ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
        } else {
            0
        };
        holdout.extend_from_slice(&idx[..take]);
        train.extend_from_slice(&idx[take..]);
    }
    train.sort_unstable();
    holdout.sort_unstable();
    (train, holdout)
}

/// Fits a new `H → C` layer on the frozen backbone's penultimate activations.
pub fn fit_rc_layer(
    backbone: &BackboneModel,
    train: &Dataset,
    cfg: &TrainConfig,
    gamma: f64,
    alphas: &AlphaPolicy,
) -> Result<RecalibrationLayer> {
    if !backbone.is_frozen() {
        return Err(Error::invalid(
            "the backbone must be frozen before recalibration",
        ));
    }
    let es = cfg
        .early_stopping
        .clone()
        .ok_or_else(|| Error::config("recalibration requires early stopping settings"))?;
    cfg.validate()?;
    let c = backbone.num_classes();
    if train.num_classes() != c {
        return Err(Error::invalid(
            "dataset and backbone disagree on the class count",
        ));
    }
    let catalog = compute_catalog(train, DEFAULT_TAIL_THRESHOLD)?;
    let alphas = match alphas {
        AlphaPolicy::InverseFrequency => inverse_frequency_alphas(&catalog)?,
        AlphaPolicy::Uniform => vec![1.0; c],
        AlphaPolicy::Explicit(a) => a.clone(),
    };
    let focal = FocalLossConfig::new(gamma, alphas)?;
    if focal.alphas.len() != c {
        return Err(Error::config(format!(
            "{} focal alphas supplied for {c} classes",
            focal.alphas.len()
        )));
    }

    let mut labels = Vec::with_capacity(train.len());
    let mut samples = Vec::with_capacity(train.len());
    for e in train.examples() {
        let l = e.label.expect("train split is labeled");
        labels.push(l);
        samples.push(Sample::class(backbone.penultimate(&e.features)?, l));
    }
    let (train_idx, holdout_idx) = stratified_holdout(&labels, c, es.validation_fraction, cfg.seed);
    if holdout_idx.is_empty() {
        return Err(Error::config(
            "validation holdout is empty; need more training examples",
        ));
    }
    let fit_set: Vec<Sample> = train_idx.iter().map(|&i| samples[i].clone()).collect();
    let holdout: Vec<Sample> = holdout_idx.iter().map(|&i| samples[i].clone()).collect();

    let mut rng = seeded(cfg.seed, stream::INIT);
    let layer = DenseLayer::init(
        backbone.penultimate_dim(),
        c,
        Activation::Identity,
        &mut rng,
    );
    let mut net = Network {
        layers: vec![layer],
    };
    let loss = Loss::Focal(focal.clone());
    let report = fit(&mut net, &fit_set, Some(&holdout), &loss, cfg)?;
    Ok(RecalibrationLayer {
        layer: net.layers.remove(0),
        focal,
        report: RecalibReport {
            epochs_run: report.epochs_run,
            best_epoch: report.best_epoch,
            validation_loss: report.validation_loss,
            train_loss: report.train_loss,
            holdout_size: holdout.len(),
        },
    })
}

/// `z = g(f̃(x))` for each example, in input order.
pub fn calibrated_logits(
    backbone: &BackboneModel,
    rc: &RecalibrationLayer,
    xs: &[Example],
) -> Result<Vec<CalibratedLogits>> {
    xs.iter()
        .map(|e| {
            let h = backbone.penultimate(&e.features)?;
            Ok(CalibratedLogits {
                example_id: e.id,
                z: rc.apply(&h)?,
            })
        })
        .collect()
}

/// Final-layer logits of the backbone itself, for the no-recalibration ablation.
pub fn backbone_logits(backbone: &BackboneModel, xs: &[Example]) -> Result<Vec<CalibratedLogits>> {
    xs.iter()
        .map(|e| {
            Ok(CalibratedLogits {
                example_id: e.id,
                z: backbone.logits(&e.features)?,
            })
        })
        .collect()
}
