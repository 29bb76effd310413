//! Minority-class mining autoencoder over logit vectors.
//!
//! The encoder is a ReLU stack `C → h1 → … → latent`; the decoder mirrors it
//! with ReLU hidden layers and a linear output back to `C`. It is fit with the
//! sum-of-squares reconstruction loss on training-split logits only, so
//! head-class activation patterns dominate what it learns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::sha256_hex;
use crate::nn::{fit, Activation, Checkpoint, DenseLayer, Loss, Network, Sample, TrainConfig};
use crate::rng::{seeded, stream};

pub const DEFAULT_ENCODER_HIDDEN: [usize; 2] = [10, 9];

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    network: Network,
    encoder_layers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderReport {
    pub encoder_hidden: Vec<usize>,
    pub epochs_run: usize,
    pub train_loss: Vec<f64>,
    pub final_reconstruction_error: f64,
}

/// Resolves encoder widths for `num_classes`, enforcing `latent < C`.
///
/// The requested widths are kept when the bottleneck already holds; otherwise
/// every width is capped at `C − 1`.
pub fn resolve_encoder_dims(requested: &[usize], num_classes: usize) -> Result<Vec<usize>> {
    if requested.is_empty() || requested.contains(&0) {
        return Err(Error::config(
            "encoder hidden dims must be non-empty and positive",
        ));
    }
    if num_classes < 2 {
        return Err(Error::config(
            "an autoencoder bottleneck needs at least two classes (latent < C)",
        ));
    }
    let latent = *requested.last().expect("non-empty");
    if latent < num_classes {
        return Ok(requested.to_vec());
    }
    let capped: Vec<usize> = requested.iter().map(|&h| h.min(num_classes - 1)).collect();
    log::info!(
        "encoder dims {requested:?} do not form a bottleneck for {num_classes} classes; using {capped:?}"
    );
    Ok(capped)
}

impl AutoencoderModel {
    pub fn new(encoder: Vec<DenseLayer>, decoder: Vec<DenseLayer>) -> Result<Self> {
        if encoder.is_empty() || decoder.is_empty() {
            return Err(Error::invalid(
                "encoder and decoder need at least one layer each",
            ));
        }
        let c = encoder[0].input_dim();
        let latent = encoder.last().expect("non-empty").output_dim();
        if decoder.last().expect("non-empty").output_dim() != c {
            return Err(Error::invalid("decoder output must match encoder input"));
        }
        if latent >= c {
            return Err(Error::config(format!(
                "latent dimension {latent} must be smaller than the {c} logits"
            )));
        }
        let encoder_layers = encoder.len();
        let mut layers = encoder;
        layers.extend(decoder);
        Ok(AutoencoderModel {
            network: Network::new(layers)?,
            encoder_layers,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.network.input_dim().expect("non-empty")
    }

    pub fn latent_dim(&self) -> usize {
        self.network.layers[self.encoder_layers - 1].output_dim()
    }

    pub fn encoder(&self) -> &[DenseLayer] {
        &self.network.layers[..self.encoder_layers]
    }

    pub fn decoder(&self) -> &[DenseLayer] {
        &self.network.layers[self.encoder_layers..]
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn encode(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z)?;
        Ok(self.encoder().iter().fold(z.to_vec(), |x, l| l.apply(&x)))
    }

    /// `ẑ = decoder(encoder(z))`.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z)?;
        self.network.predict(z)
    }

    fn check_len(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.num_classes() {
            return Err(Error::invalid(format!(
                "autoencoder expects {} logits, got {}",
                self.num_classes(),
                z.len()
            )));
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(self.network.clone())
            .with_meta("kind", "autoencoder")
            .with_meta("encoder_layers", self.encoder_layers)
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        if ckpt.meta.get("kind").map(String::as_str) != Some("autoencoder") {
            return Err(Error::invalid("checkpoint is not an autoencoder"));
        }
        let n = ckpt.meta_usize("encoder_layers")?;
        let mut layers = ckpt.network.layers;
        if n == 0 || n >= layers.len() {
            return Err(Error::invalid(
                "autoencoder checkpoint has a bad encoder split",
            ));
        }
        let decoder = layers.split_off(n);
        AutoencoderModel::new(layers, decoder)
    }

    pub fn checksum(&self) -> String {
        sha256_hex(self.to_checkpoint().to_text().as_bytes())
    }
}

/// Fresh autoencoder with ReLU encoder, mirrored ReLU decoder and linear output.
pub fn init_autoencoder(
    num_classes: usize,
    encoder_hidden: &[usize],
    seed: u64,
) -> Result<AutoencoderModel> {
    let dims = resolve_encoder_dims(encoder_hidden, num_classes)?;
    let mut rng = seeded(seed, stream::INIT);
    let mut encoder = Vec::new();
    let mut prev = num_classes;
    for &h in &dims {
        encoder.push(DenseLayer::init(prev, h, Activation::Relu, &mut rng));
        prev = h;
    }
    let mut decoder = Vec::new();
    for &h in dims.iter().rev().skip(1) {
        decoder.push(DenseLayer::init(prev, h, Activation::Relu, &mut rng));
        prev = h;
    }
    decoder.push(DenseLayer::init(
        prev,
        num_classes,
        Activation::Identity,
        &mut rng,
    ));
    AutoencoderModel::new(encoder, decoder)
}

/// Trains on raw logit vectors with the reconstruction objective.
pub fn fit_autoencoder(
    logits: &[Vec<f64>],
    encoder_hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<(AutoencoderModel, AutoencoderReport)> {
    let first = logits
        .first()
        .ok_or_else(|| Error::invalid("cannot fit an autoencoder on zero logit vectors"))?;
    let c = first.len();
    if logits.iter().any(|z| z.len() != c) {
        return Err(Error::invalid("logit vectors differ in length"));
    }
    let mut model = init_autoencoder(c, encoder_hidden, cfg.seed)?;
    let samples: Vec<Sample> = logits
        .iter()
        .map(|z| Sample::values(z.clone(), z.clone()))
        .collect();
    let cfg = TrainConfig {
        early_stopping: None,
        ..cfg.clone()
    };
    let report = fit(&mut model.network, &samples, None, &Loss::Mse, &cfg)?;
    let final_err = model.network.batch_loss(&samples, &Loss::Mse)?;
    let dims = model.encoder().iter().map(DenseLayer::output_dim).collect();
    Ok((
        model,
        AutoencoderReport {
            encoder_hidden: dims,
            epochs_run: report.epochs_run,
            train_loss: report.train_loss,
            final_reconstruction_error: final_err,
        },
    ))
}
