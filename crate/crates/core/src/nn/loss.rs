//! Losses over network outputs.
//!
//! Classification losses take raw logits and apply the softmax internally, so
//! gradients are taken with respect to the logits. The reconstruction loss is
//! the plain sum of squared differences `||a - b||²` with no division by the
//! vector length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to probabilities before taking a logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::invalid("softmax of an empty vector"));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::invalid("softmax input contains non-finite values"));
    }
    Ok(softmax_unchecked(logits))
}

pub(crate) fn softmax_unchecked(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn target_prob(probs: &[f64], target: usize) -> Result<f64> {
    probs.get(target).copied().ok_or_else(|| {
        Error::invalid(format!(
            "target class {target} out of range for {} classes",
            probs.len()
        ))
    })
}

/// `-ln(p_target)` with the probability floored at [`PROB_FLOOR`].
pub fn cross_entropy(probs: &[f64], target: usize) -> Result<f64> {
    let p = target_prob(probs, target)?;
    Ok(-p.max(PROB_FLOOR).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocalLossConfig {
    pub gamma: f64,
    pub alphas: Vec<f64>,
}

impl FocalLossConfig {
    pub fn new(gamma: f64, alphas: Vec<f64>) -> Result<Self> {
        let cfg = FocalLossConfig { gamma, alphas };
        cfg.validate()?;
        Ok(cfg)
    }

    /// All-ones class weights.
    pub fn unweighted(gamma: f64, num_classes: usize) -> Result<Self> {
        Self::new(gamma, vec![1.0; num_classes])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!(
                "focal gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        if self.alphas.is_empty() {
            return Err(Error::invalid("focal alphas must not be empty"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::invalid(format!("focal alpha {a} outside [0, 1]")));
        }
        Ok(())
    }
}

/// `-α_t (1 - p_t)^γ ln(p_t)`.
pub fn focal_loss(probs: &[f64], target: usize, cfg: &FocalLossConfig) -> Result<f64> {
    if cfg.alphas.len() != probs.len() {
        return Err(Error::invalid(format!(
            "focal config has {} alphas for {} classes",
            cfg.alphas.len(),
            probs.len()
        )));
    }
    let p = target_prob(probs, target)?;
    let alpha = cfg.alphas[target];
    Ok(-alpha * (1.0 - p).powf(cfg.gamma) * p.max(PROB_FLOOR).ln())
}

/// Sum of squared differences.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "mse length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Training objective applied to the final network output.
#[derive(Debug, Clone, PartialEq)]
pub enum Loss {
    CrossEntropy,
    Focal(FocalLossConfig),
    Mse,
}

/// Supervision for one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Class(usize),
    Values(Vec<f64>),
}

impl Loss {
    /// Loss value and its gradient with respect to the network output.
    pub fn value_and_grad(&self, output: &[f64], target: &Target) -> Result<(f64, Vec<f64>)> {
        match (self, target) {
            (Loss::CrossEntropy, Target::Class(t)) => {
                let probs = softmax(output)?;
                let loss = cross_entropy(&probs, *t)?;
                let mut grad = probs;
                if grad[*t] < PROB_FLOOR {
                    // below the floor the loss is constant
                    grad.iter_mut().for_each(|g| *g = 0.0);
                } else {
                    grad[*t] -= 1.0;
                }
                Ok((loss, grad))
            }
            (Loss::Focal(cfg), Target::Class(t)) => {
                let probs = softmax(output)?;
                let loss = focal_loss(&probs, *t, cfg)?;
                let grad = focal_grad(&probs, *t, cfg);
                Ok((loss, grad))
            }
            (Loss::Mse, Target::Values(y)) => {
                let loss = mse(output, y)?;
                let grad = output.iter().zip(y).map(|(o, y)| 2.0 * (o - y)).collect();
                Ok((loss, grad))
            }
            (loss, target) => Err(Error::invalid(format!(
                "loss {loss:?} cannot be paired with target {target:?}"
            ))),
        }
    }
}

/// d FL / d z_k = (dFL/dp_t) · p_t (δ_tk − p_k).
fn focal_grad(probs: &[f64], t: usize, cfg: &FocalLossConfig) -> Vec<f64> {
    let p = probs[t];
    let q = 1.0 - p;
    let alpha = cfg.alphas[t];
    let gamma = cfg.gamma;
    let log_p = p.max(PROB_FLOOR).ln();
    // d/dp of (1-p)^γ, zero at p = 1 or γ = 0
    let d_mod = if gamma == 0.0 || q <= 0.0 {
        0.0
    } else {
        -gamma * q.powf(gamma - 1.0)
    };
    let d_log = if p < PROB_FLOOR { 0.0 } else { 1.0 / p };
    let dl_dp = -alpha * (d_mod * log_p + q.powf(gamma) * d_log);
    probs
        .iter()
        .enumerate()
        .map(|(k, &pk)| {
            let delta = if k == t { 1.0 } else { 0.0 };
            dl_dp * p * (delta - pk)
        })
        .collect()
}
