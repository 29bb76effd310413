use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::tensor::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative at pre-activation `x`; the ReLU kink uses 0.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Affine map `W x + b` followed by an elementwise activation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        if biases.len() != weights.rows() {
            return Err(Error::invalid(format!(
                "bias length {} does not match {} output units",
                biases.len(),
                weights.rows()
            )));
        }
        Ok(DenseLayer {
            weights,
            biases,
            activation,
        })
    }

    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: Matrix::zeros(output, input),
            biases: vec![0.0; output],
            activation,
        }
    }

    /// Glorot-uniform for identity layers, He-normal for ReLU layers; zero biases.
    pub fn init<R: Rng + ?Sized>(
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let n = input * output;
        let data: Vec<f64> = match activation {
            Activation::Identity => {
                let bound = (6.0 / (input + output) as f64).sqrt();
                let dist = Uniform::new(-bound, bound).expect("finite positive bound");
                (0..n).map(|_| dist.sample(rng)).collect()
            }
            Activation::Relu => {
                let std = (2.0 / input as f64).sqrt();
                let dist = Normal::new(0.0, std).expect("finite positive std");
                (0..n).map(|_| dist.sample(rng)).collect()
            }
        };
        DenseLayer {
            weights: Matrix::from_vec(output, input, data).expect("shape matches"),
            biases: vec![0.0; output],
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.as_slice().len() + self.biases.len()
    }

    pub fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.weights.mul_vec(x);
        for (o, b) in out.iter_mut().zip(&self.biases) {
            *o += b;
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.pre_activation(x)
            .into_iter()
            .map(|v| self.activation.apply(v))
            .collect()
    }
}
