//! Dense-network numerics shared by every trained component.

pub mod checkpoint;
pub mod layer;
pub mod loss;
pub mod network;
pub mod tensor;
pub mod train;

pub use checkpoint::Checkpoint;
pub use layer::{Activation, DenseLayer};
pub use loss::{cross_entropy, focal_loss, mse, softmax, FocalLossConfig, Loss, Target};
pub use network::{compare_gradients, gradient_check, Gradients, Network, Sample};
pub use tensor::Matrix;
pub use train::{fit, EarlyStopping, EarlyStoppingConfig, TrainConfig, TrainReport};

use rand::Rng;

/// Builds `input → hidden… → output` with ReLU hidden layers and the given
/// output activation.
pub fn build_mlp<R: Rng + ?Sized>(
    input: usize,
    hidden: &[usize],
    output: usize,
    output_activation: Activation,
    rng: &mut R,
) -> Network {
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut prev = input;
    for &h in hidden {
        layers.push(DenseLayer::init(prev, h, Activation::Relu, rng));
        prev = h;
    }
    layers.push(DenseLayer::init(prev, output, output_activation, rng));
    Network { layers }
}
