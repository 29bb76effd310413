use super::layer::DenseLayer;
use super::loss::{Loss, Target};
use super::tensor::all_finite;
use crate::error::{Error, Result};

/// One supervised training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Target,
}

impl Sample {
    pub fn class(input: Vec<f64>, class: usize) -> Self {
        Sample {
            input,
            target: Target::Class(class),
        }
    }

    pub fn values(input: Vec<f64>, values: Vec<f64>) -> Self {
        Sample {
            input,
            target: Target::Values(values),
        }
    }
}

/// Feed-forward stack of dense layers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
}

/// Cached activations from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub input: Vec<f64>,
    /// Pre-activation of each layer.
    pub pre: Vec<Vec<f64>>,
    /// Post-activation of each layer.
    pub post: Vec<Vec<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &[f64] {
        self.post.last().map_or(&self.input, |v| v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Per-layer gradients with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights.as_slice().len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    fn scale(&mut self, s: f64) {
        for g in &mut self.layers {
            g.weights.iter_mut().for_each(|w| *w *= s);
            g.biases.iter_mut().for_each(|b| *b *= s);
        }
    }

    /// Flattened in network parameter order (per layer: weights then biases).
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|g| g.weights.iter().chain(&g.biases).copied())
            .collect()
    }
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::invalid(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Network { layers })
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.first().map(DenseLayer::input_dim)
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.layers.last().map(DenseLayer::output_dim)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardPass> {
        if let Some(d) = self.input_dim() {
            if d != input.len() {
                return Err(Error::invalid(format!(
                    "network expects input of length {d}, got {}",
                    input.len()
                )));
            }
        }
        let mut pass = ForwardPass {
            input: input.to_vec(),
            pre: Vec::with_capacity(self.layers.len()),
            post: Vec::with_capacity(self.layers.len()),
        };
        for layer in &self.layers {
            let x = pass.post.last().unwrap_or(&pass.input);
            let z = layer.pre_activation(x);
            let a: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pass.pre.push(z);
            pass.post.push(a);
        }
        Ok(pass)
    }

    /// Output of the full stack.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut x = input.to_vec();
        if let Some(d) = self.input_dim() {
            if d != input.len() {
                return Err(Error::invalid(format!(
                    "network expects input of length {d}, got {}",
                    input.len()
                )));
            }
        }
        for layer in &self.layers {
            x = layer.apply(&x);
        }
        Ok(x)
    }

    /// Mean loss over the batch without computing gradients.
    pub fn batch_loss(&self, batch: &[Sample], loss: &Loss) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let mut total = 0.0;
        for s in batch {
            let out = self.predict(&s.input)?;
            total += loss.value_and_grad(&out, &s.target)?.0;
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean loss and mean gradients over the batch by reverse accumulation.
    pub fn gradients(&self, batch: &[Sample], loss: &Loss) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut total = 0.0;
        for sample in batch {
            let pass = self.forward(&sample.input)?;
            let (l, d_out) = loss.value_and_grad(pass.output(), &sample.target)?;
            total += l;
            self.accumulate(&pass, d_out, &mut grads);
        }
        let inv = 1.0 / batch.len() as f64;
        grads.scale(inv);
        Ok((total * inv, grads))
    }

    fn accumulate(&self, pass: &ForwardPass, d_out: Vec<f64>, grads: &mut Gradients) {
        let mut upstream = d_out;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let delta: Vec<f64> = upstream
                .iter()
                .zip(&pass.pre[i])
                .map(|(g, &z)| g * layer.activation.derivative(z))
                .collect();
            let x = if i == 0 {
                &pass.input
            } else {
                &pass.post[i - 1]
            };
            let g = &mut grads.layers[i];
            let cols = x.len();
            for (r, &d) in delta.iter().enumerate() {
                g.biases[r] += d;
                for (w, &xc) in g.weights[r * cols..(r + 1) * cols].iter_mut().zip(x) {
                    *w += d * xc;
                }
            }
            if i > 0 {
                upstream = layer.weights.tr_mul_vec(&delta);
            }
        }
    }

    /// Plain SGD step `w ← w − lr·g`.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in layer.weights.as_mut_slice().iter_mut().zip(&g.weights) {
                *w -= learning_rate * gw;
            }
            for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
                *b -= learning_rate * gb;
            }
        }
    }

    /// One SGD step on `batch`; returns the mean loss before the update.
    pub fn backward_and_step(
        &mut self,
        batch: &[Sample],
        loss: &Loss,
        learning_rate: f64,
    ) -> Result<f64> {
        let (value, grads) = self.gradients(batch, loss)?;
        for (i, g) in grads.layers.iter().enumerate() {
            if !all_finite(&g.weights) || !all_finite(&g.biases) {
                return Err(Error::TrainingDiverged {
                    layer: i,
                    detail: "non-finite gradient".into(),
                });
            }
        }
        if !value.is_finite() {
            return Err(Error::TrainingDiverged {
                layer: self.layers.len().saturating_sub(1),
                detail: format!("non-finite loss {value}"),
            });
        }
        self.apply_gradients(&grads, learning_rate);
        Ok(value)
    }

    fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            let nw = layer.weights.as_slice().len();
            if index < nw {
                return &mut layer.weights.as_mut_slice()[index];
            }
            index -= nw;
            if index < layer.biases.len() {
                return &mut layer.biases[index];
            }
            index -= layer.biases.len();
        }
        panic!("parameter index out of range");
    }
}

/// Denominator floor for the relative error in gradient checks.
const GRADCHECK_FLOOR: f64 = 1e-7;

/// Worst relative error between analytic and central-difference gradients.
pub fn gradient_check(net: &Network, batch: &[Sample], loss: &Loss, epsilon: f64) -> Result<f64> {
    let (_, analytic) = net.gradients(batch, loss)?;
    compare_gradients(net, batch, loss, epsilon, &analytic)
}

/// Compares supplied gradients against central differences of the batch loss.
///
/// The relative error per parameter is `|a − n| / max(|a| + |n|, 1e-7)`.
pub fn compare_gradients(
    net: &Network,
    batch: &[Sample],
    loss: &Loss,
    epsilon: f64,
    analytic: &Gradients,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    let flat = analytic.flatten();
    if flat.len() != net.param_count() {
        return Err(Error::invalid("gradient layout does not match network"));
    }
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in flat.iter().enumerate() {
        let orig = *probe.param_mut(i);
        *probe.param_mut(i) = orig + epsilon;
        let plus = probe.batch_loss(batch, loss)?;
        *probe.param_mut(i) = orig - epsilon;
        let minus = probe.batch_loss(batch, loss)?;
        *probe.param_mut(i) = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(GRADCHECK_FLOOR);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::Activation;
    use crate::nn::tensor::Matrix;

    fn layer(rows: usize, cols: usize, w: &[f64], b: &[f64], act: Activation) -> DenseLayer {
        DenseLayer::new(
            Matrix::from_vec(rows, cols, w.to_vec()).unwrap(),
            b.to_vec(),
            act,
        )
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = Network::new(vec![DenseLayer::new(
            Matrix::identity(3),
            vec![0.0; 3],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let x = [0.5, -2.0, 7.25];
        assert_eq!(net.forward(&x).unwrap().output(), &x);
    }

    #[test]
    fn relu_clamps_negative_preactivations() {
        let net = Network::new(vec![layer(
            2,
            2,
            &[-1.0, 0.0, 0.0, -1.0],
            &[-0.5, -0.5],
            Activation::Relu,
        )])
        .unwrap();
        assert_eq!(net.predict(&[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn two_layer_hand_computed() {
        // W1 = [[1,2],[3,-4]], b1 = [0.5,-1]; x = [1,1] -> pre [3.5,-2] -> relu [3.5,0]
        // W2 = [[2,0],[-1,1]], b2 = [0,1] -> [7, -2.5]
        let net = Network::new(vec![
            layer(2, 2, &[1.0, 2.0, 3.0, -4.0], &[0.5, -1.0], Activation::Relu),
            layer(
                2,
                2,
                &[2.0, 0.0, -1.0, 1.0],
                &[0.0, 1.0],
                Activation::Identity,
            ),
        ])
        .unwrap();
        let pass = net.forward(&[1.0, 1.0]).unwrap();
        assert_eq!(pass.pre[0], vec![3.5, -2.0]);
        assert_eq!(pass.post[0], vec![3.5, 0.0]);
        assert_eq!(pass.output(), &[7.0, -2.5]);
    }

    #[test]
    fn shape_errors() {
        let bad = Network::new(vec![
            DenseLayer::zeros(3, 2, Activation::Relu),
            DenseLayer::zeros(3, 1, Activation::Identity),
        ]);
        assert!(bad.is_err());
        let net = Network::new(vec![DenseLayer::zeros(3, 2, Activation::Relu)]).unwrap();
        assert!(net.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let mut net = Network::new(vec![layer(
            1,
            2,
            &[0.3, -0.2],
            &[0.1],
            Activation::Identity,
        )])
        .unwrap();
        let before = net.clone();
        let batch = [Sample::values(vec![1.0, 2.0], vec![0.7])];
        net.backward_and_step(&batch, &Loss::Mse, 0.0).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn linear_mse_step_matches_closed_form() {
        // gradient of ||Wx + b − y||² is 2(Wx + b − y)xᵀ for W and 2(Wx + b − y) for b
        let w = [0.3, -0.2, 0.5, 0.1];
        let b = [0.1, -0.4];
        let x = [1.5, -2.0];
        let y = [0.7, 0.2];
        let mut net = Network::new(vec![layer(2, 2, &w, &b, Activation::Identity)]).unwrap();
        let lr = 0.05;
        let loss = net
            .backward_and_step(&[Sample::values(x.to_vec(), y.to_vec())], &Loss::Mse, lr)
            .unwrap();

        let out = [
            w[0] * x[0] + w[1] * x[1] + b[0],
            w[2] * x[0] + w[3] * x[1] + b[1],
        ];
        let r = [out[0] - y[0], out[1] - y[1]];
        assert!((loss - (r[0] * r[0] + r[1] * r[1])).abs() < 1e-15);
        let l = &net.layers[0];
        for row in 0..2 {
            for col in 0..2 {
                let expected = w[row * 2 + col] - lr * 2.0 * r[row] * x[col];
                assert!((l.weights.get(row, col) - expected).abs() < 1e-15);
            }
            assert!((l.biases[row] - (b[row] - lr * 2.0 * r[row])).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_network_has_zero_gradcheck_error() {
        let net = Network::default();
        let batch = [Sample::values(vec![1.0], vec![0.0])];
        assert_eq!(gradient_check(&net, &batch, &Loss::Mse, 1e-5).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut net =
            Network::new(vec![layer(1, 1, &[1e300], &[0.0], Activation::Identity)]).unwrap();
        let err = net
            .backward_and_step(&[Sample::values(vec![1e300], vec![0.0])], &Loss::Mse, 0.1)
            .unwrap_err();
        assert!(
            matches!(err, Error::TrainingDiverged { layer: 0, .. }),
            "{err}"
        );
    }
}
