use rand::Rng;

use crate::error::{check_len, NnError, Result};
use crate::gemm::{mm, mm_at, mm_bt};
use crate::optim::AdamState;
use crate::spec::{Activation, NetSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    weight_offset: usize,
    bias_offset: usize,
    activation: Activation,
}

/// A fully connected network together with its gradient accumulator and
/// optimizer state.
///
/// Parameters live in one flat vector laid out layer by layer as the
/// row-major weight matrix (`fan_out × fan_in`) followed by the bias.
#[derive(Debug, Clone)]
pub struct Mlp {
    spec: NetSpec,
    layers: Vec<Layer>,
    params: Vec<f64>,
    grads: Vec<f64>,
    pub(crate) adam: AdamState,
}

/// Read-only view of one layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub struct LayerRef<'a> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub activation: Activation,
    pub weight: &'a [f64],
    pub bias: &'a [f64],
}

/// Mutable view of one layer inside the flat parameter vector.
#[derive(Debug)]
pub struct LayerMut<'a> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight: &'a mut [f64],
    pub bias: &'a mut [f64],
}

/// Activations recorded by a batched forward pass, consumed by backward.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    batch: usize,
    input: Vec<f64>,
    outputs: Vec<Vec<f64>>,
    signature: Vec<(usize, usize)>,
}

impl Tape {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Network output, `batch × output` row-major.
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }
}

impl Mlp {
    /// Builds a network with every parameter set to zero.
    pub fn zeros(spec: NetSpec) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::new();
        let mut offset = 0;
        for (fan_in, fan_out, activation) in spec.layer_dims() {
            layers.push(Layer {
                fan_in,
                fan_out,
                weight_offset: offset,
                bias_offset: offset + fan_in * fan_out,
                activation,
            });
            offset += fan_in * fan_out + fan_out;
        }
        Ok(Mlp {
            spec,
            layers,
            params: vec![0.0; offset],
            grads: vec![0.0; offset],
            adam: AdamState::new(offset),
        })
    }

    /// Uniform fan-in initialization, `U(-1/√fan_in, 1/√fan_in)`, with the
    /// final layer scaled by `final_scale`.
    pub fn new<R: Rng + ?Sized>(spec: NetSpec, final_scale: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        let last = net.layers.len() - 1;
        for (idx, layer) in net.layers.clone().into_iter().enumerate() {
            let bound = 1.0 / (layer.fan_in as f64).sqrt();
            let scale = if idx == last { final_scale } else { 1.0 };
            let end = layer.bias_offset + layer.fan_out;
            for p in &mut net.params[layer.weight_offset..end] {
                *p = rng.random_range(-bound..bound) * scale;
            }
        }
        Ok(net)
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn input_width(&self) -> usize {
        self.spec.input
    }

    pub fn output_width(&self) -> usize {
        self.spec.output
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn grads(&self) -> &[f64] {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut [f64] {
        &mut self.grads
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Number of optimizer steps applied so far.
    pub fn step_count(&self) -> u64 {
        self.adam.step
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, idx: usize) -> LayerRef<'_> {
        let l = self.layers[idx];
        LayerRef {
            fan_in: l.fan_in,
            fan_out: l.fan_out,
            activation: l.activation,
            weight: &self.params[l.weight_offset..l.bias_offset],
            bias: &self.params[l.bias_offset..l.bias_offset + l.fan_out],
        }
    }

    pub fn layer_mut(&mut self, idx: usize) -> LayerMut<'_> {
        let l = self.layers[idx];
        let (weight, rest) = self.params[l.weight_offset..].split_at_mut(l.fan_in * l.fan_out);
        LayerMut {
            fan_in: l.fan_in,
            fan_out: l.fan_out,
            weight,
            bias: &mut rest[..l.fan_out],
        }
    }

    /// Copies parameters (not optimizer state) from a network of identical shape.
    pub fn copy_params_from(&mut self, other: &Mlp) -> Result<()> {
        self.check_same_shape(other)?;
        self.params.copy_from_slice(&other.params);
        Ok(())
    }

    pub(crate) fn check_same_shape(&self, other: &Mlp) -> Result<()> {
        if self.spec.layer_dims() != other.spec.layer_dims() {
            return Err(NnError::Dimension {
                what: "network shape",
                expected: self.params.len(),
                got: other.params.len(),
            });
        }
        Ok(())
    }

    fn signature(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.fan_in, l.fan_out)).collect()
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let tape = self.forward_batch(input, 1)?;
        Ok(tape.outputs.into_iter().last().unwrap_or_default())
    }

    /// Batched forward pass over `batch` row-major inputs, recording the
    /// activations needed by [`Mlp::backward`].
    pub fn forward_batch(&self, input: &[f64], batch: usize) -> Result<Tape> {
        check_len("forward input", batch * self.spec.input, input.len())?;
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let prev = outputs.last().map(Vec::as_slice).unwrap_or(input);
            let w = &self.params[layer.weight_offset..layer.bias_offset];
            let b = &self.params[layer.bias_offset..layer.bias_offset + layer.fan_out];
            let mut out = vec![0.0; batch * layer.fan_out];
            for row in out.chunks_exact_mut(layer.fan_out) {
                row.copy_from_slice(b);
            }
            mm_bt(batch, layer.fan_in, layer.fan_out, prev, w, 1.0, &mut out);
            if layer.activation != Activation::Identity {
                out.iter_mut().for_each(|v| *v = layer.activation.apply(*v));
            }
            outputs.push(out);
        }
        Ok(Tape {
            batch,
            input: input.to_vec(),
            outputs,
            signature: self.signature(),
        })
    }

    /// Accumulates `∂(upstream · output)/∂params` into the gradient
    /// accumulator and returns `∂(upstream · output)/∂input`.
    pub fn backward(&mut self, tape: &Tape, upstream: &[f64]) -> Result<Vec<f64>> {
        let mut grads = std::mem::take(&mut self.grads);
        let res = self.backprop(tape, upstream, Some(&mut grads));
        self.grads = grads;
        res
    }

    /// Input gradient only; parameters' gradients are left untouched.
    pub fn input_gradient(&self, tape: &Tape, upstream: &[f64]) -> Result<Vec<f64>> {
        self.backprop(tape, upstream, None)
    }

    fn backprop(&self, tape: &Tape, upstream: &[f64], mut grads: Option<&mut Vec<f64>>) -> Result<Vec<f64>> {
        if tape.batch == 0 || tape.outputs.is_empty() {
            return Err(NnError::MissingForward);
        }
        if tape.signature != self.signature() {
            return Err(NnError::Dimension {
                what: "tape recorded by a different network",
                expected: self.layers.len(),
                got: tape.signature.len(),
            });
        }
        let n = tape.batch;
        check_len("backward upstream", n * self.spec.output, upstream.len())?;

        let last = self.layers.len() - 1;
        let mut delta: Vec<f64> = upstream
            .iter()
            .zip(&tape.outputs[last])
            .map(|(&u, &y)| u * self.layers[last].activation.derivative_from_output(y))
            .collect();

        for idx in (0..self.layers.len()).rev() {
            let layer = self.layers[idx];
            let prev: &[f64] = if idx == 0 { &tape.input } else { &tape.outputs[idx - 1] };
            if let Some(g) = grads.as_deref_mut() {
                let gw = &mut g[layer.weight_offset..layer.bias_offset];
                mm_at(layer.fan_out, n, layer.fan_in, &delta, prev, 1.0, gw);
                let gb = &mut g[layer.bias_offset..layer.bias_offset + layer.fan_out];
                for row in delta.chunks_exact(layer.fan_out) {
                    for (acc, d) in gb.iter_mut().zip(row) {
                        *acc += d;
                    }
                }
            }
            let w = &self.params[layer.weight_offset..layer.bias_offset];
            let mut dprev = vec![0.0; n * layer.fan_in];
            mm(n, layer.fan_out, layer.fan_in, &delta, w, 0.0, &mut dprev);
            if idx == 0 {
                return Ok(dprev);
            }
            let act = self.layers[idx - 1].activation;
            for (d, &y) in dprev.iter_mut().zip(prev) {
                *d *= act.derivative_from_output(y);
            }
            delta = dprev;
        }
        unreachable!("loop returns at the input layer")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear(input: usize, output: usize) -> NetSpec {
        NetSpec {
            input,
            hidden: vec![],
            output,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
        }
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(NetSpec::value_head(4).with_hidden(vec![3, 3])).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mut net = Mlp::zeros(linear(3, 3)).unwrap();
        let l = net.layer_mut(0);
        for i in 0..3 {
            l.weight[i * 3 + i] = 1.0;
        }
        assert_eq!(net.forward(&[0.3, -1.5, 7.0]).unwrap(), vec![0.3, -1.5, 7.0]);
    }

    #[test]
    fn hand_evaluated_two_two_one() {
        // h = tanh(W1 x + b1), y = W2 h + b2 with x = (1, -1)
        let spec = NetSpec {
            input: 2,
            hidden: vec![2],
            output: 1,
            hidden_activation: Activation::Tanh,
            output_activation: Activation::Identity,
        };
        let mut net = Mlp::zeros(spec).unwrap();
        net.params_mut()
            .copy_from_slice(&[0.5, -0.25, 1.0, 2.0, 0.1, -0.2, 1.5, -0.5, 0.3]);
        // layer 1 pre-activations: 0.5 + 0.25 + 0.1 = 0.85 ; 1 - 2 - 0.2 = -1.2
        let h0 = 0.85f64.tanh();
        let h1 = (-1.2f64).tanh();
        let expected = 1.5 * h0 - 0.5 * h1 + 0.3;
        let y = net.forward(&[1.0, -1.0]).unwrap();
        assert!((y[0] - expected).abs() < 1e-15);
        assert!((y[0] - 1.753_431_508_255_473).abs() < 1e-12);
    }

    #[test]
    fn width_mismatch_is_dimension_error() {
        let net = Mlp::zeros(linear(3, 1)).unwrap();
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(NnError::Dimension { .. })));
    }

    #[test]
    fn linear_backward_is_analytic() {
        let mut net = Mlp::zeros(linear(2, 2)).unwrap();
        net.params_mut().copy_from_slice(&[1.0, 2.0, 3.0, 4.0, 0.5, -0.5]);
        let x = [0.7, -0.3];
        let u = [2.0, -1.0];
        let tape = net.forward_batch(&x, 1).unwrap();
        let dx = net.backward(&tape, &u).unwrap();
        // dW = u xᵀ, db = u, dx = Wᵀ u
        assert_eq!(net.grads(), &[1.4, -0.6, -0.7, 0.3, 2.0, -1.0]);
        assert_eq!(dx, vec![1.0 * 2.0 - 3.0, 2.0 * 2.0 - 4.0]);
    }

    #[test]
    fn zero_upstream_leaves_gradients_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::new(NetSpec::value_head(4).with_hidden(vec![5]), 1.0, &mut rng).unwrap();
        let tape = net.forward_batch(&[0.1, 0.2, 0.3, 0.4], 1).unwrap();
        let dx = net.backward(&tape, &[0.0]).unwrap();
        assert!(net.grads().iter().all(|&g| g == 0.0));
        assert!(dx.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn empty_tape_is_state_error() {
        let mut net = Mlp::zeros(linear(2, 1)).unwrap();
        let err = net.backward(&Tape::default(), &[1.0]).unwrap_err();
        assert!(matches!(err, NnError::MissingForward));
    }

    #[test]
    fn tape_from_other_network_rejected() {
        let a = Mlp::zeros(linear(2, 1)).unwrap();
        let mut b = Mlp::zeros(linear(3, 1)).unwrap();
        let tape = a.forward_batch(&[1.0, 1.0], 1).unwrap();
        assert!(b.backward(&tape, &[1.0]).is_err());
    }

    #[test]
    fn flat_and_layer_views_alias() {
        let mut net = Mlp::zeros(NetSpec::value_head(2).with_hidden(vec![3])).unwrap();
        net.layer_mut(1).bias[0] = 4.5;
        assert_eq!(*net.params().last().unwrap(), 4.5);
        let n = net.num_params();
        net.params_mut()[n - 2] = -1.0;
        assert_eq!(net.layer(1).weight[2], -1.0);
        assert_eq!(net.grads().len(), net.params().len());
    }

    #[test]
    fn final_scale_shrinks_last_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(NetSpec::action_head(8, 2).with_hidden(vec![16, 16]), 0.01, &mut rng).unwrap();
        let last = net.layer(2);
        let bound = 0.01 / 4.0;
        assert!(last.weight.iter().all(|w| w.abs() <= bound));
        let first = net.layer(0);
        assert!(first.weight.iter().any(|w| w.abs() > bound));
    }

    #[test]
    fn batched_rows_match_single_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::new(NetSpec::value_head(3).with_hidden(vec![7, 5]), 1.0, &mut rng).unwrap();
        let xs = [0.1, 0.2, 0.3, -1.0, 0.5, 2.0, 0.0, 0.0, 0.0];
        let tape = net.forward_batch(&xs, 3).unwrap();
        for (i, row) in xs.chunks(3).enumerate() {
            let y = net.forward(row).unwrap();
            assert_eq!(y[0], tape.output()[i]);
        }
    }
}
