use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Topology of a fully connected network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl NetSpec {
    pub const DEFAULT_HIDDEN: [usize; 2] = [256, 256];

    /// Scalar value head: rectifier hidden layers, identity output.
    pub fn value_head(input: usize) -> Self {
        NetSpec {
            input,
            hidden: Self::DEFAULT_HIDDEN.to_vec(),
            output: 1,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
        }
    }

    /// Bounded action head: rectifier hidden layers, `tanh` output in [-1, 1].
    pub fn action_head(input: usize, output: usize) -> Self {
        NetSpec {
            input,
            hidden: Self::DEFAULT_HIDDEN.to_vec(),
            output,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Tanh,
        }
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.hidden = hidden;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.output == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(NnError::InvalidSpec(format!(
                "all widths must be >= 1: {} -> {:?} -> {}",
                self.input, self.hidden, self.output
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out, activation)` for every layer in order.
    pub fn layer_dims(&self) -> Vec<(usize, usize, Activation)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input;
        for &h in &self.hidden {
            dims.push((prev, h, self.hidden_activation));
            prev = h;
        }
        dims.push((prev, self.output, self.output_activation));
        dims
    }

    pub fn num_params(&self) -> usize {
        self.layer_dims().iter().map(|&(i, o, _)| i * o + o).sum()
    }
}
