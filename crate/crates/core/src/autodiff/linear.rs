use super::graph::{Graph, Var};
use super::init::init_params;
use super::tensor::Tensor;
use crate::error::Result;
use crate::rng::Rng;

/// Affine map `x·W + b` with `W: [in, out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// A [`Linear`] placed on a graph.
#[derive(Clone, Copy, Debug)]
pub struct LinearVars {
    pub weight: Var,
    pub bias: Var,
}

impl Linear {
    /// Glorot weights, zero bias.
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Linear {
            weight: init_params(&[fan_in, fan_out], rng)?,
            bias: Tensor::zeros(&[fan_out]),
        })
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Linear {
            weight: Tensor::zeros(&[fan_in, fan_out]),
            bias: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn fan_out(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn bind(&self, g: &mut Graph, tracked: bool) -> LinearVars {
        let (w, b) = (self.weight.clone(), self.bias.clone());
        if tracked {
            LinearVars {
                weight: g.param(w),
                bias: g.param(b),
            }
        } else {
            LinearVars {
                weight: g.constant(w),
                bias: g.constant(b),
            }
        }
    }

    pub fn tensors(&self) -> [&Tensor; 2] {
        [&self.weight, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 2] {
        [&mut self.weight, &mut self.bias]
    }
}

impl LinearVars {
    /// `x` is a `[batch, in]` matrix.
    pub fn apply(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let xw = g.matmul(x, self.weight)?;
        g.add_row(xw, self.bias)
    }

    pub fn vars(&self) -> [Var; 2] {
        [self.weight, self.bias]
    }
}

/// Uniform access to a model's parameter tensors in a fixed order.
pub trait Parameterized {
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Sum of squared parameters.
    fn l2(&self) -> f64 {
        self.params().iter().map(|t| t.sum_squares()).sum()
    }

    /// Rounds all parameters through `f32` so checkpoints are lossless.
    fn freeze(&mut self) {
        for p in self.params_mut() {
            p.round_f32();
        }
    }
}
