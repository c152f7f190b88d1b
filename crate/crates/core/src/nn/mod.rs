//! Fully connected ReLU network used as the Q-function approximator.
//!
//! Weights are stored `fan_in x fan_out` so a batch `X` (rows are records)
//! maps to `relu(X . W + b)`. Every layer, the output layer included, applies
//! ReLU, so Q-values are never negative.

mod checkpoint;
mod optim;

pub use checkpoint::{Checkpoint, RngState, CHECKPOINT_MAGIC};
pub use optim::{AdamState, Optimizer, OptimizerKind};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("network needs at least one layer")]
    NoLayers,
    #[error("layer {index}: widths must be positive (got {inputs} -> {outputs})")]
    ZeroWidth {
        index: usize,
        inputs: usize,
        outputs: usize,
    },
    #[error("layer {index} expects {expected} inputs but the previous layer emits {found}")]
    LayerChain {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("layer {index}: parameter shapes do not match its spec")]
    ParameterShape { index: usize },
    #[error("batch width {found} does not match network input width {expected}")]
    InputWidth { expected: usize, found: usize },
    #[error("got {targets} action targets for {records} records")]
    TargetCount { records: usize, targets: usize },
    #[error("record {record}: action {action} outside 0..{outputs}")]
    ActionOutOfRange {
        record: usize,
        action: usize,
        outputs: usize,
    },
    #[error("empty batch")]
    EmptyBatch,
    #[error("gradient/optimizer shapes do not match the network")]
    GradientShape,
    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn relu(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            activation: Activation::Relu,
        }
    }
}

/// Hidden layer width of the default architecture.
pub const HIDDEN_WIDTH: usize = 100;

/// `input -> 100 -> 100 -> 5`, ReLU everywhere.
pub fn default_layers(input_width: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::relu(input_width, HIDDEN_WIDTH),
        LayerSpec::relu(HIDDEN_WIDTH, HIDDEN_WIDTH),
        LayerSpec::relu(HIDDEN_WIDTH, crate::data::ClassLabel::COUNT),
    ]
}

fn validate_specs(specs: &[LayerSpec]) -> Result<(), NnError> {
    if specs.is_empty() {
        return Err(NnError::NoLayers);
    }
    for (i, s) in specs.iter().enumerate() {
        if s.inputs == 0 || s.outputs == 0 {
            return Err(NnError::ZeroWidth {
                index: i,
                inputs: s.inputs,
                outputs: s.outputs,
            });
        }
        if i > 0 && specs[i - 1].outputs != s.inputs {
            return Err(NnError::LayerChain {
                index: i,
                expected: s.inputs,
                found: specs[i - 1].outputs,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub spec: LayerSpec,
    /// `inputs x outputs`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    layers: Vec<DenseLayer>,
}

/// One `(action, target)` pair per record; only the chosen action's output
/// receives error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionTarget {
    pub action: usize,
    pub target: f64,
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl GradientSet {
    pub fn zeros_like(net: &QNetwork) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weights.raw_dim()))
                .collect(),
            biases: net
                .layers
                .iter()
                .map(|l| Array1::zeros(l.bias.raw_dim()))
                .collect(),
        }
    }

    pub fn matches(&self, net: &QNetwork) -> bool {
        self.weights.len() == net.layers.len()
            && self.biases.len() == net.layers.len()
            && net.layers.iter().enumerate().all(|(i, l)| {
                self.weights[i].dim() == l.weights.dim() && self.biases[i].dim() == l.bias.dim()
            })
    }

    /// Index of the first layer holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<usize> {
        (0..self.weights.len()).find(|&i| {
            self.weights[i].iter().any(|g| !g.is_finite())
                || self.biases[i].iter().any(|g| !g.is_finite())
        })
    }
}

/// Cached activations of one forward pass, consumed by backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardPass<'a> {
    input: ArrayView2<'a, f64>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
}

impl ForwardPass<'_> {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("at least one layer")
    }

    pub fn into_output(mut self) -> Array2<f64> {
        self.post.pop().expect("at least one layer")
    }
}

fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| if v > 0.0 { v } else { 0.0 })
}

impl QNetwork {
    /// Weights ~ N(0, 1/fan_in), biases zero. Same seed, same network.
    pub fn new(specs: &[LayerSpec], seed: u64) -> Result<Self, NnError> {
        validate_specs(specs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = specs
            .iter()
            .map(|spec| {
                let std = 1.0 / (spec.inputs as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive std");
                let data: Vec<f64> = (0..spec.inputs * spec.outputs)
                    .map(|_| normal.sample(&mut rng))
                    .collect();
                DenseLayer {
                    spec: *spec,
                    weights: Array2::from_shape_vec((spec.inputs, spec.outputs), data)
                        .expect("shape matches data"),
                    bias: Array1::zeros(spec.outputs),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self, NnError> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        validate_specs(&specs)?;
        for (i, l) in layers.iter().enumerate() {
            if l.weights.dim() != (l.spec.inputs, l.spec.outputs) || l.bias.len() != l.spec.outputs
            {
                return Err(NnError::ParameterShape { index: i });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Mutable parameter access. Changing array shapes breaks the network.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].spec.inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.outputs
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    fn check_input(&self, batch: &ArrayView2<'_, f64>) -> Result<(), NnError> {
        if batch.ncols() != self.input_width() {
            return Err(NnError::InputWidth {
                expected: self.input_width(),
                found: batch.ncols(),
            });
        }
        Ok(())
    }

    /// Q-values, `records x outputs`.
    pub fn forward(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>, NnError> {
        Ok(self.forward_pass(batch)?.into_output())
    }

    pub fn forward_pass<'a>(&self, batch: ArrayView2<'a, f64>) -> Result<ForwardPass<'a>, NnError> {
        self.check_input(&batch)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let z = match post.last() {
                None => batch.dot(&layer.weights),
                Some(prev) => prev.dot(&layer.weights),
            } + &layer.bias;
            post.push(relu(&z));
            pre.push(z);
        }
        Ok(ForwardPass {
            input: batch,
            pre,
            post,
        })
    }

    /// MSE over the chosen actions and its parameter gradients.
    pub fn backward(
        &self,
        batch: ArrayView2<'_, f64>,
        targets: &[ActionTarget],
    ) -> Result<(f64, GradientSet), NnError> {
        let pass = self.forward_pass(batch)?;
        self.backward_from(&pass, targets)
    }

    /// Backpropagation from a pass produced by this network's current parameters.
    ///
    /// `loss = (1/n) sum_i (Q(s_i, a_i) - target_i)^2`. ReLU's derivative at 0 is 0.
    pub fn backward_from(
        &self,
        pass: &ForwardPass<'_>,
        targets: &[ActionTarget],
    ) -> Result<(f64, GradientSet), NnError> {
        let q = pass.output();
        let n = q.nrows();
        if n == 0 {
            return Err(NnError::EmptyBatch);
        }
        if targets.len() != n {
            return Err(NnError::TargetCount {
                records: n,
                targets: targets.len(),
            });
        }
        let outputs = q.ncols();
        let scale = 2.0 / n as f64;
        let mut sum_sq = 0.0;
        let mut delta = Array2::<f64>::zeros(q.raw_dim());
        for (i, t) in targets.iter().enumerate() {
            if t.action >= outputs {
                return Err(NnError::ActionOutOfRange {
                    record: i,
                    action: t.action,
                    outputs,
                });
            }
            let diff = q[[i, t.action]] - t.target;
            sum_sq += diff * diff;
            delta[[i, t.action]] = scale * diff;
        }
        let loss = sum_sq / n as f64;

        let mut grads = GradientSet::zeros_like(self);
        for l in (0..self.layers.len()).rev() {
            Zip::from(&mut delta).and(&pass.pre[l]).for_each(|d, &z| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
            grads.weights[l] = match l {
                0 => pass.input.t().dot(&delta),
                _ => pass.post[l - 1].t().dot(&delta),
            };
            grads.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                delta = delta.dot(&self.layers[l].weights.t());
            }
        }
        Ok((loss, grads))
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in row.into_iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}
