use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayViewD, ArrayViewMutD, Zip};
use serde::{Deserialize, Serialize};

use super::{GradientSet, NnError, QNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(format!(
                "unknown optimizer {other:?} (expected adam or sgd)"
            )),
        }
    }
}

/// Adam moments, one buffer per parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m: GradientSet,
    pub v: GradientSet,
}

impl AdamState {
    pub fn new(net: &QNetwork) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: GradientSet::zeros_like(net),
            v: GradientSet::zeros_like(net),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Adam(AdamState),
    Sgd,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, net: &QNetwork) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(net)),
            OptimizerKind::Sgd => Optimizer::Sgd,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            Optimizer::Adam(_) => OptimizerKind::Adam,
            Optimizer::Sgd => OptimizerKind::Sgd,
        }
    }

    /// One descent step. Parameters are untouched when an error is returned.
    pub fn apply_update(
        &mut self,
        net: &mut QNetwork,
        grads: &GradientSet,
        learning_rate: f64,
    ) -> Result<(), NnError> {
        if !grads.matches(net) {
            return Err(NnError::GradientShape);
        }
        if let Some(layer) = grads.first_non_finite() {
            return Err(NnError::NonFiniteGradient { layer });
        }
        match self {
            Optimizer::Sgd => {
                for (l, layer) in net.layers_mut().iter_mut().enumerate() {
                    layer.weights.scaled_add(-learning_rate, &grads.weights[l]);
                    layer.bias.scaled_add(-learning_rate, &grads.biases[l]);
                }
            }
            Optimizer::Adam(state) => {
                if !state.m.matches(net) || !state.v.matches(net) {
                    return Err(NnError::GradientShape);
                }
                state.step += 1;
                let t = state.step.min(i32::MAX as u64) as i32;
                let hp = AdamStep {
                    lr: learning_rate,
                    beta1: state.beta1,
                    beta2: state.beta2,
                    epsilon: state.epsilon,
                    bias1: 1.0 - state.beta1.powi(t),
                    bias2: 1.0 - state.beta2.powi(t),
                };
                for (l, layer) in net.layers_mut().iter_mut().enumerate() {
                    hp.apply(
                        layer.weights.view_mut().into_dyn(),
                        grads.weights[l].view().into_dyn(),
                        state.m.weights[l].view_mut().into_dyn(),
                        state.v.weights[l].view_mut().into_dyn(),
                    );
                    hp.apply(
                        layer.bias.view_mut().into_dyn(),
                        grads.biases[l].view().into_dyn(),
                        state.m.biases[l].view_mut().into_dyn(),
                        state.v.biases[l].view_mut().into_dyn(),
                    );
                }
            }
        }
        Ok(())
    }
}

struct AdamStep {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    bias1: f64,
    bias2: f64,
}

impl AdamStep {
    fn apply(
        &self,
        params: ArrayViewMutD<'_, f64>,
        grads: ArrayViewD<'_, f64>,
        m: ArrayViewMutD<'_, f64>,
        v: ArrayViewMutD<'_, f64>,
    ) {
        Zip::from(params)
            .and(grads)
            .and(m)
            .and(v)
            .for_each(|p, &g, m, v| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / self.bias1;
                let v_hat = *v / self.bias2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{default_layers, DenseLayer, LayerSpec};
    use ndarray::array;

    fn scalar_net(x: f64) -> QNetwork {
        QNetwork::from_layers(vec![DenseLayer {
            spec: LayerSpec::relu(1, 1),
            weights: array![[x]],
            bias: array![0.0],
        }])
        .unwrap()
    }

    /// Gradient of f(x) = x^2 placed on the single weight.
    fn quadratic_grad(net: &QNetwork) -> GradientSet {
        let mut g = GradientSet::zeros_like(net);
        g.weights[0][[0, 0]] = 2.0 * net.layers()[0].weights[[0, 0]];
        g
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        for kind in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let mut net = QNetwork::new(&default_layers(7), 1).unwrap();
            let before = net.clone();
            let mut opt = Optimizer::new(kind, &net);
            let zeros = GradientSet::zeros_like(&net);
            opt.apply_update(&mut net, &zeros, 1e-3).unwrap();
            assert_eq!(net, before, "{kind}");
        }
    }

    #[test]
    fn one_step_moves_toward_minimum() {
        for kind in [OptimizerKind::Adam, OptimizerKind::Sgd] {
            let mut net = scalar_net(1.0);
            let mut opt = Optimizer::new(kind, &net);
            let g = quadratic_grad(&net);
            opt.apply_update(&mut net, &g, 0.1).unwrap();
            let x = net.layers()[0].weights[[0, 0]];
            assert!(x < 1.0 && x > 0.0, "{kind}: {x}");
        }
    }

    #[test]
    fn adam_converges_on_scalar_quadratic() {
        // Independent float simulation of the same recurrence lands at |x| ~ 7e-6.
        let mut net = scalar_net(1.0);
        let mut opt = Optimizer::new(OptimizerKind::Adam, &net);
        for _ in 0..200 {
            let g = quadratic_grad(&net);
            opt.apply_update(&mut net, &g, 0.1).unwrap();
        }
        let x = net.layers()[0].weights[[0, 0]];
        assert!(x.abs() < 1e-2, "x = {x}");
    }

    #[test]
    fn non_finite_gradient_aborts_without_touching_parameters() {
        let mut net = QNetwork::new(&default_layers(3), 2).unwrap();
        let before = net.clone();
        let mut opt = Optimizer::new(OptimizerKind::Adam, &net);
        let mut g = GradientSet::zeros_like(&net);
        g.biases[2][1] = f64::NAN;
        assert!(matches!(
            opt.apply_update(&mut net, &g, 1e-3),
            Err(NnError::NonFiniteGradient { layer: 2 })
        ));
        assert_eq!(net, before);
        assert_eq!(opt, Optimizer::new(OptimizerKind::Adam, &net));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut net = QNetwork::new(&default_layers(3), 2).unwrap();
        let other = QNetwork::new(&default_layers(4), 2).unwrap();
        let mut opt = Optimizer::Sgd;
        assert!(matches!(
            opt.apply_update(&mut net, &GradientSet::zeros_like(&other), 0.1),
            Err(NnError::GradientShape)
        ));
    }
}
