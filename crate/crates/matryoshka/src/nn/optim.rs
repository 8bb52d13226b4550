//! SGD and Adam over the per-kind flat parameter arrays.

use crate::{Error, Result};

use super::{Gradients, Model, ModelSpec, ParamKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerConfig {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl OptimizerConfig {
    /// SGD at the default rate used for the MNIST-scale classifiers.
    pub fn default_sgd() -> Self {
        OptimizerConfig::Sgd { lr: 0.1 }
    }

    /// Adam at the defaults used for generators.
    pub fn default_adam() -> Self {
        OptimizerConfig::Adam {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state. Moment arrays are shaped like the model's parameter
/// arrays; identical inputs and state always produce identical updates.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    m: [Vec<f64>; 3],
    v: [Vec<f64>; 3],
    pub step: u64,
}

impl OptimizerState {
    pub fn new(spec: &ModelSpec, config: OptimizerConfig) -> Self {
        let counts = spec.param_counts();
        let make = || {
            [
                vec![0.0; counts[0]],
                vec![0.0; counts[1]],
                vec![0.0; counts[2]],
            ]
        };
        OptimizerState {
            config,
            m: make(),
            v: make(),
            step: 0,
        }
    }
}

/// One optimizer step in place. Non-finite gradients refuse the step.
pub fn optimizer_step(state: &mut OptimizerState, model: &mut Model, grads: &Gradients) -> Result<()> {
    for kind in ParamKind::ALL {
        if grads.params(kind).len() != model.params(kind).len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient {} array length {} vs model {}",
                kind.name(),
                grads.params(kind).len(),
                model.params(kind).len()
            )));
        }
    }
    if !grads.is_finite() {
        return Err(Error::NumericalFailure(
            "refusing optimizer step on non-finite gradients".into(),
        ));
    }
    state.step += 1;
    match state.config {
        OptimizerConfig::Sgd { lr } => {
            for kind in ParamKind::ALL {
                let g = grads.params(kind);
                for (p, &gi) in model.params_mut(kind).iter_mut().zip(g) {
                    *p -= lr * gi;
                }
            }
        }
        OptimizerConfig::Adam {
            lr,
            beta1,
            beta2,
            eps,
        } => {
            let t = state.step as i32;
            let bc1 = 1.0 - beta1.powi(t);
            let bc2 = 1.0 - beta2.powi(t);
            for kind in ParamKind::ALL {
                let g = grads.params(kind);
                let m = &mut state.m[kind.index()];
                let v = &mut state.v[kind.index()];
                let params = match kind {
                    ParamKind::Weight => &mut model.weights,
                    ParamKind::Bias => &mut model.biases,
                    ParamKind::Scale => &mut model.scales,
                };
                for i in 0..g.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelSpec;

    fn one_param_model() -> Model {
        let spec = ModelSpec::regressor(&[1, 1]).unwrap();
        let mut model = Model::zeros(spec);
        model.weights[0] = 1.0;
        model
    }

    fn grads_of(model: &Model, w: f64) -> Gradients {
        let mut g = Gradients::zeros_like(model);
        g.weights[0] = w;
        g
    }

    #[test]
    fn sgd_rule() {
        let mut model = one_param_model();
        let mut state = OptimizerState::new(&model.spec, OptimizerConfig::Sgd { lr: 0.1 });
        let g = grads_of(&model, 2.0);
        optimizer_step(&mut state, &mut model, &g).unwrap();
        assert!((model.weights[0] - 0.8).abs() < 1e-15);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn adam_first_step_moves_by_about_lr() {
        let mut model = one_param_model();
        let mut state = OptimizerState::new(&model.spec, OptimizerConfig::default_adam());
        let g = grads_of(&model, 1.0);
        optimizer_step(&mut state, &mut model, &g).unwrap();
        // Bias correction makes m_hat = v_hat = 1 at step 1, so the update
        // is lr * 1 / (1 + eps).
        let expected = 1.0 - 0.001 / (1.0 + 1e-8);
        assert!((model.weights[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_sgd_params_unchanged() {
        let mut model = one_param_model();
        let mut state = OptimizerState::new(&model.spec, OptimizerConfig::Sgd { lr: 0.5 });
        let g = grads_of(&model, 0.0);
        optimizer_step(&mut state, &mut model, &g).unwrap();
        assert_eq!(model.weights[0], 1.0);
    }

    #[test]
    fn non_finite_gradient_refused() {
        let mut model = one_param_model();
        let mut state = OptimizerState::new(&model.spec, OptimizerConfig::default_sgd());
        let g = grads_of(&model, f64::NAN);
        assert!(optimizer_step(&mut state, &mut model, &g).is_err());
        assert_eq!(model.weights[0], 1.0);
        assert_eq!(state.step, 0);
    }

    #[test]
    fn deterministic_updates() {
        let run = || {
            let mut model = one_param_model();
            let mut state = OptimizerState::new(&model.spec, OptimizerConfig::default_adam());
            for i in 0..10 {
                let g = grads_of(&model, 0.1 * (i as f64 + 1.0));
                optimizer_step(&mut state, &mut model, &g).unwrap();
            }
            model.weights[0]
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }
}
