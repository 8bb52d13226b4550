//! Minimal trainable-network substrate: fully-connected architectures with
//! forward/backward passes, losses, and optimizers, all over flat parameter
//! arrays in a canonical order so a parameter pool can address them.

mod grad;
mod model;
mod optim;
mod spec;

pub use grad::{loss_and_grad, Batch, Gradients, Targets};
pub use model::{init_params, Model};
pub use optim::{optimizer_step, OptimizerConfig, OptimizerState};
pub use spec::{Activation, LossKind, ModelSpec, OutputHead};

/// The three roles a scalar parameter can play. Every parameter of every
/// model is tagged with exactly one kind, and pool groups are split the
/// same way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKind {
    Weight,
    Bias,
    Scale,
}

impl ParamKind {
    pub const ALL: [ParamKind; 3] = [ParamKind::Weight, ParamKind::Bias, ParamKind::Scale];

    pub fn index(self) -> usize {
        match self {
            ParamKind::Weight => 0,
            ParamKind::Bias => 1,
            ParamKind::Scale => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamKind::Weight => "weight",
            ParamKind::Bias => "bias",
            ParamKind::Scale => "scale",
        }
    }
}
