//! Architecture registry and declarative model specs.
//!
//! An architecture identifier is a short string that, alone, pins down the
//! full layer structure, the per-kind parameter counts, and the canonical
//! flattening order. Three closed families exist:
//!
//! - `fcn-<d0>x<d1>x...x<dk>` — classifier: ReLU hidden layers, linear
//!   logits output, cross-entropy loss.
//! - `gen-<d0>x<d1>x...x<dk>` — generator: ReLU hidden layers, sigmoid
//!   output bounded in (0, 1), mean-squared-distance loss.
//! - `reg-<d0>x<d1>x...x<dk>` — regressor: ReLU hidden layers, linear
//!   output, mean-squared-distance loss.

use std::ops::Range;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputHead {
    /// Linear output, used for classifier logits and regression values.
    Logits,
    /// Sigmoid output in (0, 1), used by generators that emit pixel data.
    Bounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    MeanSquaredDistance,
}

/// Declarative description of a fully-connected network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub arch_id: String,
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub head: OutputHead,
    pub loss: LossKind,
}

impl ModelSpec {
    pub fn classifier(layer_sizes: &[usize]) -> Result<Self> {
        Self::from_family("fcn", layer_sizes)
    }

    pub fn generator(layer_sizes: &[usize]) -> Result<Self> {
        Self::from_family("gen", layer_sizes)
    }

    pub fn regressor(layer_sizes: &[usize]) -> Result<Self> {
        Self::from_family("reg", layer_sizes)
    }

    fn from_family(family: &str, layer_sizes: &[usize]) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let sizes = layer_sizes
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join("x");
        Self::from_arch_id(&format!("{family}-{sizes}"))
    }

    /// Parse an architecture identifier from the closed registry.
    pub fn from_arch_id(arch_id: &str) -> Result<Self> {
        let (family, rest) = arch_id
            .split_once('-')
            .ok_or_else(|| Error::UnknownArch(arch_id.to_string()))?;
        let (head, loss) = match family {
            "fcn" => (OutputHead::Logits, LossKind::CrossEntropy),
            "gen" => (OutputHead::Bounded, LossKind::MeanSquaredDistance),
            "reg" => (OutputHead::Logits, LossKind::MeanSquaredDistance),
            _ => return Err(Error::UnknownArch(arch_id.to_string())),
        };
        let layer_sizes: Vec<usize> = rest
            .split('x')
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| Error::UnknownArch(arch_id.to_string()))
            })
            .collect::<Result<_>>()?;
        validate_sizes(&layer_sizes)?;
        Ok(ModelSpec {
            arch_id: arch_id.to_string(),
            layer_sizes,
            hidden_activation: Activation::Relu,
            head,
            loss,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of affine layers H.
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Total scalar count of one parameter kind, in canonical order.
    pub fn param_count(&self, kind: super::ParamKind) -> usize {
        match kind {
            super::ParamKind::Weight => self
                .layer_sizes
                .windows(2)
                .map(|w| w[0] * w[1])
                .sum(),
            super::ParamKind::Bias => self.layer_sizes[1..].iter().sum(),
            super::ParamKind::Scale => 0,
        }
    }

    pub fn param_counts(&self) -> [usize; 3] {
        [
            self.param_count(super::ParamKind::Weight),
            self.param_count(super::ParamKind::Bias),
            self.param_count(super::ParamKind::Scale),
        ]
    }

    /// Range of layer `l`'s weights inside the flat weight array. Weights of
    /// layer `l` form an `out x in` row-major block (output-index major).
    pub fn layer_weight_range(&self, l: usize) -> Range<usize> {
        let mut start = 0;
        for k in 0..l {
            start += self.layer_sizes[k] * self.layer_sizes[k + 1];
        }
        start..start + self.layer_sizes[l] * self.layer_sizes[l + 1]
    }

    /// Range of layer `l`'s biases inside the flat bias array.
    pub fn layer_bias_range(&self, l: usize) -> Range<usize> {
        let start: usize = self.layer_sizes[1..=l].iter().sum();
        start..start + self.layer_sizes[l + 1]
    }
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::InvalidSpec(
            "a model needs at least two layer sizes (one affine map)".into(),
        ));
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::InvalidSpec("layer sizes must be positive".into()));
    }
    Ok(())
}
