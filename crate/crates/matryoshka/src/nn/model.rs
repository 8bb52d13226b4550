//! Materialized model parameters and the forward pass.

use crate::mat::Mat;
use crate::rng::Rng;
use crate::{Error, Result};

use super::{Activation, ModelSpec, OutputHead, ParamKind};

/// A model: a spec plus per-kind flat parameter arrays in canonical order.
///
/// Canonical order: layers in definition order; within a layer the weight
/// matrix is flattened row-major with the output index major, followed by
/// the bias vector. All layers' weights concatenated form the weight array,
/// likewise the biases. Plain fully-connected layers carry no scale
/// parameters, so the scale array is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Model {
    pub fn zeros(spec: ModelSpec) -> Self {
        let counts = spec.param_counts();
        Model {
            spec,
            weights: vec![0.0; counts[0]],
            biases: vec![0.0; counts[1]],
            scales: vec![0.0; counts[2]],
        }
    }

    pub fn params(&self, kind: ParamKind) -> &[f64] {
        match kind {
            ParamKind::Weight => &self.weights,
            ParamKind::Bias => &self.biases,
            ParamKind::Scale => &self.scales,
        }
    }

    pub fn params_mut(&mut self, kind: ParamKind) -> &mut Vec<f64> {
        match kind {
            ParamKind::Weight => &mut self.weights,
            ParamKind::Bias => &mut self.biases,
            ParamKind::Scale => &mut self.scales,
        }
    }

    /// Forward pass over a batch (rows are samples). Pure function.
    pub fn forward(&self, inputs: &Mat) -> Result<Mat> {
        if inputs.cols != self.spec.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input dim {} does not match model input dim {}",
                inputs.cols,
                self.spec.input_dim()
            )));
        }
        let acts = self.forward_trace(inputs);
        Ok(acts.into_iter().last().unwrap())
    }

    /// Forward pass keeping every layer's post-activation output.
    /// `result[0]` is the input itself; `result[H]` is the network output.
    pub(crate) fn forward_trace(&self, inputs: &Mat) -> Vec<Mat> {
        let h = self.spec.num_layers();
        let mut acts = Vec::with_capacity(h + 1);
        acts.push(inputs.clone());
        for l in 0..h {
            let src = &acts[l];
            let out = self.layer_forward(l, src, l == h - 1);
            acts.push(out);
        }
        acts
    }

    fn layer_forward(&self, l: usize, src: &Mat, is_last: bool) -> Mat {
        let in_dim = self.spec.layer_sizes[l];
        let out_dim = self.spec.layer_sizes[l + 1];
        let w = &self.weights[self.spec.layer_weight_range(l)];
        let b = &self.biases[self.spec.layer_bias_range(l)];
        let mut out = Mat::zeros(src.rows, out_dim);
        for n in 0..src.rows {
            let x = src.row(n);
            let y = out.row_mut(n);
            for (o, y_o) in y.iter_mut().enumerate() {
                let row = &w[o * in_dim..(o + 1) * in_dim];
                let z: f64 = row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b[o];
                *y_o = if is_last {
                    match self.spec.head {
                        OutputHead::Logits => z,
                        OutputHead::Bounded => sigmoid(z),
                    }
                } else {
                    match self.spec.hidden_activation {
                        Activation::Relu => z.max(0.0),
                    }
                };
            }
        }
        out
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Initialize parameters: weights from a seeded Gaussian with per-layer
/// standard deviation sqrt(2 / fan_in), biases exactly zero.
pub fn init_params(spec: &ModelSpec, seed: u64) -> Model {
    let mut rng = Rng::new(seed);
    let mut model = Model::zeros(spec.clone());
    for l in 0..spec.num_layers() {
        let fan_in = spec.layer_sizes[l] as f64;
        let std = (2.0 / fan_in).sqrt();
        for w in &mut model.weights[spec.layer_weight_range(l)] {
            *w = rng.next_gaussian() * std;
        }
    }
    model
}
