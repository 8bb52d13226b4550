//! Losses and exact analytic gradients.

use crate::mat::Mat;
use crate::{Error, Result};

use super::{LossKind, Model, OutputHead, ParamKind};

/// Training targets: class indices for classification, value rows for
/// regression and memorization.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Classes(Vec<usize>),
    Values(Mat),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Mat,
    pub targets: Targets,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.inputs.rows
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows == 0
    }

    fn validate(&self, model: &Model) -> Result<()> {
        if self.inputs.rows == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.inputs.cols != model.spec.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "batch input dim {} vs model input dim {}",
                self.inputs.cols,
                model.spec.input_dim()
            )));
        }
        match (&self.targets, model.spec.loss) {
            (Targets::Classes(labels), LossKind::CrossEntropy) => {
                if labels.len() != self.inputs.rows {
                    return Err(Error::ShapeMismatch("label count vs batch size".into()));
                }
                let k = model.spec.output_dim();
                if labels.iter().any(|&y| y >= k) {
                    return Err(Error::ShapeMismatch(format!("label out of range 0..{k}")));
                }
            }
            (Targets::Values(vals), LossKind::MeanSquaredDistance) => {
                if vals.rows != self.inputs.rows || vals.cols != model.spec.output_dim() {
                    return Err(Error::ShapeMismatch(
                        "target values shape vs batch and output dim".into(),
                    ));
                }
            }
            _ => {
                return Err(Error::ShapeMismatch(
                    "loss kind does not match target kind".into(),
                ))
            }
        }
        Ok(())
    }
}

/// Per-kind gradient arrays, shaped exactly like the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Gradients {
            weights: vec![0.0; model.weights.len()],
            biases: vec![0.0; model.biases.len()],
            scales: vec![0.0; model.scales.len()],
        }
    }

    pub fn params(&self, kind: ParamKind) -> &[f64] {
        match kind {
            ParamKind::Weight => &self.weights,
            ParamKind::Bias => &self.biases,
            ParamKind::Scale => &self.scales,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|g| g.is_finite())
            && self.biases.iter().all(|g| g.is_finite())
            && self.scales.iter().all(|g| g.is_finite())
    }
}

/// Batch-mean loss and exact gradients w.r.t. every scalar parameter, in
/// canonical order.
pub fn loss_and_grad(model: &Model, batch: &Batch) -> Result<(f64, Gradients)> {
    batch.validate(model)?;
    let n = batch.len();
    let h = model.spec.num_layers();
    let acts = model.forward_trace(&batch.inputs);
    let output = &acts[h];
    if output.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(
            "non-finite activations in forward pass".into(),
        ));
    }

    // Loss and dL/dz at the output layer (pre-head for logits, chained
    // through the sigmoid for bounded heads). The 1/n batch mean is folded
    // in here so deeper layers accumulate plain sums.
    let out_dim = model.spec.output_dim();
    let mut loss = 0.0;
    let mut dz = Mat::zeros(n, out_dim);
    match (&batch.targets, model.spec.loss, model.spec.head) {
        (Targets::Classes(labels), LossKind::CrossEntropy, OutputHead::Logits) => {
            for r in 0..n {
                let logits = output.row(r);
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum_exp: f64 = logits.iter().map(|z| (z - max).exp()).sum();
                let log_sum = max + sum_exp.ln();
                loss += log_sum - logits[labels[r]];
                let drow = dz.row_mut(r);
                for (o, d) in drow.iter_mut().enumerate() {
                    let p = (logits[o] - log_sum).exp();
                    *d = (p - if o == labels[r] { 1.0 } else { 0.0 }) / n as f64;
                }
            }
            loss /= n as f64;
        }
        (Targets::Classes(_), LossKind::CrossEntropy, OutputHead::Bounded) => {
            return Err(Error::InvalidSpec(
                "cross-entropy requires a logits head".into(),
            ));
        }
        (Targets::Values(vals), LossKind::MeanSquaredDistance, head) => {
            // Loss: mean over samples of (1/dim) * ||y_hat - y||^2.
            let scale = 1.0 / (n as f64 * out_dim as f64);
            for r in 0..n {
                let y_hat = output.row(r);
                let y = vals.row(r);
                let drow = dz.row_mut(r);
                for o in 0..out_dim {
                    let diff = y_hat[o] - y[o];
                    loss += diff * diff;
                    let mut d = 2.0 * diff * scale;
                    if head == OutputHead::Bounded {
                        d *= y_hat[o] * (1.0 - y_hat[o]);
                    }
                    drow[o] = d;
                }
            }
            loss *= scale;
        }
        _ => unreachable!("validate() rejects mismatched loss/target kinds"),
    }

    // Backward through the layers.
    let mut grads = Gradients::zeros_like(model);
    for l in (0..h).rev() {
        let in_dim = model.spec.layer_sizes[l];
        let out_dim = model.spec.layer_sizes[l + 1];
        let w = &model.weights[model.spec.layer_weight_range(l)];
        let wr = model.spec.layer_weight_range(l);
        let br = model.spec.layer_bias_range(l);
        let prev = &acts[l];

        let mut d_prev = if l > 0 {
            Some(Mat::zeros(n, in_dim))
        } else {
            None
        };
        {
            let dw = &mut grads.weights[wr];
            let db = &mut grads.biases[br];
            for r in 0..n {
                let x = prev.row(r);
                let dz_row = dz.row(r);
                for o in 0..out_dim {
                    let d = dz_row[o];
                    if d == 0.0 {
                        continue;
                    }
                    db[o] += d;
                    let wrow = &w[o * in_dim..(o + 1) * in_dim];
                    let dwrow = &mut dw[o * in_dim..(o + 1) * in_dim];
                    if let Some(dp) = d_prev.as_mut() {
                        let dp_row = dp.row_mut(r);
                        for i in 0..in_dim {
                            dwrow[i] += d * x[i];
                            dp_row[i] += d * wrow[i];
                        }
                    } else {
                        for i in 0..in_dim {
                            dwrow[i] += d * x[i];
                        }
                    }
                }
            }
        }
        if let Some(mut dp) = d_prev {
            // Through the ReLU of layer l-1's output: gradient passes only
            // where the activation is strictly positive.
            for (dv, &av) in dp.data.iter_mut().zip(&prev.data) {
                if av <= 0.0 {
                    *dv = 0.0;
                }
            }
            dz = dp;
        }
    }

    if !loss.is_finite() || !grads.is_finite() {
        return Err(Error::NumericalFailure(
            "non-finite loss or gradients".into(),
        ));
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, ModelSpec};
    use crate::rng::Rng;

    /// Central finite-difference gradient for one parameter. Independent
    /// oracle for the analytic backward pass.
    fn numerical_grad(model: &Model, batch: &Batch, kind: ParamKind, idx: usize, h: f64) -> f64 {
        let mut m = model.clone();
        let orig = m.params(kind)[idx];
        m.params_mut(kind)[idx] = orig + h;
        let (lp, _) = loss_and_grad(&m, batch).unwrap();
        m.params_mut(kind)[idx] = orig - h;
        let (lm, _) = loss_and_grad(&m, batch).unwrap();
        (lp - lm) / (2.0 * h)
    }

    fn random_batch(spec: &ModelSpec, n: usize, seed: u64) -> Batch {
        let mut rng = Rng::new(seed);
        let inputs = Mat {
            rows: n,
            cols: spec.input_dim(),
            data: (0..n * spec.input_dim())
                .map(|_| rng.next_gaussian())
                .collect(),
        };
        let targets = match spec.loss {
            LossKind::CrossEntropy => {
                Targets::Classes((0..n).map(|_| rng.next_below(spec.output_dim())).collect())
            }
            LossKind::MeanSquaredDistance => Targets::Values(Mat {
                rows: n,
                cols: spec.output_dim(),
                data: (0..n * spec.output_dim())
                    .map(|_| rng.next_f64())
                    .collect(),
            }),
        };
        Batch { inputs, targets }
    }

    #[test]
    fn zero_error_regression_has_zero_loss_and_grads() {
        let spec = ModelSpec::regressor(&[3, 3]).unwrap();
        let mut model = Model::zeros(spec);
        for i in 0..3 {
            model.weights[i * 3 + i] = 1.0;
        }
        let inputs = Mat::from_rows(&[vec![0.5, -1.0, 2.0]]).unwrap();
        let targets = Targets::Values(Mat::from_rows(&[vec![0.5, -1.0, 2.0]]).unwrap());
        let (loss, grads) = loss_and_grad(&model, &Batch { inputs, targets }).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.weights.iter().all(|&g| g == 0.0));
        assert!(grads.biases.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn uniform_logits_cross_entropy_is_ln_k() {
        for k in [2usize, 5, 10] {
            let spec = ModelSpec::classifier(&[4, k]).unwrap();
            let model = Model::zeros(spec);
            let inputs = Mat::from_rows(&[vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
            let targets = Targets::Classes(vec![0]);
            let (loss, _) = loss_and_grad(&model, &Batch { inputs, targets }).unwrap();
            assert!((loss - (k as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let specs = [
            ModelSpec::classifier(&[5, 7, 4]).unwrap(),
            ModelSpec::regressor(&[4, 6, 3]).unwrap(),
            ModelSpec::generator(&[3, 8, 5]).unwrap(),
        ];
        for (si, spec) in specs.iter().enumerate() {
            let model = init_params(spec, 100 + si as u64);
            let batch = random_batch(spec, 4, 200 + si as u64);
            let (_, grads) = loss_and_grad(&model, &batch).unwrap();
            let mut rng = Rng::new(300 + si as u64);
            for _ in 0..60 {
                let kind = if rng.next_below(2) == 0 {
                    ParamKind::Weight
                } else {
                    ParamKind::Bias
                };
                let len = model.params(kind).len();
                let idx = rng.next_below(len);
                let analytic = grads.params(kind)[idx];
                let numeric = numerical_grad(&model, &batch, kind, idx, 1e-5);
                let denom = analytic.abs().max(numeric.abs()).max(1e-8);
                assert!(
                    (analytic - numeric).abs() / denom < 1e-4,
                    "{} {kind:?}[{idx}]: analytic {analytic} numeric {numeric}",
                    spec.arch_id
                );
            }
        }
    }

    #[test]
    fn rejects_mismatched_targets() {
        let spec = ModelSpec::classifier(&[2, 3]).unwrap();
        let model = Model::zeros(spec);
        let inputs = Mat::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let targets = Targets::Values(Mat::from_rows(&[vec![0.0, 0.0, 0.0]]).unwrap());
        assert!(loss_and_grad(&model, &Batch { inputs, targets }).is_err());
    }

    #[test]
    fn reports_non_finite_as_numerical_failure() {
        let spec = ModelSpec::regressor(&[2, 2]).unwrap();
        let mut model = Model::zeros(spec);
        model.weights[0] = f64::INFINITY;
        let inputs = Mat::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let targets = Targets::Values(Mat::from_rows(&[vec![0.0, 0.0]]).unwrap());
        let err = loss_and_grad(&model, &Batch { inputs, targets }).unwrap_err();
        assert!(matches!(err, Error::NumericalFailure(_)));
    }

    #[test]
    fn label_out_of_range_rejected() {
        let spec = ModelSpec::classifier(&[2, 3]).unwrap();
        let model = Model::zeros(spec);
        let inputs = Mat::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let targets = Targets::Classes(vec![3]);
        assert!(loss_and_grad(&model, &Batch { inputs, targets }).is_err());
    }
}
