//! Defender-side channel noise: magnitude weight pruning and partial
//! fine-tuning of a published carrier.

use crate::data::Dataset;
use crate::nn::{loss_and_grad, optimizer_step, Model, OptimizerConfig, OptimizerState};
use crate::{Error, Result};

/// Per layer, set the `floor(beta * n)` weight-kind scalars of smallest
/// absolute value to exactly zero. Ties break toward the lower flat index.
/// Biases (and scales) are untouched.
pub fn prune_weights(model: &Model, beta: f64) -> Result<Model> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!(
            "prune fraction must be in [0, 1], got {beta}"
        )));
    }
    let mut pruned = model.clone();
    for l in 0..model.spec.num_layers() {
        let range = model.spec.layer_weight_range(l);
        let layer = &mut pruned.weights[range];
        let k = (beta * layer.len() as f64).floor() as usize;
        if k == 0 {
            continue;
        }
        let mut order: Vec<usize> = (0..layer.len()).collect();
        order.sort_by(|&a, &b| {
            layer[a]
                .abs()
                .partial_cmp(&layer[b].abs())
                .unwrap()
                .then(a.cmp(&b))
        });
        for &idx in &order[..k] {
            layer[idx] = 0.0;
        }
    }
    Ok(pruned)
}

/// Fine-tune only the last `k` of the model's `h` layers: gradients for the
/// first `h - k` layers are masked, so their parameters stay bit-identical.
/// Batches cycle through the dataset in order; the whole run is
/// deterministic.
pub fn finetune_last_k(
    model: &Model,
    dataset: &Dataset,
    k: usize,
    steps: usize,
    optimizer: OptimizerConfig,
    batch_size: usize,
) -> Result<Model> {
    let h = model.spec.num_layers();
    if k == 0 || k > h {
        return Err(Error::InvalidArgument(format!(
            "fine-tune depth {k} out of range 1..={h}"
        )));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut tuned = model.clone();
    let mut state = OptimizerState::new(&model.spec, optimizer);
    let n = dataset.len();
    let mut cursor = 0usize;
    for _ in 0..steps {
        let indices: Vec<usize> = (0..batch_size.min(n))
            .map(|off| (cursor + off) % n)
            .collect();
        cursor = (cursor + batch_size.min(n)) % n;
        let batch = dataset.batch(&indices);
        let (_, mut grads) = loss_and_grad(&tuned, &batch)?;
        for l in 0..h - k {
            for g in &mut grads.weights[model.spec.layer_weight_range(l)] {
                *g = 0.0;
            }
            for g in &mut grads.biases[model.spec.layer_bias_range(l)] {
                *g = 0.0;
            }
        }
        optimizer_step(&mut state, &mut tuned, &grads)?;
    }
    Ok(tuned)
}
