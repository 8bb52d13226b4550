//! Memorization-oriented data stealing: seeded noise generation, generator
//! secret tasks pairing noise one-to-one with sensitive inputs, colluder-side
//! reconstruction, and the image-fidelity metrics.

use crate::data::Dataset;
use crate::mat::Mat;
use crate::nn::{LossKind, Model, ModelSpec, OptimizerConfig};
use crate::pool::SecretKey;
use crate::rng::Rng;
use crate::trainer::{TaskKind, TaskSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseDist {
    Gaussian,
    /// Uniform on [-1, 1].
    Uniform,
}

/// Specification of a replicable noise sequence. Sampling is a pure function
/// of the spec: the colluder regenerates the identical vectors from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSpec {
    pub dist: NoiseDist,
    pub dim: usize,
    pub count: usize,
    pub seed: u64,
}

/// Sample the noise matrix (`count` rows of `dim`). Deterministic in the
/// spec; two calls are bit-identical.
pub fn make_noise(spec: &NoiseSpec) -> Mat {
    let mut rng = Rng::new(spec.seed);
    let data = (0..spec.count * spec.dim)
        .map(|_| match spec.dist {
            NoiseDist::Gaussian => rng.next_gaussian(),
            NoiseDist::Uniform => rng.next_symmetric(),
        })
        .collect();
    Mat {
        rows: spec.count,
        cols: spec.dim,
        data,
    }
}

/// The sensitive inputs to steal: flat vectors in [0, 1] with the 2D shape
/// they fold back to.
#[derive(Debug, Clone, PartialEq)]
pub struct StealTarget {
    pub targets: Mat,
    pub shape: (usize, usize),
}

impl StealTarget {
    pub fn new(targets: Mat, shape: (usize, usize)) -> Result<Self> {
        if shape.0 * shape.1 != targets.cols {
            return Err(Error::ShapeMismatch(format!(
                "shape {}x{} does not fold {} values",
                shape.0, shape.1, targets.cols
            )));
        }
        if targets.data.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidArgument(
                "steal targets must lie within [0, 1]".into(),
            ));
        }
        Ok(StealTarget { targets, shape })
    }

    pub fn count(&self) -> usize {
        self.targets.rows
    }

    pub fn dim(&self) -> usize {
        self.targets.cols
    }
}

/// Build the memorization secret task: a generator that maps noise vector
/// `z_i` to sensitive input `x_i`, index-aligned and never shuffled across
/// epochs.
pub fn build_memorization_task(
    task_id: &str,
    targets: &StealTarget,
    noise: &NoiseSpec,
    gen_spec: &ModelSpec,
    key: &SecretKey,
) -> Result<TaskSpec> {
    if gen_spec.input_dim() != noise.dim {
        return Err(Error::ShapeMismatch(format!(
            "generator input dim {} vs noise dim {}",
            gen_spec.input_dim(),
            noise.dim
        )));
    }
    if gen_spec.output_dim() != targets.dim() {
        return Err(Error::ShapeMismatch(format!(
            "generator output dim {} vs target dim {}",
            gen_spec.output_dim(),
            targets.dim()
        )));
    }
    if noise.count != targets.count() {
        return Err(Error::ShapeMismatch(format!(
            "{} noise vectors vs {} targets",
            noise.count,
            targets.count()
        )));
    }
    if gen_spec.loss != LossKind::MeanSquaredDistance {
        return Err(Error::InvalidSpec(
            "memorization needs a distance loss (gen-* or reg-* architecture)".into(),
        ));
    }
    let dataset = Dataset::regression(make_noise(noise), targets.targets.clone())?;
    let key = key.clone().with_noise_seed(noise.seed);
    Ok(TaskSpec {
        task_id: task_id.to_string(),
        kind: TaskKind::Memorization,
        model_spec: gen_spec.clone(),
        key,
        dataset,
        optimizer: OptimizerConfig::default_adam(),
        target: None,
        batch_size: None,
        pool_weight: 1.0,
    })
}

/// Colluder-side reconstruction: regenerate the noise from the spec, run the
/// assembled generator, clamp to [0, 1].
pub fn reconstruct(generator: &Model, noise: &NoiseSpec) -> Result<Mat> {
    let mut out = generator.forward(&make_noise(noise))?;
    for v in &mut out.data {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(out)
}

/// The per-sample reconstruction error in use throughout: the L2 norm of the
/// difference (not its square) divided by the dimension.
pub fn mse_sample(recon: &[f64], truth: &[f64]) -> Result<f64> {
    if recon.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "sample dims differ: {} vs {}",
            recon.len(),
            truth.len()
        )));
    }
    let norm: f64 = recon
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(norm / recon.len() as f64)
}

/// Conventional mean squared error, kept under its own name as a sanity
/// check against [`mse_sample`].
pub fn mean_squared_error(recon: &[f64], truth: &[f64]) -> Result<f64> {
    if recon.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "sample dims differ: {} vs {}",
            recon.len(),
            truth.len()
        )));
    }
    let sq: f64 = recon
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sq / recon.len() as f64)
}

/// Single-window SSIM over the whole image with c1 = (0.01 L)^2 and
/// c2 = (0.03 L)^2, population statistics.
pub fn ssim(a: &[f64], b: &[f64], dynamic_range: f64) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "ssim inputs differ in shape: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if dynamic_range <= 0.0 {
        return Err(Error::InvalidArgument("dynamic range must be positive".into()));
    }
    let n = a.len() as f64;
    let mu_a: f64 = a.iter().sum::<f64>() / n;
    let mu_b: f64 = b.iter().sum::<f64>() / n;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    let mut cov = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        var_a += (x - mu_a) * (x - mu_a);
        var_b += (y - mu_b) * (y - mu_b);
        cov += (x - mu_a) * (y - mu_b);
    }
    var_a /= n;
    var_b /= n;
    cov /= n;
    let c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
    let c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
    Ok(((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
        / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)))
}
