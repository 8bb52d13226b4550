//! Experiment configuration: one plain-text TOML file describing the
//! carrier task, the secret tasks, the pool initialization, and the training
//! loop. Unknown keys are rejected and configs round-trip through
//! serialization.

use std::path::Path;

use serde::{Deserialize, Serialize};

use matryoshka::data::{load_mnist_train, synthetic_blobs_with, Dataset};
use matryoshka::nn::OptimizerConfig;
use matryoshka::rng;
use matryoshka::stealing::{NoiseDist, NoiseSpec};
use matryoshka::trainer::TrainConfig;
use matryoshka::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: String,
    pub train: TrainBlock,
    pub pool: PoolBlock,
    pub carrier: CarrierBlock,
    #[serde(default, rename = "secret")]
    pub secrets: Vec<SecretBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainBlock {
    pub max_epochs: usize,
    pub batch_size: usize,
    #[serde(default = "default_val_split")]
    pub val_split: f64,
    #[serde(default = "default_window")]
    pub convergence_window: usize,
    #[serde(default = "default_tol")]
    pub convergence_tol: f64,
}

fn default_val_split() -> f64 {
    0.1
}
fn default_window() -> usize {
    3
}
fn default_tol() -> f64 {
    0.002
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolBlock {
    /// `from-carrier` (Option I) or `from-scratch` (Option II).
    pub init: PoolInit,
    /// Group sizes (weight, bias, scale); required for `from-scratch`.
    #[serde(default)]
    pub sizes: Option<[usize; 3]>,
    /// Init seed for `from-scratch`.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolInit {
    FromCarrier,
    FromScratch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierBlock {
    pub arch: String,
    pub dataset: DatasetRef,
    pub optimizer: OptimizerRef,
    #[serde(default)]
    pub v: u64,
    #[serde(default)]
    pub permute: bool,
    /// Validation-accuracy requirement gating termination.
    #[serde(default)]
    pub target_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecretBlock {
    pub task_id: String,
    pub kind: SecretKind,
    pub arch: String,
    pub v: u64,
    #[serde(default)]
    pub permute: bool,
    pub optimizer: OptimizerRef,
    /// Functionality tasks: the training data.
    #[serde(default)]
    pub dataset: Option<DatasetRef>,
    /// Memorization tasks: tensor file of targets and the noise source.
    #[serde(default)]
    pub targets: Option<String>,
    #[serde(default)]
    pub noise: Option<NoiseRef>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub pool_weight: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SecretKind {
    Functionality,
    Memorization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetRef {
    Synthetic {
        classes: usize,
        dim: usize,
        count: usize,
        seed: u64,
        #[serde(default)]
        permute_seed: Option<u64>,
        #[serde(default)]
        center_std: Option<f64>,
        #[serde(default)]
        noise_std: Option<f64>,
    },
    Mnist {
        dir: String,
        #[serde(default)]
        count: Option<usize>,
        #[serde(default)]
        permute_seed: Option<u64>,
    },
}

impl DatasetRef {
    /// Compact command-line form:
    /// `synthetic:classes=10,dim=784,count=2000,seed=5[,permute_seed=3]`
    /// or `mnist:dir=/data/mnist[,count=10000][,permute_seed=3]`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("bad dataset ref `{s}`")))?;
        let mut fields = std::collections::BTreeMap::new();
        for pair in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("bad dataset field `{pair}`")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let take_u64 = |f: &std::collections::BTreeMap<String, String>, k: &str| -> Result<u64> {
            f.get(k)
                .ok_or_else(|| Error::InvalidArgument(format!("dataset ref misses `{k}`")))?
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("dataset field `{k}` not an integer")))
        };
        match kind {
            "synthetic" => Ok(DatasetRef::Synthetic {
                classes: take_u64(&fields, "classes")? as usize,
                dim: take_u64(&fields, "dim")? as usize,
                count: take_u64(&fields, "count")? as usize,
                seed: take_u64(&fields, "seed")?,
                permute_seed: match fields.get("permute_seed") {
                    Some(v) => Some(v.parse().map_err(|_| {
                        Error::InvalidArgument("bad permute_seed".into())
                    })?),
                    None => None,
                },
                center_std: match fields.get("center_std") {
                    Some(v) => Some(v.parse().map_err(|_| {
                        Error::InvalidArgument("bad center_std".into())
                    })?),
                    None => None,
                },
                noise_std: match fields.get("noise_std") {
                    Some(v) => Some(v.parse().map_err(|_| {
                        Error::InvalidArgument("bad noise_std".into())
                    })?),
                    None => None,
                },
            }),
            "mnist" => Ok(DatasetRef::Mnist {
                dir: fields
                    .get("dir")
                    .ok_or_else(|| Error::InvalidArgument("mnist ref misses `dir`".into()))?
                    .clone(),
                count: match fields.get("count") {
                    Some(v) => Some(v.parse().map_err(|_| {
                        Error::InvalidArgument("bad count".into())
                    })?),
                    None => None,
                },
                permute_seed: match fields.get("permute_seed") {
                    Some(v) => Some(v.parse().map_err(|_| {
                        Error::InvalidArgument("bad permute_seed".into())
                    })?),
                    None => None,
                },
            }),
            _ => Err(Error::InvalidArgument(format!(
                "unknown dataset kind `{kind}` (expected synthetic | mnist)"
            ))),
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetRef::Synthetic {
                classes,
                dim,
                count,
                seed,
                permute_seed,
                center_std,
                noise_std,
            } => {
                let ds = synthetic_blobs_with(
                    *count,
                    *dim,
                    *classes,
                    *seed,
                    center_std.unwrap_or(0.12),
                    noise_std.unwrap_or(1.0),
                );
                apply_permutation(ds, *permute_seed)
            }
            DatasetRef::Mnist {
                dir,
                count,
                permute_seed,
            } => {
                let mut ds = load_mnist_train(Path::new(dir))?;
                if let Some(count) = count {
                    let take: Vec<usize> = (0..(*count).min(ds.len())).collect();
                    ds = ds.subset(&take);
                }
                apply_permutation(ds, *permute_seed)
            }
        }
    }
}

fn apply_permutation(ds: Dataset, permute_seed: Option<u64>) -> Result<Dataset> {
    match permute_seed {
        Some(seed) => {
            let perm = rng::permutation(ds.dim(), seed);
            ds.permute_columns(&perm)
        }
        None => Ok(ds),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OptimizerRef {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl OptimizerRef {
    pub fn to_config(&self) -> OptimizerConfig {
        match *self {
            OptimizerRef::Sgd { lr } => OptimizerConfig::Sgd { lr },
            OptimizerRef::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseRef {
    pub dist: NoiseDistRef,
    pub dim: usize,
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDistRef {
    Gaussian,
    Uniform,
}

impl NoiseRef {
    pub fn to_spec(self) -> NoiseSpec {
        NoiseSpec {
            dist: match self.dist {
                NoiseDistRef::Gaussian => NoiseDist::Gaussian,
                NoiseDistRef::Uniform => NoiseDist::Uniform,
            },
            dim: self.dim,
            count: self.count,
            seed: self.seed,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_epochs: self.train.max_epochs,
            batch_size: self.train.batch_size,
            val_split: self.train.val_split,
            window: self.train.convergence_window,
            tol: self.train.convergence_tol,
            seed: self.seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.pool.init == PoolInit::FromScratch && self.pool.sizes.is_none() {
            return Err(Error::InvalidArgument(
                "pool.init = from-scratch requires pool.sizes".into(),
            ));
        }
        for s in &self.secrets {
            match s.kind {
                SecretKind::Functionality => {
                    if s.dataset.is_none() {
                        return Err(Error::InvalidArgument(format!(
                            "functionality secret `{}` needs a dataset",
                            s.task_id
                        )));
                    }
                }
                SecretKind::Memorization => {
                    if s.targets.is_none() || s.noise.is_none() {
                        return Err(Error::InvalidArgument(format!(
                            "memorization secret `{}` needs targets and noise",
                            s.task_id
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
