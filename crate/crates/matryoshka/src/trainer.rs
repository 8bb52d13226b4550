//! The joint training loop: one carrier task plus N secret tasks optimized
//! through a shared parameter pool.
//!
//! Each iteration visits every task in a fixed order (carrier last): fill
//! the task's model from the current pool, take one optimizer step on one
//! batch of the task's own data, and propagate the parameter delta into the
//! pool buffers. After all tasks, the pool applies the buffered mean once.
//! Training stops at an epoch boundary once the carrier meets its
//! requirement and at least one secret task has converged, or at the epoch
//! cap.

use crate::data::Dataset;
use crate::io;
use crate::nn::{
    loss_and_grad, optimizer_step, Model, ModelSpec, OptimizerConfig, OptimizerState, Targets,
};
use crate::pool::{derive_assignment, ParamPool, SecretKey, TaskId};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Carrier,
    Functionality,
    Memorization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Acc,
    Mse,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Acc => "acc",
            Metric::Mse => "mse",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "acc" => Ok(Metric::Acc),
            "mse" => Ok(Metric::Mse),
            _ => Err(Error::InvalidArgument(format!(
                "unknown metric `{s}` (expected acc | mse)"
            ))),
        }
    }

    /// Signed improvement of `new` over `old` (positive = better).
    fn improvement(self, new: f64, old: f64) -> f64 {
        match self {
            Metric::Acc => new - old,
            Metric::Mse => old - new,
        }
    }
}

/// Validation requirement for the carrier task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierTarget {
    pub metric: Metric,
    pub threshold: f64,
}

impl CarrierTarget {
    fn met(&self, value: f64) -> bool {
        match self.metric {
            Metric::Acc => value >= self.threshold,
            Metric::Mse => value <= self.threshold,
        }
    }
}

/// One training task: the carrier or a secret.
#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub task_id: String,
    pub kind: TaskKind,
    pub model_spec: ModelSpec,
    pub key: SecretKey,
    pub dataset: Dataset,
    pub optimizer: OptimizerConfig,
    /// Carrier only: the validation requirement that gates termination.
    pub target: Option<CarrierTarget>,
    /// Per-task batch size override.
    pub batch_size: Option<usize>,
    /// Weight of this task's vote in the pool update (1.0 = plain mean).
    pub pool_weight: f64,
}

impl TaskSpec {
    pub fn carrier(
        task_id: &str,
        model_spec: ModelSpec,
        key: SecretKey,
        dataset: Dataset,
        optimizer: OptimizerConfig,
    ) -> Self {
        TaskSpec {
            task_id: task_id.to_string(),
            kind: TaskKind::Carrier,
            model_spec,
            key,
            dataset,
            optimizer,
            target: None,
            batch_size: None,
            pool_weight: 1.0,
        }
    }

    pub fn functionality(
        task_id: &str,
        model_spec: ModelSpec,
        key: SecretKey,
        dataset: Dataset,
        optimizer: OptimizerConfig,
    ) -> Self {
        TaskSpec {
            kind: TaskKind::Functionality,
            ..Self::carrier(task_id, model_spec, key, dataset, optimizer)
        }
    }

    pub fn with_target(mut self, target: CarrierTarget) -> Self {
        self.target = Some(target);
        self
    }

    fn metric(&self) -> Metric {
        match self.kind {
            TaskKind::Carrier | TaskKind::Functionality => Metric::Acc,
            TaskKind::Memorization => Metric::Mse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Fraction of each dataset held out for validation.
    pub val_split: f64,
    /// A task converges when its validation metric improves by less than
    /// `tol` over `window` consecutive epochs.
    pub window: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 20,
            batch_size: 32,
            val_split: 0.1,
            window: 3,
            tol: 0.002,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub task_id: String,
    pub train_loss: f64,
    pub val_metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolSnapshot {
    pub epoch: usize,
    pub fingerprint: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub records: Vec<EpochRecord>,
    pub snapshots: Vec<PoolSnapshot>,
    pub termination: String,
}

impl RunLog {
    /// Line-delimited record serialization: `#`-prefixed metadata, then one
    /// tab-separated `(epoch, task_id, loss, metric)` line per record.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# termination={}\n", self.termination));
        for s in &self.snapshots {
            out.push_str(&format!("# snapshot\t{}\t{:#018x}\n", s.epoch, s.fingerprint));
        }
        out.push_str("# epoch\ttask_id\tloss\tmetric\n");
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.epoch, r.task_id, r.train_loss, r.val_metric
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut log = RunLog {
            records: Vec::new(),
            snapshots: Vec::new(),
            termination: String::new(),
        };
        for line in text.lines() {
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim_start();
                if let Some(t) = meta.strip_prefix("termination=") {
                    log.termination = t.to_string();
                } else if let Some(rest) = meta.strip_prefix("snapshot\t") {
                    let mut parts = rest.split('\t');
                    let epoch = parts
                        .next()
                        .and_then(|p| p.parse().ok())
                        .ok_or_else(|| Error::Format("bad snapshot line".into()))?;
                    let fp = parts
                        .next()
                        .and_then(|p| p.strip_prefix("0x"))
                        .and_then(|p| u64::from_str_radix(p, 16).ok())
                        .ok_or_else(|| Error::Format("bad snapshot line".into()))?;
                    log.snapshots.push(PoolSnapshot {
                        epoch,
                        fingerprint: fp,
                    });
                }
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 4 {
                return Err(Error::Format(format!("bad run-log line `{line}`")));
            }
            log.records.push(EpochRecord {
                epoch: parts[0]
                    .parse()
                    .map_err(|_| Error::Format("bad epoch".into()))?,
                task_id: parts[1].to_string(),
                train_loss: parts[2]
                    .parse()
                    .map_err(|_| Error::Format("bad loss".into()))?,
                val_metric: parts[3]
                    .parse()
                    .map_err(|_| Error::Format("bad metric".into()))?,
            });
        }
        Ok(log)
    }
}

/// Batch-order seed shared by every task, so identical tasks draw identical
/// batches. Exposed so oracle tests can replay the exact stream.
pub fn batch_order_seed(cfg_seed: u64) -> u64 {
    cfg_seed ^ 0x5DEE_CE66_D15E_ED5E
}

struct TaskState {
    train: Dataset,
    val: Dataset,
    order: Vec<usize>,
    cursor: usize,
    batch: usize,
    optimizer: OptimizerState,
    metric_history: Vec<f64>,
    epoch_loss_sum: f64,
    epoch_loss_count: usize,
}

impl TaskState {
    fn next_indices(&mut self) -> Vec<usize> {
        let n = self.order.len();
        let take = self.batch.min(n);
        let mut idx = Vec::with_capacity(take);
        for off in 0..take {
            idx.push(self.order[(self.cursor + off) % n]);
        }
        self.cursor = (self.cursor + take) % n;
        idx
    }
}

/// Did the metric history converge: less than `tol` improvement over the
/// last `window` epochs.
fn converged(metric: Metric, history: &[f64], window: usize, tol: f64) -> bool {
    if history.len() <= window {
        return false;
    }
    let best = |h: &[f64]| -> f64 {
        h.iter().copied().fold(
            match metric {
                Metric::Acc => f64::NEG_INFINITY,
                Metric::Mse => f64::INFINITY,
            },
            |a, b| match metric {
                Metric::Acc => a.max(b),
                Metric::Mse => a.min(b),
            },
        )
    };
    let now = best(history);
    let before = best(&history[..history.len() - window]);
    metric.improvement(now, before) < tol
}

/// Run the joint optimization. Returns the final pool and the run log.
pub fn train_joint(
    tasks: &[TaskSpec],
    pool: ParamPool,
    cfg: &TrainConfig,
) -> Result<(ParamPool, RunLog)> {
    validate(tasks, &pool, cfg)?;
    let mut pool = pool;
    let carrier_idx = tasks
        .iter()
        .position(|t| t.kind == TaskKind::Carrier)
        .unwrap();
    // Fixed visit order: secrets first, carrier last.
    let visit: Vec<usize> = (0..tasks.len())
        .filter(|&i| i != carrier_idx)
        .chain([carrier_idx])
        .collect();

    let assignments: Vec<_> = tasks
        .iter()
        .map(|t| derive_assignment(&t.model_spec, &t.key))
        .collect::<Result<_>>()?;

    let order_seed = batch_order_seed(cfg.seed);
    let mut states: Vec<TaskState> = tasks
        .iter()
        .map(|t| {
            let (train, val) = match t.kind {
                // Memorization tasks hold nothing out: every pair must be
                // memorized and convergence is measured on the full set.
                TaskKind::Memorization => (t.dataset.clone(), t.dataset.clone()),
                _ => t.dataset.split(cfg.val_split, cfg.seed),
            };
            let order = rng::permutation(train.len(), order_seed);
            TaskState {
                order,
                cursor: 0,
                batch: t.batch_size.unwrap_or(cfg.batch_size),
                optimizer: OptimizerState::new(&t.model_spec, t.optimizer),
                metric_history: Vec::new(),
                epoch_loss_sum: 0.0,
                epoch_loss_count: 0,
                train,
                val,
            }
        })
        .collect();

    let carrier_state = &states[carrier_idx];
    let iters_per_epoch =
        carrier_state.train.len().div_ceil(carrier_state.batch.min(carrier_state.train.len()));
    let uniform_weights = tasks.iter().all(|t| t.pool_weight == 1.0);

    let mut log = RunLog {
        records: Vec::new(),
        snapshots: Vec::new(),
        termination: format!("max-epochs({})", cfg.max_epochs),
    };

    'epochs: for epoch in 0..cfg.max_epochs {
        for _ in 0..iters_per_epoch {
            for &ti in &visit {
                let task = &tasks[ti];
                let state = &mut states[ti];
                let before = pool.fill(&task.model_spec, &task.key)?;
                let indices = state.next_indices();
                let batch = state.train.batch(&indices);
                let (loss, grads) = loss_and_grad(&before, &batch).map_err(|e| {
                    Error::TrainDiverged {
                        task_id: task.task_id.clone(),
                        reason: e.to_string(),
                    }
                })?;
                let mut after = before.clone();
                optimizer_step(&mut state.optimizer, &mut after, &grads).map_err(|e| {
                    Error::TrainDiverged {
                        task_id: task.task_id.clone(),
                        reason: e.to_string(),
                    }
                })?;
                pool.propagate(TaskId(ti as u32), &assignments[ti], &before, &after)?;
                state.epoch_loss_sum += loss;
                state.epoch_loss_count += 1;
            }
            if uniform_weights {
                pool.update();
            } else {
                pool.update_weighted(|tid| tasks[tid.0 as usize].pool_weight);
            }
        }

        // Epoch boundary: validation, logging, termination checks.
        let mut carrier_ok = false;
        let mut any_secret_converged = false;
        let mut has_secret = false;
        for ti in 0..tasks.len() {
            let task = &tasks[ti];
            let metric = task.metric();
            let model = pool.fill(&task.model_spec, &task.key)?;
            let state = &mut states[ti];
            let val_metric = evaluate(&model, &state.val, metric)?;
            state.metric_history.push(val_metric);
            log.records.push(EpochRecord {
                epoch,
                task_id: task.task_id.clone(),
                train_loss: state.epoch_loss_sum / state.epoch_loss_count.max(1) as f64,
                val_metric,
            });
            state.epoch_loss_sum = 0.0;
            state.epoch_loss_count = 0;
            let task_converged = converged(metric, &state.metric_history, cfg.window, cfg.tol);
            if task.kind == TaskKind::Carrier {
                carrier_ok = match &task.target {
                    Some(target) => target.met(val_metric),
                    None => task_converged,
                };
            } else {
                has_secret = true;
                any_secret_converged |= task_converged;
            }
        }
        log.snapshots.push(PoolSnapshot {
            epoch,
            fingerprint: io::pool_fingerprint(&pool),
        });
        let secrets_ready = if has_secret { any_secret_converged } else { true };
        if carrier_ok && secrets_ready {
            log.termination = format!("converged(epoch={epoch})");
            break 'epochs;
        }
    }
    Ok((pool, log))
}

fn validate(tasks: &[TaskSpec], pool: &ParamPool, cfg: &TrainConfig) -> Result<()> {
    if cfg.window < 1 || cfg.tol <= 0.0 || !(0.0..1.0).contains(&cfg.val_split) || cfg.val_split == 0.0
    {
        return Err(Error::InvalidArgument(
            "train config needs window >= 1, tol > 0, 0 < val_split < 1".into(),
        ));
    }
    if cfg.batch_size == 0 || cfg.max_epochs == 0 {
        return Err(Error::InvalidArgument(
            "batch size and epoch cap must be positive".into(),
        ));
    }
    let carriers = tasks.iter().filter(|t| t.kind == TaskKind::Carrier).count();
    if carriers != 1 {
        return Err(Error::InvalidArgument(format!(
            "expected exactly one carrier task, found {carriers}"
        )));
    }
    for (i, a) in tasks.iter().enumerate() {
        if a.dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if a.key.pool_sizes != pool.sizes() {
            return Err(Error::PoolSizeMismatch {
                key: a.key.pool_sizes.as_array(),
                pool: pool.sizes().as_array(),
            });
        }
        for b in &tasks[i + 1..] {
            if a.task_id == b.task_id {
                return Err(Error::InvalidArgument(format!(
                    "duplicate task_id `{}`",
                    a.task_id
                )));
            }
        }
    }
    Ok(())
}

/// Validation metric: classification accuracy, or the per-sample L2-over-dim
/// reconstruction error averaged over the set.
pub fn evaluate(model: &Model, dataset: &Dataset, metric: Metric) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let outputs = model.forward(&dataset.inputs)?;
    match (metric, &dataset.targets) {
        (Metric::Acc, Targets::Classes(labels)) => {
            let mut correct = 0usize;
            for (r, &y) in labels.iter().enumerate() {
                if argmax(outputs.row(r)) == y {
                    correct += 1;
                }
            }
            Ok(correct as f64 / labels.len() as f64)
        }
        (Metric::Mse, Targets::Values(vals)) => {
            if vals.cols != outputs.cols {
                return Err(Error::ShapeMismatch(
                    "target dim does not match model output dim".into(),
                ));
            }
            let mut total = 0.0;
            for r in 0..outputs.rows {
                total += crate::stealing::mse_sample(outputs.row(r), vals.row(r))?;
            }
            Ok(total / outputs.rows as f64)
        }
        _ => Err(Error::ShapeMismatch(
            "metric does not match the dataset's target kind".into(),
        )),
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Signed performance difference: hidden-pipeline metric minus the
/// independently trained baseline's metric.
pub fn delta_perf(hidden_metric: f64, baseline_metric: f64) -> f64 {
    hidden_metric - baseline_metric
}

/// Functionality task over a pixel-permuted copy of a base dataset. The same
/// fixed permutation applies to every sample (train and validation alike);
/// `perm_seed = None` keeps the identity.
pub fn make_permuted_task(
    task_id: &str,
    base: &Dataset,
    perm_seed: Option<u64>,
    model_spec: ModelSpec,
    key: SecretKey,
    optimizer: OptimizerConfig,
) -> Result<TaskSpec> {
    let dataset = match perm_seed {
        Some(seed) => {
            let perm = rng::permutation(base.dim(), seed);
            base.permute_columns(&perm)?
        }
        None => base.clone(),
    };
    Ok(TaskSpec::functionality(
        task_id, model_spec, key, dataset, optimizer,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, ParamKind};
    use crate::pool::PoolSizes;
    use crate::Mat;

    fn small_setup(seed: u64) -> (ModelSpec, Dataset) {
        let spec = ModelSpec::classifier(&[8, 10, 4]).unwrap();
        let data = synthetic_blobs_easy(160, 8, 4, seed);
        (spec, data)
    }

    fn synthetic_blobs_easy(n: usize, dim: usize, classes: usize, seed: u64) -> Dataset {
        crate::data::synthetic_blobs_with(n, dim, classes, seed, 1.0, 0.4)
    }

    fn carrier_task(spec: &ModelSpec, pool: &ParamPool, data: Dataset) -> TaskSpec {
        let key = SecretKey::new(0, &spec.arch_id, pool.sizes(), false);
        TaskSpec::carrier(
            "carrier",
            spec.clone(),
            key,
            data,
            OptimizerConfig::Sgd { lr: 0.1 },
        )
    }

    #[test]
    fn perfect_classifier_acc_one() {
        // A model that routes each input's argmax feature straight through.
        let spec = ModelSpec::classifier(&[4, 4]).unwrap();
        let mut model = Model::zeros(spec);
        for i in 0..4 {
            model.weights[i * 4 + i] = 1.0;
        }
        let mut inputs = Mat::zeros(10, 4);
        let mut labels = Vec::new();
        for r in 0..10 {
            inputs.row_mut(r)[r % 4] = 1.0;
            labels.push(r % 4);
        }
        let ds = Dataset::classification(inputs, labels).unwrap();
        assert_eq!(evaluate(&model, &ds, Metric::Acc).unwrap(), 1.0);
    }

    #[test]
    fn mse_metric_uses_l2_over_dim() {
        // Zero model output, target (3, 4): ||diff|| / 2 = 2.5.
        let spec = ModelSpec::regressor(&[2, 2]).unwrap();
        let model = Model::zeros(spec);
        let inputs = Mat::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let targets = Mat::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let ds = Dataset::regression(inputs, targets).unwrap();
        assert_eq!(evaluate(&model, &ds, Metric::Mse).unwrap(), 2.5);
    }

    #[test]
    fn random_classifier_near_chance() {
        let spec = ModelSpec::classifier(&[16, 10]).unwrap();
        let model = init_params(&spec, 77);
        // Labels are balanced; inputs carry no class signal at all.
        let ds = crate::data::synthetic_blobs_with(5000, 16, 10, 3, 0.0, 1.0);
        let acc = evaluate(&model, &ds, Metric::Acc).unwrap();
        assert!((acc - 0.1).abs() < 0.03, "acc {acc}");
    }

    #[test]
    fn delta_perf_examples() {
        assert!((delta_perf(0.942, 0.951) - (-0.009)).abs() < 1e-12);
        assert_eq!(delta_perf(0.5, 0.5), 0.0);
        assert!((delta_perf(0.90, 0.85) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn empty_dataset_rejected() {
        let spec = ModelSpec::classifier(&[2, 2]).unwrap();
        let model = Model::zeros(spec);
        let ds = Dataset::classification(Mat::zeros(0, 2), vec![]).unwrap();
        assert!(matches!(
            evaluate(&model, &ds, Metric::Acc),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn permuted_task_construction() {
        let (spec, data) = small_setup(5);
        let key = SecretKey::new(3, &spec.arch_id, PoolSizes::new(100, 20, 0), false);
        let a = make_permuted_task("a", &data, Some(9), spec.clone(), key.clone(), OptimizerConfig::default_sgd())
            .unwrap();
        let b = make_permuted_task("b", &data, Some(9), spec.clone(), key.clone(), OptimizerConfig::default_sgd())
            .unwrap();
        assert_eq!(a.dataset, b.dataset);
        let id = make_permuted_task("c", &data, None, spec.clone(), key.clone(), OptimizerConfig::default_sgd())
            .unwrap();
        assert_eq!(id.dataset, data);
        let other = make_permuted_task("d", &data, Some(10), spec, key, OptimizerConfig::default_sgd())
            .unwrap();
        assert_ne!(other.dataset.inputs, a.dataset.inputs);
    }

    #[test]
    fn duplicate_task_ids_rejected() {
        let (spec, data) = small_setup(1);
        let carrier = init_params(&spec, 0);
        let pool = ParamPool::from_model(&carrier);
        let t1 = carrier_task(&spec, &pool, data.clone());
        let mut t2 = t1.clone();
        t2.kind = TaskKind::Functionality;
        let err = train_joint(&[t1, t2], pool, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "{err}");
    }

    #[test]
    fn must_have_exactly_one_carrier() {
        let (spec, data) = small_setup(2);
        let carrier = init_params(&spec, 0);
        let pool = ParamPool::from_model(&carrier);
        let mut t = carrier_task(&spec, &pool, data);
        t.kind = TaskKind::Functionality;
        assert!(train_joint(&[t], pool, &TrainConfig::default()).is_err());
    }

    #[test]
    fn identical_tasks_leave_trajectory_unchanged() {
        // A secret task that clones the carrier (same data, same arch, same
        // v) produces identical per-iteration deltas, and the mean of equal
        // votes is the single vote: the pool trajectory must not move.
        let (spec, data) = small_setup(3);
        let carrier_model = init_params(&spec, 4);
        let pool = ParamPool::from_model(&carrier_model);
        let cfg = TrainConfig {
            max_epochs: 2,
            tol: 1e-9,
            ..TrainConfig::default()
        };

        let single = vec![carrier_task(&spec, &pool, data.clone())];
        let clone_key = SecretKey::new(0, &spec.arch_id, pool.sizes(), false);
        let double = vec![
            TaskSpec::functionality(
                "carrier-clone",
                spec.clone(),
                clone_key,
                data.clone(),
                OptimizerConfig::Sgd { lr: 0.1 },
            ),
            carrier_task(&spec, &pool, data.clone()),
        ];
        let (p1, _) = train_joint(&single, pool.clone(), &cfg).unwrap();
        let (p2, _) = train_joint(&double, pool.clone(), &cfg).unwrap();
        assert_eq!(p1.group(ParamKind::Weight), p2.group(ParamKind::Weight));
        assert_eq!(p1.group(ParamKind::Bias), p2.group(ParamKind::Bias));
    }

    #[test]
    fn run_is_reproducible_bit_for_bit() {
        let (spec, data) = small_setup(6);
        let carrier_model = init_params(&spec, 4);
        let pool = ParamPool::from_model(&carrier_model);
        let secret_data = synthetic_blobs_easy(100, 8, 4, 12);
        let skey = SecretKey::new(5, &spec.arch_id, pool.sizes(), true);
        let tasks = vec![
            TaskSpec::functionality("s", spec.clone(), skey, secret_data, OptimizerConfig::Sgd { lr: 0.1 }),
            carrier_task(&spec, &pool, data),
        ];
        let cfg = TrainConfig {
            max_epochs: 3,
            ..TrainConfig::default()
        };
        let (pa, la) = train_joint(&tasks, pool.clone(), &cfg).unwrap();
        let (pb, lb) = train_joint(&tasks, pool.clone(), &cfg).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(la.to_text(), lb.to_text());
    }

    #[test]
    fn trains_to_high_accuracy_and_terminates() {
        let (spec, data) = small_setup(7);
        let carrier_model = init_params(&spec, 8);
        let pool = ParamPool::from_model(&carrier_model);
        let secret_data = synthetic_blobs_easy(160, 8, 4, 13);
        let skey = SecretKey::new(23, &spec.arch_id, pool.sizes(), false);
        let tasks = vec![
            TaskSpec::functionality("s", spec.clone(), skey.clone(), secret_data, OptimizerConfig::Sgd { lr: 0.1 }),
            carrier_task(&spec, &pool, data)
                .with_target(CarrierTarget { metric: Metric::Acc, threshold: 0.8 }),
        ];
        let cfg = TrainConfig {
            max_epochs: 60,
            ..TrainConfig::default()
        };
        let (pool, log) = train_joint(&tasks, pool, &cfg).unwrap();
        let last_carrier = log
            .records
            .iter()
            .rev()
            .find(|r| r.task_id == "carrier")
            .unwrap();
        assert!(last_carrier.val_metric >= 0.8, "{}", last_carrier.val_metric);
        // The hidden secret evaluates identically when refilled.
        let secret = pool.fill(&spec, &skey).unwrap();
        assert_eq!(
            secret,
            pool.fill(&spec, &skey).unwrap(),
            "fill is a pure read"
        );
        assert!(!log.snapshots.is_empty());
    }

    #[test]
    fn runlog_text_roundtrip() {
        let log = RunLog {
            records: vec![
                EpochRecord {
                    epoch: 0,
                    task_id: "carrier".into(),
                    train_loss: 0.6931471805599453,
                    val_metric: 0.5,
                },
                EpochRecord {
                    epoch: 1,
                    task_id: "s".into(),
                    train_loss: 0.25,
                    val_metric: 0.9375,
                },
            ],
            snapshots: vec![PoolSnapshot {
                epoch: 0,
                fingerprint: 0xdead_beef,
            }],
            termination: "converged(epoch=1)".into(),
        };
        let text = log.to_text();
        let back = RunLog::from_text(&text).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn nan_loss_names_the_task() {
        let (spec, data) = small_setup(9);
        let carrier_model = init_params(&spec, 4);
        let pool = ParamPool::from_model(&carrier_model);
        let mut bad = carrier_task(&spec, &pool, data);
        bad.optimizer = OptimizerConfig::Sgd { lr: 1e18 };
        let cfg = TrainConfig {
            max_epochs: 30,
            ..TrainConfig::default()
        };
        match train_joint(&[bad], pool, &cfg) {
            Err(Error::TrainDiverged { task_id, .. }) => assert_eq!(task_id, "carrier"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
