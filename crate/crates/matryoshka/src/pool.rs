//! The hiding medium: grouped shared-parameter arrays, deterministic cyclic
//! fill assignments keyed by integer secrets, per-task update buffers, and
//! the two decoding paths (direct and segmented-with-fusion).

use crate::nn::{Model, ModelSpec, ParamKind};
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Default standard deviation of a from-scratch weight group.
pub const SCRATCH_WEIGHT_STD: f64 = 0.05;

/// Sizes of the three pool groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSizes {
    pub weight: usize,
    pub bias: usize,
    pub scale: usize,
}

impl PoolSizes {
    pub fn new(weight: usize, bias: usize, scale: usize) -> Self {
        PoolSizes {
            weight,
            bias,
            scale,
        }
    }

    pub fn get(&self, kind: ParamKind) -> usize {
        match kind {
            ParamKind::Weight => self.weight,
            ParamKind::Bias => self.bias,
            ParamKind::Scale => self.scale,
        }
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.weight, self.bias, self.scale]
    }
}

/// Compact task handle used by the update buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TaskId(pub u32);

/// The colluder's decoding secret: everything needed to decode the pool from
/// a published carrier and reassemble one secret model. Pure data, small
/// enough to memorize.
#[derive(Debug, Clone, PartialEq)]
pub struct SecretKey {
    /// Starting-index secret; the fill cursor cycles from `v mod |P|`.
    pub v: u64,
    /// Noise seed, present for memorization tasks only.
    pub noise_seed: Option<u64>,
    pub arch_id: String,
    pub pool_sizes: PoolSizes,
    /// Whether a seeded pool permutation is applied during fill.
    pub permute: bool,
}

impl SecretKey {
    pub fn new(v: u64, arch_id: &str, pool_sizes: PoolSizes, permute: bool) -> Self {
        SecretKey {
            v,
            noise_seed: None,
            arch_id: arch_id.to_string(),
            pool_sizes,
            permute,
        }
    }

    pub fn with_noise_seed(mut self, seed: u64) -> Self {
        self.noise_seed = Some(seed);
        self
    }
}

/// Deterministic association from every scalar parameter position of a model
/// to a pool index, with replacement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FillAssignment {
    indices: [Vec<usize>; 3],
}

impl FillAssignment {
    pub fn kind(&self, kind: ParamKind) -> &[usize] {
        &self.indices[kind.index()]
    }
}

/// Elementwise combination of the multiple pool copies present in an
/// over-long carrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionStrategy {
    /// Take segment 0 (the fine-tuning recipe: only later copies are touched
    /// when just the last layers are retrained).
    First,
    /// Take the first non-zero value among the copies; recovers values wiped
    /// by magnitude pruning as long as one copy survived.
    FirstNonzero,
    /// Elementwise median over the copies.
    Median,
}

impl FusionStrategy {
    pub fn name(self) -> &'static str {
        match self {
            FusionStrategy::First => "first",
            FusionStrategy::FirstNonzero => "first-nonzero",
            FusionStrategy::Median => "median",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(FusionStrategy::First),
            "first-nonzero" => Ok(FusionStrategy::FirstNonzero),
            "median" => Ok(FusionStrategy::Median),
            _ => Err(Error::InvalidArgument(format!(
                "unknown fusion strategy `{s}` (expected first | first-nonzero | median)"
            ))),
        }
    }
}

/// Result of a segmented decode. `uncovered` lists pool indices that no
/// unpadded copy ever stored (possible only when the carrier holds less than
/// one full copy of a group); their values are zero and must not be trusted.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedDecode {
    pub pool: ParamPool,
    pub uncovered: [Vec<usize>; 3],
}

type Buffer = Vec<Vec<(u32, f64)>>;

/// Shared pool of learnable scalars, grouped by parameter kind, with
/// per-task update buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPool {
    groups: [Vec<f64>; 3],
    buffers: [Buffer; 3],
}

impl ParamPool {
    fn with_groups(groups: [Vec<f64>; 3]) -> Self {
        let buffers = [
            vec![Vec::new(); groups[0].len()],
            vec![Vec::new(); groups[1].len()],
            vec![Vec::new(); groups[2].len()],
        ];
        ParamPool { groups, buffers }
    }

    /// Option I: pool initialized from the carrier's own parameters.
    pub fn from_model(carrier: &Model) -> Self {
        Self::with_groups([
            carrier.weights.clone(),
            carrier.biases.clone(),
            carrier.scales.clone(),
        ])
    }

    /// Option II: pool initialized from scratch at an attacker-chosen size.
    /// Weights are seeded Gaussian with std [`SCRATCH_WEIGHT_STD`], biases
    /// zero, scales one.
    pub fn from_scratch(sizes: PoolSizes, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let weight = (0..sizes.weight)
            .map(|_| rng.next_gaussian() * SCRATCH_WEIGHT_STD)
            .collect();
        Self::with_groups([weight, vec![0.0; sizes.bias], vec![1.0; sizes.scale]])
    }

    pub fn sizes(&self) -> PoolSizes {
        PoolSizes {
            weight: self.groups[0].len(),
            bias: self.groups[1].len(),
            scale: self.groups[2].len(),
        }
    }

    pub fn group(&self, kind: ParamKind) -> &[f64] {
        &self.groups[kind.index()]
    }

    pub fn group_mut(&mut self, kind: ParamKind) -> &mut Vec<f64> {
        &mut self.groups[kind.index()]
    }

    /// Instantiate a model's parameters from the pool via the secret-keyed
    /// assignment. The pool is not modified.
    pub fn fill(&self, spec: &ModelSpec, key: &SecretKey) -> Result<Model> {
        if key.pool_sizes != self.sizes() {
            return Err(Error::PoolSizeMismatch {
                key: key.pool_sizes.as_array(),
                pool: self.sizes().as_array(),
            });
        }
        let assignment = derive_assignment(spec, key)?;
        let mut model = Model::zeros(spec.clone());
        for kind in ParamKind::ALL {
            let group = self.group(kind);
            let idx = assignment.kind(kind);
            let params = model.params_mut(kind);
            for (p, &j) in params.iter_mut().zip(idx) {
                *p = group[j];
            }
        }
        Ok(model)
    }

    /// Buffer one task's parameter deltas. Multiple positions of the same
    /// task aliasing to one pool slot are averaged before buffering; the
    /// buffer gains exactly one entry per touched slot per task.
    pub fn propagate(
        &mut self,
        task: TaskId,
        assignment: &FillAssignment,
        before: &Model,
        after: &Model,
    ) -> Result<()> {
        if before.spec != after.spec {
            return Err(Error::ShapeMismatch(
                "before/after models have different specs".into(),
            ));
        }
        for kind in ParamKind::ALL {
            let idx = assignment.kind(kind);
            if idx.len() != before.params(kind).len() {
                return Err(Error::ShapeMismatch(format!(
                    "assignment {} length vs model parameter count",
                    kind.name()
                )));
            }
            let glen = self.groups[kind.index()].len();
            let mut sums = vec![0.0f64; glen];
            let mut counts = vec![0u32; glen];
            let b = before.params(kind);
            let a = after.params(kind);
            for (i, &j) in idx.iter().enumerate() {
                sums[j] += a[i] - b[i];
                counts[j] += 1;
            }
            let buffer = &mut self.buffers[kind.index()];
            for j in 0..glen {
                if counts[j] == 0 {
                    continue;
                }
                if buffer[j].iter().any(|&(t, _)| t == task.0) {
                    return Err(Error::DuplicateContribution {
                        task: task.0,
                        kind,
                        index: j,
                    });
                }
                buffer[j].push((task.0, sums[j] / counts[j] as f64));
            }
        }
        Ok(())
    }

    /// Apply the mean of the buffered task deltas to every touched slot and
    /// clear the buffers. Untouched slots are left unchanged; the scale
    /// group is clamped to stay non-negative.
    pub fn update(&mut self) {
        self.update_weighted(|_| 1.0);
    }

    /// Weighted-mean variant of [`update`](Self::update); `update` is the
    /// uniform-weight special case. Entries are combined in task-id order,
    /// so the result is independent of the order tasks propagated in.
    pub fn update_weighted<F: Fn(TaskId) -> f64>(&mut self, weight: F) {
        for kind in ParamKind::ALL {
            let ki = kind.index();
            for (j, buf) in self.buffers[ki].iter_mut().enumerate() {
                if buf.is_empty() {
                    continue;
                }
                buf.sort_by_key(|&(t, _)| t);
                let mut num = 0.0;
                let mut den = 0.0;
                for &(t, d) in buf.iter() {
                    let w = weight(TaskId(t));
                    num += w * d;
                    den += w;
                }
                if den != 0.0 {
                    self.groups[ki][j] += num / den;
                }
                buf.clear();
            }
        }
        for s in &mut self.groups[ParamKind::Scale.index()] {
            if *s < 0.0 {
                *s = 0.0;
            }
        }
    }

    /// True if any buffer entry is pending.
    pub fn has_pending(&self) -> bool {
        self.buffers
            .iter()
            .any(|b| b.iter().any(|e| !e.is_empty()))
    }
}

/// The cyclic (optionally permuted) index map: position `i` of the model's
/// canonical array of a kind maps to pool index `(v + i) mod |P|`, or
/// `perm_v[(v + i) mod |P|]` when the key asks for a permutation.
pub fn derive_assignment(spec: &ModelSpec, key: &SecretKey) -> Result<FillAssignment> {
    let counts = spec.param_counts();
    let mut indices: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for kind in ParamKind::ALL {
        let count = counts[kind.index()];
        if count == 0 {
            continue;
        }
        let p = key.pool_sizes.get(kind);
        if p == 0 {
            return Err(Error::EmptyPoolGroup(kind));
        }
        let start = (key.v % p as u64) as usize;
        let perm = key.permute.then(|| rng::permutation(p, key.v));
        let idx = &mut indices[kind.index()];
        idx.reserve(count);
        let mut cursor = start;
        for _ in 0..count {
            idx.push(match &perm {
                Some(pi) => pi[cursor],
                None => cursor,
            });
            cursor += 1;
            if cursor == p {
                cursor = 0;
            }
        }
    }
    Ok(FillAssignment { indices })
}

/// Direct decode (Option I convention): the pool is the carrier's per-kind
/// parameter arrays, collected as published.
pub fn decode_direct(carrier: &Model) -> ParamPool {
    ParamPool::from_model(carrier)
}

/// Segmented decode: slice each of the carrier's per-kind arrays into
/// segments of the declared group length (last segment zero-padded), fuse
/// the copies elementwise, rotate the fused array right by `v mod |P|`, and
/// undo the fill permutation if one was used.
pub fn decode_segmented(
    carrier: &Model,
    key: &SecretKey,
    fusion: FusionStrategy,
) -> Result<SegmentedDecode> {
    let mut groups: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut uncovered: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for kind in ParamKind::ALL {
        let p = key.pool_sizes.get(kind);
        let values = carrier.params(kind);
        let count = values.len();
        if p == 0 {
            if count > 0 {
                return Err(Error::ShapeMismatch(format!(
                    "carrier has {} {} parameters but the key declares an empty group",
                    count,
                    kind.name()
                )));
            }
            continue;
        }
        if count < p && fusion != FusionStrategy::First {
            return Err(Error::InsufficientCopies {
                kind,
                declared: p,
                available: count,
                strategy: fusion.name(),
            });
        }
        let n_full = count / p;
        let rem = count % p;
        let mut fused = vec![0.0f64; p];
        let mut cover = vec![0u32; p];
        let mut copies: Vec<f64> = Vec::with_capacity(n_full + 1);
        for t in 0..p {
            copies.clear();
            for s in 0..n_full {
                copies.push(values[s * p + t]);
            }
            if t < rem {
                copies.push(values[n_full * p + t]);
            }
            cover[t] = copies.len() as u32;
            fused[t] = match fusion {
                FusionStrategy::First => copies.first().copied().unwrap_or(0.0),
                FusionStrategy::FirstNonzero => copies
                    .iter()
                    .copied()
                    .find(|&v| v != 0.0)
                    .unwrap_or(0.0),
                FusionStrategy::Median => median(&mut copies),
            };
        }

        // Rotate right by v mod |P|: the value at fused offset t belongs to
        // pool index (t + v) mod |P|.
        let r = (key.v % p as u64) as usize;
        let mut rotated = vec![0.0f64; p];
        let mut rotated_cover = vec![0u32; p];
        for t in 0..p {
            let dst = (t + r) % p;
            rotated[dst] = fused[t];
            rotated_cover[dst] = cover[t];
        }

        // Undo the fill permutation: fill read pool index perm[c], so the
        // decoded value at slot perm[c] is what rotation placed at slot c.
        let (final_vals, final_cover) = if key.permute {
            let perm = rng::permutation(p, key.v);
            let mut vals = vec![0.0f64; p];
            let mut cov = vec![0u32; p];
            for c in 0..p {
                vals[perm[c]] = rotated[c];
                cov[perm[c]] = rotated_cover[c];
            }
            (vals, cov)
        } else {
            (rotated, rotated_cover)
        };

        uncovered[kind.index()] = final_cover
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == 0)
            .map(|(j, _)| j)
            .collect();
        groups[kind.index()] = final_vals;
    }
    Ok(SegmentedDecode {
        pool: ParamPool::with_groups(groups),
        uncovered,
    })
}

/// Recover a secret model from a decoded pool: the colluder-facing name for
/// fill, resolving the architecture from the key.
pub fn assemble(pool: &ParamPool, key: &SecretKey) -> Result<Model> {
    let spec = ModelSpec::from_arch_id(&key.arch_id)?;
    pool.fill(&spec, key)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}
