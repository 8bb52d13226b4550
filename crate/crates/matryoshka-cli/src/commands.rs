//! Subcommand implementations. Every command is a thin deterministic
//! wrapper over the library: identical inputs and flags produce identical
//! output files.

use std::fs;
use std::path::{Path, PathBuf};

use matryoshka::analysis::{otd, pairwise_otd, weight_histogram};
use matryoshka::io;
use matryoshka::nn::{
    init_params, loss_and_grad, optimizer_step, Batch, Model, ModelSpec, OptimizerConfig,
    OptimizerState, ParamKind, Targets,
};
use matryoshka::pool::{
    assemble, decode_direct, decode_segmented, FusionStrategy, ParamPool, PoolSizes, SecretKey,
};
use matryoshka::postprocess::{finetune_last_k, prune_weights};
use matryoshka::stealing::{
    build_memorization_task, make_noise, mse_sample, reconstruct, ssim, NoiseDist, NoiseSpec,
    StealTarget,
};
use matryoshka::trainer::{
    delta_perf, evaluate, train_joint, CarrierTarget, Metric, RunLog, TaskSpec,
};
use matryoshka::{Error, Result};

use crate::config::{DatasetRef, ExperimentConfig, PoolInit, SecretBlock, SecretKind};

/// Stages 1-3: initialize the pool, construct the tasks, train jointly, and
/// publish. Writes the carrier checkpoint, the attacker-side pool, the
/// carrier key, one key file per secret task, and the run log.
pub fn cmd_train_hide(config_path: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(config_path)?;
    let base_dir = config_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let out_dir = resolve(&base_dir, &cfg.out_dir);
    fs::create_dir_all(&out_dir)?;

    let carrier_spec = ModelSpec::from_arch_id(&cfg.carrier.arch)?;
    let carrier_init = init_params(&carrier_spec, cfg.seed);
    let pool = match cfg.pool.init {
        PoolInit::FromCarrier => ParamPool::from_model(&carrier_init),
        PoolInit::FromScratch => {
            let s = cfg.pool.sizes.expect("validated");
            ParamPool::from_scratch(
                PoolSizes::new(s[0], s[1], s[2]),
                cfg.pool.seed.unwrap_or(cfg.seed),
            )
        }
    };
    let sizes = pool.sizes();

    let carrier_key = SecretKey::new(
        cfg.carrier.v,
        &carrier_spec.arch_id,
        sizes,
        cfg.carrier.permute,
    );
    let mut carrier_task = TaskSpec::carrier(
        "carrier",
        carrier_spec.clone(),
        carrier_key.clone(),
        cfg.carrier.dataset.load()?,
        cfg.carrier.optimizer.to_config(),
    );
    if let Some(acc) = cfg.carrier.target_acc {
        carrier_task = carrier_task.with_target(CarrierTarget {
            metric: Metric::Acc,
            threshold: acc,
        });
    }

    let mut tasks = Vec::new();
    for block in &cfg.secrets {
        tasks.push(build_secret_task(block, sizes, &base_dir)?);
    }
    tasks.push(carrier_task);

    let (pool, log) = train_joint(&tasks, pool, &cfg.train_config())?;

    let published = pool.fill(&carrier_spec, &carrier_key)?;
    io::write_model(&out_dir.join("carrier.mtrk"), &published)?;
    io::write_pool(&out_dir.join("pool.mtrk"), &pool)?;
    io::write_key(&out_dir.join("carrier.key"), &carrier_key)?;
    for task in tasks.iter().filter(|t| t.task_id != "carrier") {
        io::write_key(&out_dir.join(format!("key-{}.key", task.task_id)), &task.key)?;
    }
    fs::write(out_dir.join("run.log"), log.to_text())?;

    println!("termination: {}", log.termination);
    for task in &tasks {
        if let Some(r) = log.records.iter().rev().find(|r| r.task_id == task.task_id) {
            println!("{}: validation metric {:.6}", r.task_id, r.val_metric);
        }
    }
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn build_secret_task(block: &SecretBlock, sizes: PoolSizes, base_dir: &Path) -> Result<TaskSpec> {
    let spec = ModelSpec::from_arch_id(&block.arch)?;
    let key = SecretKey::new(block.v, &spec.arch_id, sizes, block.permute);
    let mut task = match block.kind {
        SecretKind::Functionality => {
            let dataset = block
                .dataset
                .as_ref()
                .expect("validated")
                .load()?;
            TaskSpec::functionality(
                &block.task_id,
                spec,
                key,
                dataset,
                block.optimizer.to_config(),
            )
        }
        SecretKind::Memorization => {
            let targets_path = resolve(base_dir, block.targets.as_ref().expect("validated"));
            let (mat, shape) = io::read_tensor(&targets_path)?;
            let targets = StealTarget::new(mat, shape)?;
            let noise = block.noise.expect("validated").to_spec();
            let mut t =
                build_memorization_task(&block.task_id, &targets, &noise, &spec, &key)?;
            t.optimizer = block.optimizer.to_config();
            t
        }
    };
    task.batch_size = block.batch_size;
    task.pool_weight = block.pool_weight.unwrap_or(1.0);
    Ok(task)
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Stage 4a: recover the pool from a published carrier. The decode path is
/// chosen by comparing the declared pool sizes with the carrier's parameter
/// counts (plus the identity-fill convention for the direct path).
pub fn cmd_decode(carrier: &Path, key: &Path, fusion: &str, out: &Path) -> Result<()> {
    let carrier = io::read_model(carrier)?;
    let key = io::read_key(key)?;
    let fusion = FusionStrategy::parse(fusion)?;
    let direct = key.pool_sizes.as_array() == carrier.spec.param_counts()
        && key.v == 0
        && !key.permute;
    let pool = if direct {
        println!("decode path: direct");
        decode_direct(&carrier)
    } else {
        let decoded = decode_segmented(&carrier, &key, fusion)?;
        let uncovered: usize = decoded.uncovered.iter().map(Vec::len).sum();
        if uncovered > 0 {
            eprintln!("warning: {uncovered} pool slots were never stored by a full copy");
        }
        println!("decode path: segmented ({})", fusion.name());
        decoded.pool
    };
    io::write_pool(out, &pool)?;
    let s = pool.sizes();
    println!("pool sizes: {},{},{}", s.weight, s.bias, s.scale);
    Ok(())
}

/// Stage 4b: reassemble one secret model from a decoded pool.
pub fn cmd_assemble(pool: &Path, key: &Path, out: &Path) -> Result<()> {
    let pool = io::read_pool(pool)?;
    let key = io::read_key(key)?;
    let model = assemble(&pool, &key)?;
    io::write_model(out, &model)?;
    println!("assembled {} ({} weights)", key.arch_id, model.weights.len());
    Ok(())
}

/// Standalone memorization run: overfit a generator directly onto the
/// targets (no pool). This is the reference run the hidden pipeline is
/// judged against.
#[allow(clippy::too_many_arguments)]
pub fn cmd_steal(
    targets: &Path,
    arch: &str,
    noise_dist: &str,
    noise_seed: u64,
    steps: usize,
    lr: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let (mat, shape) = io::read_tensor(targets)?;
    let targets = StealTarget::new(mat, shape)?;
    let spec = ModelSpec::from_arch_id(arch)?;
    let noise = NoiseSpec {
        dist: parse_dist(noise_dist)?,
        dim: spec.input_dim(),
        count: targets.count(),
        seed: noise_seed,
    };
    let batch = Batch {
        inputs: make_noise(&noise),
        targets: Targets::Values(targets.targets.clone()),
    };
    let mut model = init_params(&spec, seed);
    let mut state = OptimizerState::new(
        &spec,
        OptimizerConfig::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        },
    );
    let mut last_loss = f64::NAN;
    for _ in 0..steps {
        let (loss, grads) = loss_and_grad(&model, &batch)?;
        optimizer_step(&mut state, &mut model, &grads)?;
        last_loss = loss;
    }
    io::write_model(out, &model)?;
    let (mse, s) = reconstruction_metrics(&model, &noise, &targets)?;
    println!("training loss {last_loss:.3e}");
    println!("mean sample MSE {mse:.6}");
    println!("mean SSIM {s:.6}");
    Ok(())
}

fn reconstruction_metrics(
    model: &Model,
    noise: &NoiseSpec,
    targets: &StealTarget,
) -> Result<(f64, f64)> {
    let recon = reconstruct(model, noise)?;
    let mut mse_total = 0.0;
    let mut ssim_total = 0.0;
    for r in 0..recon.rows {
        mse_total += mse_sample(recon.row(r), targets.targets.row(r))?;
        ssim_total += ssim(recon.row(r), targets.targets.row(r), 1.0)?;
    }
    let n = recon.rows as f64;
    Ok((mse_total / n, ssim_total / n))
}

/// Colluder-side reconstruction from an assembled generator.
#[allow(clippy::too_many_arguments)]
pub fn cmd_reconstruct(
    model: &Path,
    noise_dist: &str,
    noise_count: usize,
    noise_seed: u64,
    out: &Path,
    shape: Option<&str>,
    pgm_dir: Option<&Path>,
    targets: Option<&Path>,
) -> Result<()> {
    let model = io::read_model(model)?;
    let noise = NoiseSpec {
        dist: parse_dist(noise_dist)?,
        dim: model.spec.input_dim(),
        count: noise_count,
        seed: noise_seed,
    };
    let recon = reconstruct(&model, &noise)?;
    let shape = match (shape, targets) {
        (Some(s), _) => parse_shape(s)?,
        (None, Some(t)) => io::read_tensor(t)?.1,
        (None, None) => (1, recon.cols),
    };
    if shape.0 * shape.1 != recon.cols {
        return Err(Error::ShapeMismatch(format!(
            "shape {}x{} does not fold {} outputs",
            shape.0, shape.1, recon.cols
        )));
    }
    io::write_tensor(out, &recon, shape)?;
    if let Some(dir) = pgm_dir {
        fs::create_dir_all(dir)?;
        for r in 0..recon.rows {
            io::write_pgm(
                &dir.join(format!("sample-{r:03}.pgm")),
                recon.row(r),
                shape.0,
                shape.1,
            )?;
        }
    }
    if let Some(tpath) = targets {
        let (mat, tshape) = io::read_tensor(tpath)?;
        let targets = StealTarget::new(mat, tshape)?;
        let (mse, s) = reconstruction_metrics(&model, &noise, &targets)?;
        println!("mean sample MSE {mse:.6}");
        println!("mean SSIM {s:.6}");
    }
    println!("wrote {} reconstructions", recon.rows);
    Ok(())
}

fn parse_dist(s: &str) -> Result<NoiseDist> {
    match s {
        "gaussian" => Ok(NoiseDist::Gaussian),
        "uniform" => Ok(NoiseDist::Uniform),
        _ => Err(Error::InvalidArgument(format!(
            "unknown noise distribution `{s}` (expected gaussian | uniform)"
        ))),
    }
}

fn parse_shape(s: &str) -> Result<(usize, usize)> {
    let (h, w) = s
        .split_once('x')
        .ok_or_else(|| Error::InvalidArgument(format!("bad shape `{s}` (expected HxW)")))?;
    Ok((
        h.parse()
            .map_err(|_| Error::InvalidArgument("bad shape height".into()))?,
        w.parse()
            .map_err(|_| Error::InvalidArgument("bad shape width".into()))?,
    ))
}

pub fn cmd_eval(model: &Path, data: &str, metric: &str, baseline: Option<f64>) -> Result<()> {
    let model = io::read_model(model)?;
    let dataset = DatasetRef::parse(data)?.load()?;
    let metric = Metric::parse(metric)?;
    let value = evaluate(&model, &dataset, metric)?;
    println!("{} {value:.6}", metric.name().to_uppercase());
    if let Some(baseline) = baseline {
        println!("DPERF {:+.6}", delta_perf(value, baseline));
    }
    Ok(())
}

pub fn cmd_prune(model: &Path, beta: f64, out: &Path) -> Result<()> {
    let model = io::read_model(model)?;
    let pruned = prune_weights(&model, beta)?;
    io::write_model(out, &pruned)?;
    let zeros = pruned.weights.iter().filter(|&&w| w == 0.0).count();
    println!(
        "pruned {zeros}/{} weights at beta {beta}",
        pruned.weights.len()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_finetune(
    model: &Path,
    data: &str,
    last_k: usize,
    steps: usize,
    lr: f64,
    batch_size: usize,
    out: &Path,
) -> Result<()> {
    let model = io::read_model(model)?;
    let dataset = DatasetRef::parse(data)?.load()?;
    let tuned = finetune_last_k(
        &model,
        &dataset,
        last_k,
        steps,
        OptimizerConfig::Sgd { lr },
        batch_size,
    )?;
    io::write_model(out, &tuned)?;
    println!(
        "fine-tuned last {last_k} of {} layers for {steps} steps",
        model.spec.num_layers()
    );
    Ok(())
}

/// Pairwise OTD between model weight histograms. Two models print the
/// single distance; more print the full matrix as a plain-text table.
pub fn cmd_otd(models: &[PathBuf], bins: usize, hist_dir: Option<&Path>) -> Result<()> {
    let loaded: Vec<Model> = models.iter().map(|p| io::read_model(p)).collect::<Result<_>>()?;
    if let Some(dir) = hist_dir {
        fs::create_dir_all(dir)?;
        for (path, model) in models.iter().zip(&loaded) {
            let hist = weight_histogram(model.params(ParamKind::Weight), bins)?;
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("model");
            let mut table = String::from("# bin_center\tmass\n");
            for (l, &mass) in hist.masses.iter().enumerate() {
                table.push_str(&format!("{}\t{}\n", hist.bin_center(l), mass));
            }
            if hist.clamped > 0 {
                eprintln!(
                    "warning: {}: {} weights outside [-1, 1] clamped into edge bins",
                    path.display(),
                    hist.clamped
                );
            }
            fs::write(dir.join(format!("{stem}.hist.txt")), table)?;
        }
    }
    if loaded.len() == 2 {
        let h0 = weight_histogram(loaded[0].params(ParamKind::Weight), bins)?;
        let h1 = weight_histogram(loaded[1].params(ParamKind::Weight), bins)?;
        println!("{:.6}", otd(&h0, &h1)?);
    } else {
        // pairwise_otd pins the default grid; recompute at the asked bins.
        let _ = pairwise_otd(&loaded)?;
        let hists: Vec<_> = loaded
            .iter()
            .map(|m| weight_histogram(m.params(ParamKind::Weight), bins))
            .collect::<Result<_>>()?;
        for i in 0..hists.len() {
            let row: Vec<String> = (0..hists.len())
                .map(|j| {
                    let d = if i == j {
                        0.0
                    } else {
                        otd(&hists[i], &hists[j]).unwrap()
                    };
                    format!("{d:.9}")
                })
                .collect();
            println!("{}", row.join("\t"));
        }
    }
    Ok(())
}

/// Summarize a run log: per-task final metrics and the termination reason.
pub fn cmd_report(log: &Path) -> Result<()> {
    let log = RunLog::from_text(&fs::read_to_string(log)?)?;
    println!("termination: {}", log.termination);
    let mut seen: Vec<&str> = Vec::new();
    for r in &log.records {
        if !seen.contains(&r.task_id.as_str()) {
            seen.push(&r.task_id);
        }
    }
    println!("epochs: {}", log.snapshots.len());
    for task in seen {
        let last = log.records.iter().rev().find(|r| r.task_id == task).unwrap();
        println!(
            "{task}: final loss {:.6}, final metric {:.6}",
            last.train_loss, last.val_metric
        );
    }
    Ok(())
}
