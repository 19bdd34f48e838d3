use std::fs;
use std::path::{Path, PathBuf};

use denoise_core::checkpoint::{load_checkpoint, Checkpoint};
use denoise_core::data::{
    base_dir, corrupt_dataset, prepare_dataset, Dataset, DatasetManifest, NoiseSpec, Source,
    SplitFractions,
};
use denoise_core::dist::{
    self, time_report, EpochStats, ExecMode, Seeds, TimingEntry, TrainConfig,
};
use denoise_core::metrics::{
    emit_report, evaluate_pairs, evaluate_testset, write_grid, Evaluation, GridRow, ReportEntry,
    SsimVariant,
};
use denoise_core::model::Arch;
use denoise_core::{Error, Tensor};
use serde::Deserialize;

use crate::config::{RunConfig, TrainSection};
use crate::exit::Failure;
use crate::{BenchArgs, CorruptArgs, EvaluateArgs, PrepareArgs, RenderArgs, TrainArgs};

fn require<T>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| {
        Failure::usage(format!(
            "missing --{flag} (not set in the config file either)"
        ))
    })
}

fn manifest_path(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf, Failure> {
    require(flag.or_else(|| cfg.paths.manifest.clone()), "manifest")
}

pub fn prepare(a: PrepareArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let out = require(
        a.out_manifest.or_else(|| cfg.paths.manifest.clone()),
        "out-manifest",
    )?;
    let source = match (
        a.synthetic.or(cfg.prepare.synthetic),
        a.input_dir.or_else(|| cfg.paths.input_dir.clone()),
    ) {
        (Some(count), _) => Source::Synthetic { count },
        (None, Some(dir)) => Source::Dir(dir),
        (None, None) => return Err(Failure::usage("give --input-dir or --synthetic")),
    };
    let size = a.size.or(cfg.prepare.size).unwrap_or(256);
    let splits = match a.splits {
        Some(v) if v.len() != 3 => {
            return Err(Failure::usage(format!(
                "--splits takes three values, got {}",
                v.len()
            )))
        }
        Some(v) => Some([v[0], v[1], v[2]]),
        None => None,
    };
    let fractions = match splits.or(cfg.prepare.splits) {
        Some([train, val, test]) => SplitFractions { train, val, test },
        None => SplitFractions::default(),
    };
    let seed = a.seed.or(cfg.prepare.seed).unwrap_or(0);
    let m = prepare_dataset(&source, size, fractions, seed, &out).map_err(|e| match e {
        Error::Domain(msg) => Failure::usage(msg),
        e => e.into(),
    })?;
    println!(
        "prepared {} images at {size}x{size}: train {}, val {}, test {} -> {}",
        m.records.len(),
        m.split.train.len(),
        m.split.val.len(),
        m.split.test.len(),
        out.display()
    );
    Ok(())
}

pub fn corrupt(a: CorruptArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let manifest = manifest_path(a.manifest, cfg)?;
    let sigma = require(a.sigma.or(cfg.noise.sigma), "sigma")?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Failure::usage(format!(
            "--sigma must be a finite value >= 0, got {sigma}"
        )));
    }
    let mean = a.mean.or(cfg.noise.mean).unwrap_or(0.1);
    if !mean.is_finite() {
        return Err(Failure::usage("--mean must be finite"));
    }
    let spec = NoiseSpec {
        mean,
        sigma,
        seed: a.seed.or(cfg.noise.seed).unwrap_or(0),
        clamp: !a.no_clamp && cfg.noise.clamp.unwrap_or(true),
    };
    let m = corrupt_dataset(&manifest, &spec)?;
    println!(
        "wrote {} noisy images (mean {}, sigma {}, {})",
        m.records.len(),
        spec.mean,
        spec.sigma,
        spec.tag()
    );
    Ok(())
}

fn parse_arch(s: &str) -> Result<Arch, Failure> {
    s.parse().map_err(|e: Error| Failure::usage(e.to_string()))
}

fn merge(base: &TrainSection, over: &TrainSection) -> TrainSection {
    macro_rules! pick {
        ($($f:ident),*) => { TrainSection { $($f: over.$f.clone().or_else(|| base.$f.clone()),)* } };
    }
    pick!(
        arch,
        base_ch,
        depth,
        deep_supervision,
        mode,
        workers,
        amp,
        epochs,
        batch_per_worker,
        lr,
        seed_init,
        seed_data,
        early_stop_patience,
        freeze_norm
    )
}

fn to_train_config(s: &TrainSection, noise_seed: u64) -> Result<TrainConfig, Failure> {
    let d = TrainConfig::default();
    let c = TrainConfig {
        arch: s.arch.unwrap_or(d.arch),
        base_ch: s.base_ch.unwrap_or(d.base_ch),
        depth: s.depth.unwrap_or(d.depth),
        deep_supervision: s.deep_supervision.unwrap_or(d.deep_supervision),
        mode: s.mode.unwrap_or(d.mode),
        workers: s.workers.unwrap_or(d.workers),
        amp: s.amp.unwrap_or(d.amp),
        epochs: s.epochs.unwrap_or(d.epochs),
        batch_per_worker: s.batch_per_worker.unwrap_or(d.batch_per_worker),
        lr: s.lr.unwrap_or(d.lr),
        seeds: Seeds {
            init: s.seed_init.unwrap_or(d.seeds.init),
            data: s.seed_data.unwrap_or(d.seeds.data),
            noise: noise_seed,
        },
        early_stop_patience: s.early_stop_patience.or(d.early_stop_patience),
        freeze_norm: s.freeze_norm.unwrap_or(d.freeze_norm),
    };
    c.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(c)
}

fn flags_section(a: &TrainArgs) -> Result<TrainSection, Failure> {
    Ok(TrainSection {
        arch: a.arch.as_deref().map(parse_arch).transpose()?,
        base_ch: a.base_ch,
        depth: a.depth,
        deep_supervision: a.deep_supervision.then_some(true),
        mode: a
            .mode
            .as_deref()
            .map(|m| {
                m.parse::<ExecMode>()
                    .map_err(|e| Failure::usage(e.to_string()))
            })
            .transpose()?,
        workers: a.workers,
        amp: a.amp.then_some(true),
        epochs: a.epochs,
        batch_per_worker: a.batch_per_worker,
        lr: a.lr,
        seed_init: a.seed_init,
        seed_data: a.seed_data,
        early_stop_patience: a.early_stop_patience,
        freeze_norm: a.freeze_norm.then_some(true),
    })
}

/// Loads the manifest and checks noise has been applied.
fn noisy_manifest(path: &Path) -> Result<(DatasetManifest, NoiseSpec), Failure> {
    let m = DatasetManifest::load(path)?;
    let noise = m.noise.ok_or_else(|| {
        Failure::data(format!(
            "{} has no noise applied; run `denoise corrupt` first",
            path.display()
        ))
    })?;
    Ok((m, noise))
}

fn print_stats(stats: &[EpochStats]) {
    println!(
        "{:>5}  {:>12}  {:>12}  {:>9}  {:>7}",
        "epoch", "train_loss", "val_loss", "seconds", "skipped"
    );
    for s in stats {
        println!(
            "{:>5}  {:>12.6}  {:>12.6}  {:>9.2}  {:>7}",
            s.epoch, s.train_loss, s.val_loss, s.wall_seconds, s.skipped_steps
        );
    }
}

pub fn train(a: TrainArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let flags = flags_section(&a)?;
    let manifest = manifest_path(a.manifest, cfg)?;
    let out_dir = a
        .out_dir
        .or_else(|| cfg.paths.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    let tc = to_train_config(&merge(&cfg.train, &flags), cfg.noise.seed.unwrap_or(0))?;
    noisy_manifest(&manifest)?;
    let outcome = dist::train(&manifest, &tc, &out_dir)?;
    print_stats(&outcome.stats);
    println!(
        "best val_loss {:.6}; checkpoint {}",
        outcome.best_val_loss,
        outcome.best_checkpoint.display()
    );
    Ok(())
}

fn load_split(m: &DatasetManifest, manifest: &Path, ids: &[String]) -> Result<Dataset, Failure> {
    Ok(Dataset::load(m, &base_dir(manifest), ids)?)
}

pub fn evaluate(a: EvaluateArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let manifest = manifest_path(a.manifest, cfg)?;
    let variant = match a.ssim_variant.as_deref() {
        Some(s) => s
            .parse()
            .map_err(|e: Error| Failure::usage(e.to_string()))?,
        None => cfg.evaluate.ssim_variant.unwrap_or(SsimVariant::Windowed),
    };
    let expected_arch = a.arch.as_deref().map(parse_arch).transpose()?;
    let (m, noise) = noisy_manifest(&manifest)?;
    if m.split.test.is_empty() {
        return Err(Failure::usage("the manifest's test split is empty"));
    }
    let Checkpoint {
        mut graph, meta, ..
    } = load_checkpoint::<f32>(&a.ckpt)?;
    if let Some(arch) = expected_arch {
        if graph.config().arch != arch {
            return Err(Error::Load(format!(
                "checkpoint holds {}, expected {arch}",
                graph.config().arch
            ))
            .into());
        }
    }
    let ds = load_split(&m, &manifest, &m.split.test)?;
    let model_eval = evaluate_testset(&mut graph, &ds, meta.amp, variant)?;
    let as_f64 = |v: &Vec<Vec<f32>>| -> Vec<Vec<f64>> {
        v.iter()
            .map(|r| r.iter().map(|&x| x as f64).collect())
            .collect()
    };
    let noisy_eval = evaluate_pairs(
        &ds.ids,
        &as_f64(&ds.noisy),
        &as_f64(&ds.clean),
        ds.size,
        variant,
    )?;
    let train_seconds = logged_train_seconds(&a.ckpt);
    let entry = |model: String, mode: String, workers: usize, amp: bool, evaluation: Evaluation| {
        ReportEntry {
            noise_level: noise.sigma,
            model,
            mode,
            workers,
            amp,
            evaluation,
            train_seconds: None,
            ts_percent: None,
        }
    };
    let mut entries = vec![
        entry(
            graph.config().arch.to_string(),
            meta.mode.clone(),
            meta.workers,
            meta.amp,
            model_eval,
        ),
        entry("noisy-input".into(), "-".into(), 0, false, noisy_eval),
    ];
    entries[0].train_seconds = train_seconds;
    let (csv, json) = emit_report(&entries, &a.out)?;
    println!("test images: {} (SSIM variant: {variant})", ds.len());
    println!("{:<14} | {:<16} | {:<18}", "model", "PSNR (dB)", "SSIM");
    for e in &entries {
        println!(
            "{:<14} | {:<16} | {:<18}",
            e.model,
            e.evaluation.psnr.format_cell(),
            e.evaluation.ssim.format_cell()
        );
        if !e.evaluation.psnr.excluded.is_empty() {
            println!(
                "  ({} images with infinite PSNR excluded)",
                e.evaluation.psnr.excluded.len()
            );
        }
    }
    println!("report: {} and {}", csv.display(), json.display());
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchFile {
    config: Vec<BenchConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchConfig {
    label: String,
    #[serde(default)]
    baseline: bool,
    #[serde(default)]
    train: TrainSection,
}

/// Total epoch wall time from the `train_log.jsonl` beside a checkpoint, if any.
fn logged_train_seconds(ckpt: &Path) -> Option<f64> {
    let log = fs::read_to_string(ckpt.parent()?.join("train_log.jsonl")).ok()?;
    log.lines()
        .map(|l| {
            serde_json::from_str::<EpochStats>(l)
                .ok()
                .map(|s| s.wall_seconds)
        })
        .sum()
}

pub fn bench(a: BenchArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let manifest = manifest_path(a.manifest, cfg)?;
    let text = fs::read_to_string(&a.configs)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", a.configs.display())))?;
    let file: BenchFile = toml::from_str(&text)
        .map_err(|e| Failure::usage(format!("{}: {e}", a.configs.display())))?;
    match file.config.iter().filter(|c| c.baseline).count() {
        1 => {}
        0 => {
            return Err(Failure::usage(
                "no configuration is flagged baseline = true",
            ))
        }
        _ => {
            return Err(Failure::usage(
                "more than one configuration is flagged baseline = true",
            ))
        }
    }
    let noise_seed = cfg.noise.seed.unwrap_or(0);
    let configs: Vec<(String, bool, TrainConfig)> = file
        .config
        .iter()
        .map(|c| {
            Ok((
                c.label.clone(),
                c.baseline,
                to_train_config(&merge(&cfg.train, &c.train), noise_seed)?,
            ))
        })
        .collect::<Result<_, Failure>>()?;
    noisy_manifest(&manifest)?;
    let mut entries = Vec::new();
    for (label, baseline, tc) in configs {
        let dir = a.out.join(slug(&label));
        println!(
            "running {label} ({} x{}, amp {})",
            tc.mode, tc.workers, tc.amp
        );
        let outcome = dist::train(&manifest, &tc, &dir)?;
        entries.push(TimingEntry {
            label,
            baseline,
            stats: outcome.stats,
        });
    }
    let report = time_report(&entries)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    let path = a.out.join("timing.json");
    let mut json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    print!("{}", report.to_table());
    Ok(())
}

fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn render(a: RenderArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let manifest = manifest_path(a.manifest, cfg)?;
    if a.ckpts.len() != 2 {
        return Err(Failure::usage(
            "--ckpts takes exactly two checkpoints: unet,unetpp",
        ));
    }
    let m = DatasetManifest::load(&manifest)?;
    if let Some(bad) = a.ids.iter().find(|id| m.record(id).is_none()) {
        return Err(Failure::usage(format!("unknown id {bad}")));
    }
    let ds = load_split(&m, &manifest, &a.ids)?;
    let mut models = Vec::new();
    for p in &a.ckpts {
        let ck = load_checkpoint::<f32>(p)?;
        models.push((ck.graph, ck.meta.amp));
    }
    let mut rows: Vec<GridRow> = Vec::new();
    for i in 0..ds.len() {
        let batch = ds.batch::<f32>(&[i]);
        let mut outs = Vec::new();
        for (g, amp) in &mut models {
            let y: Tensor<f32> = g.predict(&batch.noisy, *amp)?;
            outs.push(y.into_data());
        }
        let unetpp = outs.pop().expect("two models");
        let unet = outs.pop().expect("two models");
        rows.push([ds.noisy[i].clone(), unet, unetpp, ds.clean[i].clone()]);
    }
    let img = write_grid(&rows, ds.size, &a.out)?;
    println!(
        "wrote {}x{} grid to {}",
        img.width,
        img.height,
        a.out.display()
    );
    Ok(())
}
