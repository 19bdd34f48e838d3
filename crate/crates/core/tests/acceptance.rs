//! Acceptance suite, built without the libtest harness so its report always
//! reaches the console. Runs every criterion in order so the timing
//! measurements do not compete with each other, prints one
//! `ACCEPTANCE [n] ...: PASS|FAIL` line per criterion, then exits non-zero if
//! any failed.

// `ensure!(a < b, ..)` negates the comparison on purpose so NaN fails.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::*;
use denoise_core::amp::{unscale_check_update, LossScalerState, StepOutcome};
use denoise_core::data::{
    base_dir, corrupt, corrupt_dataset, prepare_dataset, Dataset, DatasetManifest, ImageRecord,
    NoiseSpec, Source, SplitFractions,
};
use denoise_core::dist::{time_report, train_datasets, Hooks, TimingEntry, TrainOutcome};
use denoise_core::metrics::{
    evaluate_pairs, evaluate_testset, psnr, ssim, Evaluation, SsimVariant, SSIM_C1,
};
use denoise_core::model::Arch;
use denoise_core::nn::{Mode, BN_EPS};
use denoise_core::optim::AdamState;
use denoise_core::{load_checkpoint, train, ExecMode, Graph, ModelConfig, TrainConfig};
use rand::Rng;

// Tolerances and budgets.
const FD_H: f64 = 1e-6;
const FD_TOL: f64 = 1e-4;
const FD_BUDGET_S: f64 = 60.0;
const DDP_TOL: f64 = 1e-6;
const DDP_STEPS: usize = 20;
const DDP_BUDGET_S: f64 = 120.0;
const AMP_REL_TOL: f64 = 0.10;
const METRIC_REL_TOL: f64 = 1e-10;
const NOISE_SAMPLES: usize = 1_000_000;
const NOISE_STD_REL: f64 = 0.01;
const NOISY_PSNR: f64 = 16.99;
const NOISY_PSNR_TOL: f64 = 0.1;
const DESK_IMAGES: usize = 200;
const DESK_SIZE: usize = 64;
const DESK_EPOCHS: usize = 30;
const DESK_GAIN_DB: f64 = 3.0;
const DESK_BUDGET_S: f64 = 600.0;
const DDP_SPEEDUP: f64 = 0.8;
const TIMING_MIN_CORES: usize = 4;

type Outcome = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Desk-scale data shared by the AMP and end-to-end criteria. The F32 U-Net
/// run is trained once and reused.
struct Desk {
    _dir: tempfile::TempDir,
    manifest: PathBuf,
    root: PathBuf,
    unet_f32: Option<(TrainOutcome, f64)>,
}

impl Desk {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let manifest = root.join("data/manifest.json");
        prepare_dataset(
            &Source::Synthetic { count: DESK_IMAGES },
            DESK_SIZE,
            SplitFractions::default(),
            2024,
            &manifest,
        )
        .unwrap();
        corrupt_dataset(&manifest, &NoiseSpec::new(0.1, 0.1, 7)).unwrap();
        Desk {
            _dir: dir,
            manifest,
            root,
            unet_f32: None,
        }
    }

    fn cfg(arch: Arch, amp: bool) -> TrainConfig {
        TrainConfig {
            arch,
            base_ch: 8,
            depth: 4,
            deep_supervision: arch == Arch::Unetpp,
            epochs: DESK_EPOCHS,
            amp,
            ..TrainConfig::default()
        }
    }

    fn run(&self, arch: Arch, amp: bool) -> (TrainOutcome, f64) {
        let out_dir = self.root.join(format!("run_{arch}_{amp}"));
        let t = Instant::now();
        let out = train(&self.manifest, &Self::cfg(arch, amp), &out_dir).unwrap();
        (out, t.elapsed().as_secs_f64())
    }

    fn unet_f32(&mut self) -> &(TrainOutcome, f64) {
        if self.unet_f32.is_none() {
            self.unet_f32 = Some(self.run(Arch::Unet, false));
        }
        self.unet_f32.as_ref().unwrap()
    }

    fn test_set(&self) -> Dataset {
        let m = DatasetManifest::load(&self.manifest).unwrap();
        Dataset::load(&m, &base_dir(&self.manifest), &m.split.test).unwrap()
    }
}

fn noisy_baseline(ds: &Dataset) -> Evaluation {
    let to64 = |v: &Vec<f32>| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
    let noisy: Vec<Vec<f64>> = ds.noisy.iter().map(to64).collect();
    let clean: Vec<Vec<f64>> = ds.clean.iter().map(to64).collect();
    evaluate_pairs(&ds.ids, &noisy, &clean, ds.size, SsimVariant::Windowed).unwrap()
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let a = random_tensor(&[2, 3, 4, 4], 20, -1.0, 1.0);
    let b = random_tensor(&[2, 3, 4, 4], 21, -1.0, 1.0);
    let x = random_tensor(&[2, 2, 6, 6], 30, -1.0, 1.0);
    let w = random_tensor(&[3, 2, 3, 3], 31, -1.0, 1.0);
    let wt = random_tensor(&[2, 3, 2, 2], 34, -1.0, 1.0);
    let bias = random_tensor(&[3], 32, -1.0, 1.0);
    let xp = random_tensor(&[2, 3, 4, 6], 40, -1.0, 1.0);
    let gamma = random_tensor(&[3], 43, 0.5, 1.5);
    let beta = random_tensor(&[3], 44, -0.5, 0.5);

    let pair = vec![a, b];
    let cases: Vec<(&str, Vec<_>, Check)> = vec![
        (
            "add",
            pair.clone(),
            Box::new(|t, v| {
                let y = t.add(v[0], v[1])?;
                weighted_sum(t, y, 1)
            }),
        ),
        (
            "sub",
            pair.clone(),
            Box::new(|t, v| {
                let y = t.sub(v[0], v[1])?;
                weighted_sum(t, y, 2)
            }),
        ),
        (
            "mul",
            pair.clone(),
            Box::new(|t, v| {
                let y = t.mul(v[0], v[1])?;
                weighted_sum(t, y, 3)
            }),
        ),
        (
            "relu",
            pair.clone(),
            Box::new(|t, v| {
                let y = t.relu(v[0]);
                weighted_sum(t, y, 4)
            }),
        ),
        (
            "scale",
            pair.clone(),
            Box::new(|t, v| {
                let y = t.scale(v[0], -2.5);
                weighted_sum(t, y, 5)
            }),
        ),
        (
            "concat",
            pair.clone(),
            Box::new(|t, v| {
                let y = t.concat_channels(v[0], v[1])?;
                weighted_sum(t, y, 6)
            }),
        ),
        (
            "mean",
            pair.clone(),
            Box::new(|t, v| {
                let y = t.mul(v[0], v[1])?;
                t.reduce_mean(y)
            }),
        ),
        ("l1", pair, Box::new(|t, v| t.l1_loss(v[0], v[1]))),
        (
            "conv2d s1p1",
            vec![x.clone(), w.clone(), bias.clone()],
            Box::new(|t, v| {
                let y = t.conv2d(v[0], v[1], Some(v[2]), 1, 1)?;
                weighted_sum(t, y, 7)
            }),
        ),
        (
            "conv2d s2p1",
            vec![x.clone(), w.clone(), bias.clone()],
            Box::new(|t, v| {
                let y = t.conv2d(v[0], v[1], Some(v[2]), 2, 1)?;
                weighted_sum(t, y, 8)
            }),
        ),
        (
            "conv_transpose2d",
            vec![x, wt, bias],
            Box::new(|t, v| {
                let y = t.conv_transpose2d(v[0], v[1], Some(v[2]), 2, 0)?;
                weighted_sum(t, y, 9)
            }),
        ),
        (
            "maxpool2d",
            vec![xp.clone()],
            Box::new(|t, v| {
                let y = t.maxpool2d(v[0])?;
                weighted_sum(t, y, 10)
            }),
        ),
        (
            "upsample2x",
            vec![xp.clone()],
            Box::new(|t, v| {
                let y = t.upsample2x(v[0])?;
                weighted_sum(t, y, 11)
            }),
        ),
        (
            "batchnorm train",
            vec![xp.clone(), gamma.clone(), beta.clone()],
            Box::new(|t, v| {
                let (y, _, _) = t.batchnorm_train(v[0], v[1], v[2], BN_EPS)?;
                weighted_sum(t, y, 12)
            }),
        ),
        (
            "batchnorm eval",
            vec![xp, gamma, beta],
            Box::new(|t, v| {
                let y = t.batchnorm_eval(
                    v[0],
                    v[1],
                    v[2],
                    &[0.1, -0.2, 0.3],
                    &[0.5, 1.5, 2.0],
                    BN_EPS,
                )?;
                weighted_sum(t, y, 13)
            }),
        ),
    ];
    let mut worst = 0.0f64;
    for (name, inputs, f) in cases {
        let err = fd_max_rel_err(&inputs, f, FD_H);
        ensure!(err < FD_TOL, "{name}: max rel err {err:.3e}");
        worst = worst.max(err);
    }

    for arch in [Arch::Unet, Arch::Unetpp] {
        let g = Graph::<f64>::build(ModelConfig::new(arch, 2, 2, arch == Arch::Unetpp), 3).unwrap();
        let x = random_tensor(&[2, 1, 8, 8], 4, 0.0, 1.0);
        let target = random_tensor(&[2, 1, 8, 8], 5, 0.0, 1.0);
        for mode in [Mode::Eval, Mode::Train] {
            let mut inputs: Vec<_> = g.params().values().cloned().collect();
            inputs.push(x.clone());
            let err = fd_max_rel_err(
                &inputs,
                |tape, vars| {
                    let mut g = g.clone();
                    let (pv, xv) = vars.split_at(vars.len() - 1);
                    let outs = g.forward_with(tape, pv, xv[0], mode, false)?;
                    let t = tape.constant(target.clone());
                    Graph::training_loss(tape, &outs, t)
                },
                FD_H,
            );
            ensure!(err < FD_TOL, "{arch} {mode:?}: max rel err {err:.3e}");
            worst = worst.max(err);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure!(secs < FD_BUDGET_S, "took {secs:.1}s, budget {FD_BUDGET_S}s");
    Ok(format!("max rel err {worst:.2e} < {FD_TOL:e}, {secs:.1}s"))
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    // 2 ranks x batch 2 over 80 images is exactly DDP_STEPS steps per epoch.
    let ds = phantom_pairs(80, 16, 0.1, 11);
    let cfg = TrainConfig {
        base_ch: 2,
        depth: 2,
        epochs: 1,
        batch_per_worker: 2,
        mode: ExecMode::Ddp,
        workers: 2,
        freeze_norm: true,
        ..TrainConfig::default()
    };
    let hooks = Hooks {
        check_full_batch: true,
        record_steps: true,
        ..Hooks::default()
    };
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let out = train_datasets(&ds, &ds, "n10", &cfg, dir.path(), &hooks).unwrap();
        let bytes = fs::read(&out.best_checkpoint).unwrap();
        (out, bytes)
    };
    let (a, bytes_a) = run();
    let (b, bytes_b) = run();
    ensure!(
        a.steps.len() == DDP_STEPS,
        "{} steps, wanted {DDP_STEPS}",
        a.steps.len()
    );
    let worst = a
        .steps
        .iter()
        .map(|s| s.full_batch_rel_err.unwrap())
        .fold(0.0, f64::max);
    ensure!(
        worst < DDP_TOL,
        "averaged vs full-batch gradient rel err {worst:.3e}"
    );
    let da: Vec<u64> = a.steps.iter().map(|s| s.params_digest).collect();
    let db: Vec<u64> = b.steps.iter().map(|s| s.params_digest).collect();
    ensure!(da == db, "parameter trajectories differ between runs");
    ensure!(bytes_a == bytes_b, "checkpoints differ between runs");
    let secs = t.elapsed().as_secs_f64();
    ensure!(
        secs < DDP_BUDGET_S,
        "took {secs:.1}s, budget {DDP_BUDGET_S}s"
    );
    Ok(format!(
        "{DDP_STEPS} steps, max rel err {worst:.2e}, trajectories bitwise equal, {secs:.1}s"
    ))
}

fn criterion_3(desk: &mut Desk) -> Outcome {
    // (a) through the trainer's injection hook, and directly on the update.
    let ds = phantom_pairs(8, 16, 0.1, 12);
    let cfg = TrainConfig {
        base_ch: 2,
        depth: 2,
        epochs: 1,
        batch_per_worker: 2,
        amp: true,
        ..TrainConfig::default()
    };
    let hooks = Hooks {
        overflow_steps: vec![1],
        record_steps: true,
        ..Hooks::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let out = train_datasets(&ds, &ds, "n10", &cfg, dir.path(), &hooks).unwrap();
    ensure!(out.steps[1].skipped, "injected overflow was not skipped");
    ensure!(
        out.steps[1].params_digest == out.steps[0].params_digest,
        "skipped step changed parameters"
    );
    ensure!(
        out.steps[2].params_digest != out.steps[1].params_digest,
        "update after the skip did not apply"
    );

    let mut g = Graph::<f32>::build(ModelConfig::unet(2, 2), 1).unwrap();
    let mut adam = AdamState::new(&g, 1e-3);
    let mut sc = LossScalerState::default();
    let fill = |g: &mut Graph<f32>, poison: bool| {
        let mut grads: Vec<Vec<f32>> = g.params().values().map(|t| vec![0.5; t.len()]).collect();
        if poison {
            grads[0][0] = f32::INFINITY;
        }
        g.set_grads(grads).unwrap();
    };
    fill(&mut g, false);
    unscale_check_update(&mut g, &mut adam, &mut sc).unwrap();
    let (g0, a0) = (g.clone(), adam.clone());
    fill(&mut g, true);
    let r = unscale_check_update(&mut g, &mut adam, &mut sc).unwrap();
    ensure!(r == StepOutcome::Skipped, "overflowing update was applied");
    ensure!(
        g.params() == g0.params() && adam == a0,
        "skipped update touched parameters or optimizer state"
    );

    // (b) scripted schedule: 2^16, halve on overflow, double after 2000 clean steps.
    let mut sc = LossScalerState::default();
    ensure!(sc.scale == 65536.0, "initial scale {}", sc.scale);
    fill(&mut g, true);
    unscale_check_update(&mut g, &mut adam, &mut sc).unwrap();
    ensure!(sc.scale == 32768.0, "after overflow: {}", sc.scale);
    for i in 1..=2000 {
        fill(&mut g, false);
        unscale_check_update(&mut g, &mut adam, &mut sc).unwrap();
        let want = if i < 2000 { 32768.0 } else { 65536.0 };
        ensure!(
            sc.scale == want,
            "after {i} clean steps: {} (want {want})",
            sc.scale
        );
    }
    fill(&mut g, true);
    unscale_check_update(&mut g, &mut adam, &mut sc).unwrap();
    ensure!(
        sc.scale == 32768.0 && sc.good_step_streak == 0,
        "second overflow: {}",
        sc.scale
    );

    // (c) desk-scale AMP against F32.
    let f32_loss = desk.unet_f32().0.stats.last().unwrap().val_loss;
    let (amp_out, amp_secs) = desk.run(Arch::Unet, true);
    let amp_loss = amp_out.stats.last().unwrap().val_loss;
    let r = rel(amp_loss, f32_loss);
    ensure!(
        r <= AMP_REL_TOL,
        "final val loss amp {amp_loss:.5} vs f32 {f32_loss:.5}: rel {r:.3}"
    );
    Ok(format!(
        "skip bitwise, schedule exact, final val loss amp {amp_loss:.5} vs f32 {f32_loss:.5} (rel {r:.3}, amp run {amp_secs:.0}s)"
    ))
}

fn criterion_4() -> Outcome {
    let mut r = rng(404);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a: Vec<f64> = (0..256).map(|_| r.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..256).map(|_| r.gen_range(0.0..1.0)).collect();
        let pairs = [
            (psnr(&a, &b, 1.0).unwrap(), psnr_loop(&a, &b)),
            (
                ssim(&a, &b, 16, SsimVariant::Global).unwrap(),
                ssim_global_loop(&a, &b),
            ),
            (
                ssim(&a, &b, 16, SsimVariant::Windowed).unwrap(),
                ssim_windowed_loop(&a, &b, 16),
            ),
        ];
        for (got, want) in pairs {
            worst = worst.max(rel(got, want));
        }
    }
    ensure!(worst < METRIC_REL_TOL, "max rel err {worst:.3e}");

    let x: Vec<f64> = (0..256).map(|_| r.gen_range(0.0..0.9)).collect();
    let shifted: Vec<f64> = x.iter().map(|v| v + 0.1).collect();
    let p = psnr(&x, &shifted, 1.0).unwrap();
    ensure!(
        (p - 20.0).abs() < 1e-9 && format!("{p:.2}") == "20.00",
        "offset 0.1 gives {p} dB"
    );
    for v in [SsimVariant::Global, SsimVariant::Windowed] {
        let s = ssim(&x, &x, 16, v).unwrap();
        ensure!(s == 1.0, "ssim(x, x) = {s} ({v})");
    }
    let zeros = vec![0.0f64; 256];
    let ones = vec![1.0f64; 256];
    let s = ssim(&zeros, &ones, 16, SsimVariant::Global).unwrap();
    let closed = SSIM_C1 / (1.0 + SSIM_C1);
    ensure!(
        rel(s, closed) < 1e-12 && (s - 9.999e-5).abs() < 1e-8,
        "constant 0 vs 1: {s:.6e}"
    );
    Ok(format!(
        "100 pairs max rel err {worst:.2e}, 20.00 dB, ssim(x,x)=1, 0-vs-1 {s:.4e}"
    ))
}

fn criterion_5() -> Outcome {
    let side = (NOISE_SAMPLES as f64).sqrt() as usize;
    let clean = ImageRecord::new("flat", side, side, vec![0.5; side * side]);
    let mut details = Vec::new();
    for sigma in [0.1, 0.3] {
        let spec = NoiseSpec {
            clamp: false,
            ..NoiseSpec::new(0.1, sigma, 55)
        };
        let noisy = corrupt(&clean, &spec);
        let n: Vec<f64> = noisy.pixels.iter().map(|&v| v as f64 - 0.5).collect();
        let mean = n.iter().sum::<f64>() / n.len() as f64;
        let std = (n.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n.len() - 1) as f64).sqrt();
        ensure!(
            (mean - 0.1).abs() <= 4.0 * sigma / 1000.0,
            "sigma {sigma}: mean {mean}"
        );
        ensure!(rel(std, sigma) <= NOISE_STD_REL, "sigma {sigma}: std {std}");
        details.push(format!("sigma {sigma}: mean {mean:.5} std {std:.5}"));
    }
    let spec = NoiseSpec {
        clamp: false,
        ..NoiseSpec::new(0.1, 0.1, 56)
    };
    let noisy = corrupt(&clean, &spec);
    let p = psnr(&clean.pixels, &noisy.pixels, 1.0).unwrap();
    ensure!(
        (p - NOISY_PSNR).abs() <= NOISY_PSNR_TOL,
        "clean vs noisy PSNR {p:.3}"
    );
    Ok(format!("{}, clean-vs-noisy {p:.3} dB", details.join(", ")))
}

fn criterion_6(desk: &mut Desk) -> Outcome {
    let test = desk.test_set();
    let base = noisy_baseline(&test);
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for arch in [Arch::Unet, Arch::Unetpp] {
        let (ckpt, secs) = match arch {
            Arch::Unet => {
                let (o, s) = desk.unet_f32();
                (o.best_checkpoint.clone(), *s)
            }
            Arch::Unetpp => {
                let (o, s) = desk.run(arch, false);
                (o.best_checkpoint, s)
            }
        };
        let mut g = load_checkpoint::<f32>(&ckpt).unwrap().graph;
        let ev = evaluate_testset(&mut g, &test, false, SsimVariant::Windowed).unwrap();
        let gain = ev.psnr.mean - base.psnr.mean;
        let line = format!(
            "{arch} {:.2} dB vs noisy {:.2} (+{gain:.2}), SSIM {:.4} vs {:.4}, {secs:.0}s",
            ev.psnr.mean, base.psnr.mean, ev.ssim.mean, base.ssim.mean
        );
        if gain < DESK_GAIN_DB || ev.ssim.mean <= base.ssim.mean || secs >= DESK_BUDGET_S {
            failures.push(line.clone());
        }
        parts.push(line);
    }
    ensure!(failures.is_empty(), "{}", failures.join("; "));
    Ok(parts.join("; "))
}

fn criterion_7() -> Outcome {
    // Published times; U-Net and both DP rows must come out as printed.
    let published = [
        ("U-Net DP", 7328.0, 4665.0, "36.34"),
        ("U-Net DDP+AMP", 7328.0, 2737.0, "62.65"),
        ("U-Net++ DP", 22717.0, 12003.0, "47.16"),
    ];
    for (label, base, t, want) in published {
        let rep = time_report(&[
            TimingEntry::from_total("1 GPU", true, base),
            TimingEntry::from_total(label, false, t),
        ])
        .unwrap();
        let got = format!("{:.2}", rep.row(label).unwrap().ts_percent);
        ensure!(got == want, "{label}: TS {got}% vs published {want}%");
        let b = format!("{:.2}", rep.row("1 GPU").unwrap().ts_percent);
        ensure!(b == "0.00", "baseline row TS {b}%");
    }
    // The U-Net++ DDP+AMP row is printed as 64.69%, but 8025 / 22717 gives 64.67%.
    let pp = denoise_core::dist::ts_percent(8025.0, 22717.0);

    // Compute-bound local measurement.
    let ds = phantom_pairs(64, 64, 0.1, 77);
    let val = subset(&ds, 0..8);
    let cfg = TrainConfig {
        base_ch: 8,
        depth: 4,
        epochs: 1,
        batch_per_worker: 8,
        ..TrainConfig::default()
    };
    let ddp = TrainConfig {
        mode: ExecMode::Ddp,
        workers: 2,
        batch_per_worker: 4,
        ..cfg.clone()
    };
    let time = |cfg: &TrainConfig, label: &str, baseline: bool| {
        let dir = tempfile::tempdir().unwrap();
        let out = train_datasets(&ds, &val, "n10", cfg, dir.path(), &Hooks::default()).unwrap();
        TimingEntry {
            label: label.into(),
            baseline,
            stats: out.stats,
        }
    };
    let rep = time_report(&[time(&cfg, "single", true), time(&ddp, "ddp x2", false)]).unwrap();
    let single = rep.row("single").unwrap().total_seconds;
    let two = rep.row("ddp x2").unwrap().total_seconds;
    let ratio = two / single;
    let cores = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let measured = format!("ddp x2 {two:.2}s vs single {single:.2}s, ratio {ratio:.2}");
    let arithmetic = format!(
        "TS 36.34/62.65/47.16 reproduced, U-Net++ DDP+AMP computes {pp:.2}% (published 64.69%)"
    );
    if cores >= TIMING_MIN_CORES {
        ensure!(
            ratio <= DDP_SPEEDUP,
            "{measured} > {DDP_SPEEDUP} on {cores} cores"
        );
        Ok(format!("{arithmetic}; {measured} on {cores} cores"))
    } else {
        Ok(format!(
            "{arithmetic}; speedup clause needs >= {TIMING_MIN_CORES} cores, host has {cores}, not asserted ({measured})"
        ))
    }
}

/// Everything a pipeline run leaves behind that must be reproducible.
#[derive(PartialEq)]
struct PipelineArtifacts {
    manifest: Vec<u8>,
    noisy: Vec<(String, Vec<u8>)>,
    checkpoints: Vec<(String, Vec<u8>)>,
    per_image: Vec<(String, u64, u64)>,
}

fn files_in(dir: &Path, ext: &str) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn pipeline_once(root: &Path) -> PipelineArtifacts {
    let manifest = root.join("data/manifest.json");
    let fr = SplitFractions {
        train: 0.5,
        val: 0.25,
        test: 0.25,
    };
    prepare_dataset(&Source::Synthetic { count: 16 }, 32, fr, 9, &manifest).unwrap();
    let spec = NoiseSpec::new(0.1, 0.1, 10);
    corrupt_dataset(&manifest, &spec).unwrap();
    let cfg = TrainConfig {
        base_ch: 4,
        depth: 2,
        epochs: 3,
        batch_per_worker: 2,
        mode: ExecMode::Ddp,
        workers: 2,
        ..TrainConfig::default()
    };
    let out_dir = root.join("run");
    let out = train(&manifest, &cfg, &out_dir).unwrap();
    let m = DatasetManifest::load(&manifest).unwrap();
    let test = Dataset::load(&m, &base_dir(&manifest), &m.split.test).unwrap();
    let mut g = load_checkpoint::<f32>(&out.best_checkpoint).unwrap().graph;
    let ev = evaluate_testset(&mut g, &test, false, SsimVariant::Windowed).unwrap();
    let per_image = ev
        .psnr
        .per_image
        .iter()
        .zip(&ev.ssim.per_image)
        .map(|((id, p), (_, s))| (id.clone(), p.to_bits(), s.to_bits()))
        .collect();
    PipelineArtifacts {
        manifest: fs::read(&manifest).unwrap(),
        noisy: files_in(
            &root.join("data").join(format!("noisy_{}", spec.tag())),
            "png",
        ),
        checkpoints: files_in(&out_dir, "ckpt"),
        per_image,
    }
}

fn criterion_8() -> Outcome {
    let a_dir = tempfile::tempdir().unwrap();
    let b_dir = tempfile::tempdir().unwrap();
    let a = pipeline_once(a_dir.path());
    let b = pipeline_once(b_dir.path());
    ensure!(
        !a.noisy.is_empty() && !a.checkpoints.is_empty(),
        "pipeline produced no artifacts"
    );
    ensure!(a.manifest == b.manifest, "manifests differ");
    ensure!(a.noisy == b.noisy, "noisy images differ");
    ensure!(a.checkpoints == b.checkpoints, "checkpoints differ");
    ensure!(a.per_image == b.per_image, "per-image metrics differ");
    Ok(format!(
        "manifest, {} noisy images, {} checkpoints, {} per-image scores identical",
        a.noisy.len(),
        a.checkpoints.len(),
        a.per_image.len()
    ))
}

fn report(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match &r {
        Ok(d) => println!("ACCEPTANCE [{n}] {name}: PASS ({d})"),
        Err(d) => println!("ACCEPTANCE [{n}] {name}: FAIL ({d})"),
    }
    r.is_ok()
}

/// Honors the libtest arguments cargo forwards: `--list`, a name filter and
/// `--skip`, treating the whole suite as one test named `acceptance`.
fn selected() -> bool {
    let mut args = std::env::args().skip(1);
    let mut keep = true;
    while let Some(a) = args.next() {
        match a.as_str() {
            "--list" => {
                println!("acceptance: test");
                return false;
            }
            "--skip" => {
                if args
                    .next()
                    .is_some_and(|s| "acceptance".contains(s.as_str()))
                {
                    keep = false;
                }
            }
            flag if flag.starts_with('-') => {}
            filter => keep &= "acceptance".contains(filter),
        }
    }
    keep
}

fn main() {
    if !selected() {
        return;
    }
    let started = Instant::now();
    let mut desk = Desk::new();
    let results = [
        report(1, "gradient oracle", criterion_1),
        report(2, "data-parallel equivalence", criterion_2),
        report(3, "mixed-precision contract", || criterion_3(&mut desk)),
        report(4, "metric oracles", criterion_4),
        report(5, "noise statistics", criterion_5),
        report(6, "end-to-end denoising", || criterion_6(&mut desk)),
        report(7, "timing harness", criterion_7),
        report(8, "pipeline determinism", criterion_8),
    ];
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| i + 1)
        .collect();
    println!(
        "acceptance: {} passed, {} failed in {:.1}s",
        results.len() - failed.len(),
        failed.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        eprintln!("acceptance criteria failed: {failed:?}");
        std::process::exit(1);
    }
}
