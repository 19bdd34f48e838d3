mod common;

use std::fs;

use common::*;
use denoise_core::data::{corrupt_dataset, prepare_dataset, NoiseSpec, Source, SplitFractions};
use denoise_core::dist::{train_datasets, Hooks};
use denoise_core::{load_checkpoint, train, Error, ExecMode, TrainConfig};

fn small_cfg() -> TrainConfig {
    TrainConfig {
        base_ch: 2,
        depth: 2,
        epochs: 1,
        batch_per_worker: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn ddp_mean_gradient_equals_full_batch_gradient() {
    // 80 images, 2 ranks of batch 2: 20 steps in one epoch.
    let ds = phantom_pairs(80, 16, 0.1, 11);
    let cfg = TrainConfig {
        mode: ExecMode::Ddp,
        workers: 2,
        freeze_norm: true,
        ..small_cfg()
    };
    let hooks = Hooks {
        check_full_batch: true,
        record_steps: true,
        ..Hooks::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let out = train_datasets(&ds, &ds, "n10", &cfg, dir.path(), &hooks).unwrap();
    assert_eq!(out.steps.len(), 20);
    for s in &out.steps {
        let err = s.full_batch_rel_err.unwrap();
        assert!(err < 1e-6, "step {}: {err}", s.step);
    }
}

#[test]
fn ddp_runs_are_bitwise_reproducible() {
    let ds = phantom_pairs(16, 16, 0.1, 12);
    let cfg = TrainConfig {
        mode: ExecMode::Ddp,
        workers: 2,
        epochs: 2,
        ..small_cfg()
    };
    let hooks = Hooks {
        record_steps: true,
        ..Hooks::default()
    };
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let out = train_datasets(&ds, &ds, "n10", &cfg, dir.path(), &hooks).unwrap();
        let bytes = fs::read(&out.best_checkpoint).unwrap();
        (
            out.steps
                .iter()
                .map(|s| s.params_digest)
                .collect::<Vec<_>>(),
            bytes,
            out.graph,
        )
    };
    let (da, ba, ga) = run();
    let (db, bb, gb) = run();
    assert_eq!(da, db);
    assert_eq!(ba, bb);
    assert_eq!(ga, gb);
}

#[test]
fn best_checkpoint_holds_the_minimum_val_loss() {
    let ds = phantom_pairs(8, 16, 0.1, 13);
    let val = subset(&ds, 0..4);
    let cfg = TrainConfig {
        epochs: 4,
        ..small_cfg()
    };
    let dir = tempfile::tempdir().unwrap();
    let out = train_datasets(&ds, &val, "n10", &cfg, dir.path(), &Hooks::default()).unwrap();
    let min = out
        .stats
        .iter()
        .map(|s| s.val_loss)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(out.best_val_loss, min);
    let ck = load_checkpoint::<f32>(&out.best_checkpoint).unwrap();
    assert_eq!(ck.meta.val_loss, min);
    assert_eq!(ck.meta.mode, "single");
    let best_epoch = out.stats.iter().find(|s| s.val_loss == min).unwrap().epoch;
    assert_eq!(ck.meta.epoch, best_epoch);
    let log = fs::read_to_string(dir.path().join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 4);
}

#[test]
fn empty_splits_are_rejected() {
    let ds = phantom_pairs(4, 16, 0.1, 14);
    let empty = subset(&ds, 0..0);
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_cfg();
    assert!(matches!(
        train_datasets(&empty, &ds, "n10", &cfg, dir.path(), &Hooks::default()),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        train_datasets(&ds, &empty, "n10", &cfg, dir.path(), &Hooks::default()),
        Err(Error::Domain(_))
    ));
}

#[test]
fn train_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("data/manifest.json");
    let fr = SplitFractions {
        train: 0.5,
        val: 0.25,
        test: 0.25,
    };
    prepare_dataset(&Source::Synthetic { count: 8 }, 16, fr, 5, &manifest).unwrap();
    let out_dir = dir.path().join("run");
    assert!(
        train(&manifest, &small_cfg(), &out_dir).is_err(),
        "noise not applied yet"
    );
    corrupt_dataset(&manifest, &NoiseSpec::new(0.1, 0.1, 6)).unwrap();
    let out = train(&manifest, &small_cfg(), &out_dir).unwrap();
    assert_eq!(out.stats.len(), 1);
    assert!(out.best_checkpoint.exists());
    assert!(out_dir.join("unet_single_n10_1.ckpt").exists());
}
