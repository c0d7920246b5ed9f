mod common;

use std::path::Path;
use std::process::Command;

use candle_core::{DType, Device, Tensor};
use swinv2dnet::data::{synth_dataset, synth_pairs, BitemporalPair, SynthSpec};
use swinv2dnet::network::{ModelConfig, SwinV2DNet};
use swinv2dnet::nn::{Ctx, ParamStore};
use swinv2dnet::train::{
    curves, evaluate, lr_schedule, predict, render, save_checkpoint, train, Checkpoint, DataConfig,
    EpochRecord, RunConfig, Schedule, Trainer, TrainingLog, ValRecord, ENV_OUTPUT_DIR, ENV_SEED,
};
use swinv2dnet::Error;

const CONFIGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");

fn tiny_model() -> ModelConfig {
    ModelConfig {
        embed_dims: [8, 16, 32, 64],
        heads: [1, 2, 4, 8],
        stem_width: 8,
        vgg_widths: [8, 8, 8, 16, 16],
        cpb_hidden: 16,
        mlp_ratio: 2,
        cbam_reduction: 4,
        sk_reduction: 4,
        ..ModelConfig::desk()
    }
}

fn tiny_run(epochs: usize) -> RunConfig {
    RunConfig {
        epochs,
        batch_size: 2,
        lr: 1e-3,
        model: tiny_model(),
        data: DataConfig {
            augment: swinv2dnet::data::DihedralOp::all().to_vec(),
            ..DataConfig::default()
        },
        ..RunConfig::default()
    }
}

fn tiny_pairs(n: usize) -> Vec<BitemporalPair> {
    synth_pairs(&SynthSpec {
        size: 32,
        pairs: n,
        ..SynthSpec::default()
    })
    .unwrap()
}

#[test]
fn linear_schedule_values_and_sum() {
    let mut cfg = RunConfig {
        lr: 5e-5,
        epochs: 200,
        ..RunConfig::default()
    };
    assert_eq!(lr_schedule(0, &cfg).unwrap(), 5e-5);
    assert!((lr_schedule(100, &cfg).unwrap() - 2.5e-5).abs() < 1e-18);
    assert!((lr_schedule(199, &cfg).unwrap() - 5e-5 / 200.0).abs() < 1e-18);
    assert!(matches!(lr_schedule(200, &cfg), Err(Error::Schedule { epoch: 200, epochs: 200 })));
    for e in [1, 2, 7, 200] {
        cfg.epochs = e;
        let sum: f64 = (0..e).map(|k| lr_schedule(k, &cfg).unwrap()).sum();
        let closed = cfg.lr * (e as f64 - (e as f64 - 1.0) / 2.0);
        assert!((sum - closed).abs() < 1e-15, "E={e}: {sum} vs {closed}");
    }
    cfg.schedule = Schedule::Constant;
    assert_eq!(lr_schedule(cfg.epochs - 1, &cfg).unwrap(), cfg.lr);
}

#[test]
fn shipped_configs_parse() {
    let desk = RunConfig::load(&Path::new(CONFIGS).join("desk.toml")).unwrap();
    assert_eq!(desk.model, ModelConfig::desk());
    desk.validate().unwrap();
    assert!(desk.data.root.is_absolute());
    let full = RunConfig::load(&Path::new(CONFIGS).join("full.toml")).unwrap();
    assert_eq!(full.model, ModelConfig::full());
    assert_eq!(full.lr, 5e-5);
    assert_eq!(full.epochs, 200);
    assert_eq!(full.batch_size, 4);
    full.validate().unwrap();
    let text = std::fs::read_to_string(Path::new(CONFIGS).join("synth.toml")).unwrap();
    let spec: SynthSpec = toml::from_str(&text).unwrap();
    spec.validate().unwrap();
}

#[test]
fn config_roundtrip_and_rejection() {
    let cfg = tiny_run(3);
    assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    assert!(matches!(RunConfig::from_toml("lr = 1e-3\nbogus = 1\n"), Err(Error::Parse(_))));
    let bad = RunConfig {
        lr: -1.0,
        ..RunConfig::default()
    };
    assert!(matches!(bad.validate(), Err(Error::Config(_))));
    let mut heads = RunConfig::default();
    heads.model.heads[0] = 3;
    assert!(matches!(heads.validate(), Err(Error::Config(_))));
}

#[test]
fn checkpoint_roundtrip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.safetensors");
    let store = ParamStore::new(DType::F32, 3);
    let model = SwinV2DNet::new(&store, tiny_model()).unwrap();
    // Move the batch-norm statistics off their initial values first.
    let x = common::randn(&[2, 3, 32, 32], 1).to_dtype(DType::F32).unwrap();
    let y = common::randn(&[2, 3, 32, 32], 2).to_dtype(DType::F32).unwrap();
    model.forward(&x, &y, &Ctx::train(0)).unwrap();
    let before = model.forward(&x, &y, &Ctx::eval()).unwrap().cm;
    save_checkpoint(&path, &store, model.config(), None, None).unwrap();

    let ck = Checkpoint::read(&path).unwrap();
    assert_eq!(ck.model, tiny_model());
    let fresh = ParamStore::new(DType::F32, 99);
    let reloaded = SwinV2DNet::new(&fresh, ck.model.clone()).unwrap();
    ck.restore_model(&fresh).unwrap();
    let after = reloaded.forward(&x, &y, &Ctx::eval()).unwrap().cm;
    let a: Vec<f32> = before.flatten_all().unwrap().to_vec1().unwrap();
    let b: Vec<f32> = after.flatten_all().unwrap().to_vec1().unwrap();
    assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
}

#[test]
fn checkpoint_mismatches_are_version_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.safetensors");
    let store = ParamStore::new(DType::F32, 3);
    let model = SwinV2DNet::new(&store, tiny_model()).unwrap();
    save_checkpoint(&path, &store, model.config(), None, None).unwrap();
    let ck = Checkpoint::read(&path).unwrap();
    assert!(matches!(ck.ensure_model(&ModelConfig::desk()), Err(Error::Version(_))));
    assert!(!ck.has_optimizer());

    let other = ParamStore::new(DType::F32, 3);
    SwinV2DNet::new(&other, ModelConfig::desk()).unwrap();
    assert!(matches!(ck.restore_model(&other), Err(Error::Version(_))));

    let plain = dir.path().join("plain.safetensors");
    let t = Tensor::zeros(3, DType::F32, &Device::Cpu).unwrap();
    candle_core::safetensors::save(&[("w", t)].into_iter().collect(), &plain).unwrap();
    assert!(matches!(Checkpoint::read(&plain), Err(Error::Version(_))));
    assert!(matches!(
        Trainer::resume(tiny_run(2), &path),
        Err(Error::Version(_))
    ));
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = tiny_pairs(4);
    let cfg = tiny_run(3);

    let mut straight = Trainer::new(cfg.clone()).unwrap();
    straight.train_epoch(&pairs).unwrap();
    let next = straight.train_epoch(&pairs).unwrap();

    let mut first = Trainer::new(cfg.clone()).unwrap();
    first.train_epoch(&pairs).unwrap();
    let path = dir.path().join("last.safetensors");
    first.save(&path).unwrap();
    drop(first);
    let mut resumed = Trainer::resume(cfg, &path).unwrap();
    assert_eq!(resumed.state().next_epoch, 1);
    assert_eq!(resumed.state().step, 2);
    let again = resumed.train_epoch(&pairs).unwrap();
    assert!((next.loss - again.loss).abs() < 1e-6, "{} vs {}", next.loss, again.loss);
    for (k, v) in &next.terms {
        assert!((v - again.terms[k]).abs() < 1e-6, "{k}");
    }
}

#[test]
fn one_epoch_smoke_run_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_dataset(
        &SynthSpec {
            size: 32,
            pairs: 4,
            val_fraction: 0.5,
            ..SynthSpec::default()
        },
        &data,
    )
    .unwrap();
    let mut cfg = tiny_run(1);
    cfg.data.root = data;
    cfg.output_dir = dir.path().join("run");
    cfg.deterministic = true;
    let summary = train(&cfg, None).unwrap();
    assert_eq!(summary.log.records.len(), 1);
    assert_eq!(summary.state.step, 1);
    let rec = &summary.log.records[0];
    assert!(rec.loss.is_finite());
    assert!(rec.val.is_some());
    for f in ["config.toml", "log.jsonl", "last.safetensors", "best.safetensors"] {
        assert!(cfg.output_dir.join(f).is_file(), "{f}");
    }
    let replay = TrainingLog::read(&cfg.output_dir.join("log.jsonl")).unwrap();
    assert_eq!(replay.records, summary.log.records);
    let written = RunConfig::load(&cfg.output_dir.join("config.toml")).unwrap();
    assert_eq!(written.model, cfg.model);
}

#[test]
fn missing_dataset_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_run(1);
    cfg.data.root = dir.path().join("absent");
    cfg.output_dir = dir.path().join("run");
    assert!(matches!(train(&cfg, None), Err(Error::Io { .. })));
    assert!(!cfg.output_dir.exists());
}

#[test]
fn empty_split_is_an_error() {
    let store = ParamStore::new(DType::F32, 0);
    let model = SwinV2DNet::new(&store, tiny_model()).unwrap();
    assert!(matches!(evaluate(&model, &store, &[], 0.5, 4), Err(Error::Validation(_))));
}

#[test]
fn evaluation_aggregates_per_image_counts() {
    let store = ParamStore::new(DType::F32, 0);
    let model = SwinV2DNet::new(&store, tiny_model()).unwrap();
    let pairs = tiny_pairs(3);
    let rep = evaluate(&model, &store, &pairs, 0.5, 2).unwrap();
    assert_eq!(rep.images.len(), 3);
    let sum = rep.images.iter().map(|i| i.counts).sum();
    assert_eq!(rep.counts, sum);
    assert_eq!(rep.counts.total(), 3 * 32 * 32);
}

#[test]
fn predict_is_deterministic_and_rejects_odd_sizes() {
    let store = ParamStore::new(DType::F32, 0);
    let model = SwinV2DNet::new(&store, tiny_model()).unwrap();
    let pair = tiny_pairs(1).remove(0);
    let a = predict(&model, &store, &pair, 0.5).unwrap();
    let b = predict(&model, &store, &pair, 0.5).unwrap();
    assert_eq!(a.probability, b.probability);
    assert_eq!(a.mask, b.mask);
    assert!(a.colored.is_some());
    let bits: Vec<u8> = a.probability_raw.iter().map(|p| (*p >= 0.5) as u8).collect();
    assert_eq!(a.mask.data(), bits.as_slice());

    let odd = synth_pairs(&SynthSpec {
        size: 48,
        pairs: 1,
        ..SynthSpec::default()
    })
    .unwrap()
    .remove(0);
    match predict(&model, &store, &odd, 0.5) {
        Err(Error::Dimension(m)) => assert!(m.contains("tile"), "{m}"),
        _ => panic!("expected a dimension error"),
    }
}

#[test]
fn log_replay_reconstructs_curves() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let mut live = TrainingLog::at(&path).unwrap();
    for e in 0..6 {
        live.push(EpochRecord {
            epoch: e,
            lr: 1e-3 / (e + 1) as f64,
            steps: 2,
            loss: 1.0 / (e as f64 + 1.3),
            terms: [("cm.bce".to_string(), 0.1 * e as f64 + 1.0 / 3.0)].into_iter().collect(),
            val: (e % 2 == 1).then(|| ValRecord {
                f1: 0.1 * e as f64 + 1e-9,
                iou: 0.2,
                oa: 0.9,
            }),
        })
        .unwrap();
    }
    let replay = TrainingLog::read(&path).unwrap();
    assert_eq!(replay.records, live.records);
    assert_eq!(curves(&replay), curves(&live));
    assert_eq!(render(&curves(&replay)), render(&curves(&live)));
    assert_eq!(curves(&replay).f1.len(), 3);
    let stale = EpochRecord {
        epoch: 2,
        ..live.records[0].clone()
    };
    assert!(matches!(live.push(stale), Err(Error::Validation(_))));
}

fn cli(args: &[&str], envs: &[(&str, &Path)]) -> std::process::Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_swinv2dnet"));
    c.args(args).env_remove(ENV_OUTPUT_DIR).env_remove(ENV_SEED).env("RUST_LOG", "off");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

#[test]
fn cli_reports_one_error_line_and_fails() {
    let out = cli(&["colorize", "--pred", "/nonexistent/p.png", "--label", "/nonexistent/l.png"], &[]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with("error[io]: "), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "lr = \"fast\"\n").unwrap();
    let out = cli(&["train", "--config", bad.to_str().unwrap()], &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error[parse]: "));
}

#[test]
fn cli_synth_honours_env_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, "size = 32\npairs = 2\n").unwrap();
    let out_dir = dir.path().join("from_env");
    let mut c = Command::new(env!("CARGO_BIN_EXE_swinv2dnet"));
    let out = c
        .args(["synth", "--spec", spec.to_str().unwrap()])
        .env(ENV_OUTPUT_DIR, &out_dir)
        .env(ENV_SEED, "5")
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let layout = swinv2dnet::data::DatasetLayout::open(&out_dir).unwrap();
    let pair = layout.load_pair("synth_00000.png").unwrap();
    let direct = swinv2dnet::data::synth_pair(
        &SynthSpec {
            size: 32,
            pairs: 2,
            seed: 5,
            ..SynthSpec::default()
        },
        0,
    )
    .unwrap();
    assert_eq!(pair.a, direct.a);
    assert_eq!(pair.label, direct.label);
}

#[test]
fn cli_tile_colorize_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    synth_dataset(
        &SynthSpec {
            size: 64,
            pairs: 2,
            ..SynthSpec::default()
        },
        &src,
    )
    .unwrap();
    let tiled = dir.path().join("tiled");
    let out = cli(&["tile", "--in", src.to_str().unwrap(), "--size", "32", "--out", tiled.to_str().unwrap()], &[]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "tiles=8");
    let layout = swinv2dnet::data::DatasetLayout::open(&tiled).unwrap();
    assert_eq!(layout.list_images().unwrap().len(), 8);
    assert_eq!(layout.manifest("train").unwrap().len(), 8);

    let label = tiled.join("label/synth_00000_r0_c0.png");
    let png = dir.path().join("c.png");
    let out = cli(
        &["colorize", "--pred", label.to_str().unwrap(), "--label", label.to_str().unwrap(), "--out", png.to_str().unwrap()],
        &[],
    );
    assert!(out.status.success());
    let img = image::open(&png).unwrap().to_rgb8();
    assert!(img.pixels().all(|p| p.0 == [255, 255, 255] || p.0 == [0, 0, 0]));

    let log = dir.path().join("log.jsonl");
    let mut l = TrainingLog::at(&log).unwrap();
    l.push(EpochRecord {
        epoch: 0,
        lr: 1e-3,
        steps: 1,
        loss: 0.5,
        terms: Default::default(),
        val: None,
    })
    .unwrap();
    let plot = dir.path().join("curves.png");
    let out = cli(&["plot", "--log", log.to_str().unwrap(), "--out", plot.to_str().unwrap()], &[]);
    assert!(out.status.success());
    assert!(plot.is_file());
}
