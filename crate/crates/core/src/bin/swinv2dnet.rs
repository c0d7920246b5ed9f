use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swinv2dnet::data::{
    colorize, read_mask, read_rgb, synth_dataset, tile_pair, write_rgb, BitemporalPair, DatasetLayout,
    SynthSpec, SPLITS,
};
use swinv2dnet::network::SwinV2DNet;
use swinv2dnet::nn::ParamStore;
use swinv2dnet::train::{
    curves, evaluate, predict, render, train, write_prediction, Checkpoint, RunConfig, TrainingLog,
    ENV_OUTPUT_DIR, ENV_SEED,
};
use swinv2dnet::{Error, Result};

#[derive(Parser)]
#[command(name = "swinv2dnet", version, about = "Bitemporal change detection")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train from a TOML run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Load data serially.
        #[arg(long)]
        deterministic: bool,
        /// Continue from a `last.safetensors` checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset split.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        split: String,
        /// Dataset root; defaults to the one named by `--config`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Run config whose model must match the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, env = ENV_OUTPUT_DIR)]
        out: Option<PathBuf>,
    },
    /// Predict the change map of one image pair.
    Predict {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        label: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, env = ENV_OUTPUT_DIR, default_value = ".")]
        out: PathBuf,
    },
    /// Cut every pair of a dataset into non-overlapping tiles.
    Tile {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        size: u32,
        #[arg(long, env = ENV_OUTPUT_DIR)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset from a TOML spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, env = ENV_OUTPUT_DIR)]
        out: PathBuf,
        #[arg(long, env = ENV_SEED)]
        seed: Option<u64>,
    },
    /// Colour a prediction against a label (TP white, TN black, FP green, FN red).
    Colorize {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        label: PathBuf,
        #[arg(long, default_value = "colorized.png")]
        out: PathBuf,
    },
    /// Render loss and F1 curves from a training log.
    Plot {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "curves.png")]
        out: PathBuf,
    },
}

fn load_model(ckpt: &Path, expect: Option<&RunConfig>) -> Result<(ParamStore, SwinV2DNet)> {
    let ck = Checkpoint::read(ckpt)?;
    if let Some(cfg) = expect {
        ck.ensure_model(&cfg.model)?;
    }
    let store = ParamStore::new(candle_core::DType::F32, 0);
    let model = SwinV2DNet::new(&store, ck.model.clone())?;
    ck.restore_model(&store)?;
    Ok((store, model))
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "pair".into(), |s| s.to_string_lossy().into_owned())
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Train {
            config,
            deterministic,
            resume,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.apply_env()?;
            cfg.deterministic |= deterministic;
            let summary = train(&cfg, resume.as_deref())?;
            println!("output_dir={}", summary.output_dir.display());
            println!("epochs={}", summary.log.records.len());
            println!("steps={}", summary.state.step);
            if let Some(f1) = summary.state.best_f1 {
                println!("best_val_f1={f1:.6}");
            }
        }
        Cmd::Eval {
            ckpt,
            split,
            data,
            config,
            threshold,
            out,
        } => {
            let run_cfg = config.as_deref().map(RunConfig::load).transpose()?;
            let data = match (data, &run_cfg) {
                (Some(d), _) => d,
                (None, Some(c)) => c.data.root.clone(),
                (None, None) => return Err(Error::config("eval needs --data or --config")),
            };
            let (store, model) = load_model(&ckpt, run_cfg.as_ref())?;
            let pairs = DatasetLayout::open(&data)?.load_split(&split, true)?;
            let report = evaluate(&model, &store, &pairs, threshold, 4)?;
            let text = report.to_text();
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let p = dir.join(format!("eval_{split}.txt"));
                std::fs::write(&p, &text).map_err(|e| Error::io(&p, e))?;
            }
            print!("{}", report.report.to_kv());
        }
        Cmd::Predict {
            ckpt,
            a,
            b,
            label,
            threshold,
            out,
        } => {
            let (store, model) = load_model(&ckpt, None)?;
            let label = label.as_deref().map(read_mask).transpose()?;
            let name = stem(&a);
            let pair = BitemporalPair::new(&name, read_rgb(&a)?, read_rgb(&b)?, label)?;
            let pred = predict(&model, &store, &pair, threshold)?;
            write_prediction(&pred, &out, &name)?;
            println!("changed_pixels={}", pred.mask.count_ones());
        }
        Cmd::Tile { input, size, out } => {
            let src = DatasetLayout::open(&input)?;
            let dst = DatasetLayout::create(&out)?;
            let mut names_of = std::collections::HashMap::new();
            let mut total = 0usize;
            for file in src.list_images()? {
                let tiles = tile_pair(&src.load_pair(&file)?, size)?;
                let names: Vec<String> = tiles.iter().map(|t| format!("{}.png", t.name)).collect();
                for t in &tiles {
                    dst.write_pair(t)?;
                }
                total += tiles.len();
                names_of.insert(file, names);
            }
            for split in SPLITS {
                if src.manifest_path(split).is_file() {
                    let tiled: Vec<String> = src
                        .manifest(split)?
                        .iter()
                        .flat_map(|f| names_of.get(f).cloned().unwrap_or_default())
                        .collect();
                    dst.write_manifest(split, &tiled)?;
                }
            }
            println!("tiles={total}");
        }
        Cmd::Synth { spec, out, seed } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| Error::io(&spec, e))?;
            let mut s: SynthSpec = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let layout = synth_dataset(&s, &out)?;
            println!("pairs={}", s.pairs);
            println!("root={}", layout.root().display());
        }
        Cmd::Colorize { pred, label, out } => {
            let img = colorize(&read_mask(&pred)?, &read_mask(&label)?)?;
            write_rgb(&img, &out)?;
        }
        Cmd::Plot { log, out } => {
            let log = TrainingLog::read(&log)?;
            write_rgb(&render(&curves(&log)), &out)?;
            println!("epochs={}", log.records.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.class());
            ExitCode::FAILURE
        }
    }
}
