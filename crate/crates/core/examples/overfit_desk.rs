//! Overfits the desk preset on 8 synthetic 64x64 pairs and reports training
//! F1 in eval mode.
//!
//!     cargo run --release --example overfit_desk -- [steps] [mfp on|off] [branch mode] [lr]

use std::time::Instant;

use swinv2dnet::data::{synth_pairs, SynthSpec};
use swinv2dnet::network::{BranchMode, ModelConfig};
use swinv2dnet::train::{RunConfig, Schedule, Trainer};

fn main() -> swinv2dnet::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let steps: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(300);
    let mfp = args.get(1).is_none_or(|s| s != "off");
    let mode: BranchMode = match args.get(2) {
        Some(s) => s.parse()?,
        None => BranchMode::SelfSupervised,
    };
    let lr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(5e-5);

    let pairs = synth_pairs(&SynthSpec {
        seed: 0,
        size: 64,
        pairs: 8,
        ..SynthSpec::default()
    })?;
    let mut model = ModelConfig::desk();
    model.mfp_enabled = mfp;
    model.branch_mode = mode;
    let cfg = RunConfig {
        lr,
        schedule: Schedule::Constant,
        batch_size: 4,
        epochs: steps.div_ceil(2),
        max_steps: Some(steps),
        model,
        data: swinv2dnet::train::DataConfig {
            augment: Vec::new(),
            ..Default::default()
        },
        ..RunConfig::default()
    };

    let mut trainer = Trainer::new(cfg)?;
    println!("parameters: {}", trainer.store().num_params());
    let start = Instant::now();
    while trainer.state().step < steps {
        let rec = trainer.train_epoch(&pairs)?;
        if rec.epoch % 10 == 0 {
            let f1 = trainer.evaluate(&pairs)?.report.f1;
            println!(
                "epoch {:>3} step {:>3} loss {:.5} (cm bce {:.4} dice {:.4}) train f1 {f1:.4} ({:.0}s)",
                rec.epoch,
                trainer.state().step,
                rec.loss,
                rec.terms.get("cm.bce").copied().unwrap_or(f64::NAN),
                rec.terms.get("cm.dice").copied().unwrap_or(f64::NAN),
                start.elapsed().as_secs_f64()
            );
        }
    }
    let report = trainer.evaluate(&pairs)?.report;
    println!(
        "final: steps {} f1 {:.4} iou {:.4} oa {:.4} in {:.0}s",
        trainer.state().step,
        report.f1,
        report.iou,
        report.oa,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
