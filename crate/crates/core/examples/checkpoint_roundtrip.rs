//! Trains a couple of steps, saves a checkpoint, resumes from it and checks
//! that the reloaded model reproduces the eval-mode change map bit for bit.
//!
//!     cargo run --release --example checkpoint_roundtrip

use candle_core::DType;
use swinv2dnet::data::{synth_pairs, Batch, SynthSpec};
use swinv2dnet::network::{ModelConfig, SwinV2DNet};
use swinv2dnet::nn::{Ctx, ParamStore};
use swinv2dnet::train::{Checkpoint, RunConfig, Trainer};

fn main() -> swinv2dnet::Result<()> {
    let dir = std::env::temp_dir().join("swinv2dnet-ckpt");
    let pairs = synth_pairs(&SynthSpec {
        pairs: 4,
        ..SynthSpec::default()
    })?;
    let cfg = RunConfig {
        epochs: 3,
        lr: 1e-3,
        model: ModelConfig::desk(),
        ..RunConfig::default()
    };

    let mut trainer = Trainer::new(cfg.clone())?;
    trainer.train_epoch(&pairs)?;
    let path = dir.join("last.safetensors");
    trainer.save(&path)?;
    let next = trainer.train_epoch(&pairs)?.loss;
    let mut resumed = Trainer::resume(cfg, &path)?;
    let again = resumed.train_epoch(&pairs)?.loss;
    println!("next-epoch loss: uninterrupted {next:.8}, resumed {again:.8}");

    let ck = Checkpoint::read(&path)?;
    let store = ParamStore::new(DType::F32, 99);
    let model = SwinV2DNet::new(&store, ck.model.clone())?;
    ck.restore_model(&store)?;
    let refs: Vec<_> = pairs.iter().collect();
    let batch = Batch::from_pairs(&refs, DType::F32, store.device())?;
    let saved = Trainer::resume(resumed.config().clone(), &path)?;
    let a = saved.model().forward(&batch.i1, &batch.i2, &Ctx::eval())?.cm;
    let b = model.forward(&batch.i1, &batch.i2, &Ctx::eval())?.cm;
    let same = a.flatten_all()?.to_vec1::<f32>()? == b.flatten_all()?.to_vec1::<f32>()?;
    println!("reloaded change map identical: {same}");
    println!("checkpoint at epoch {:?}", ck.run.map(|r| r.next_epoch));
    Ok(())
}
