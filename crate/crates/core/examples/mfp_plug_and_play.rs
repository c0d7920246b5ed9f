//! Bolts the mixed feature pyramid onto an arbitrary three-level pyramid and
//! checks that every level keeps its shape.
//!
//!     cargo run --example mfp_plug_and_play

use candle_core::{DType, Device, Tensor};
use swinv2dnet::multiscale::{MfpConfig, MixedFeaturePyramid, Pyramid};
use swinv2dnet::nn::{Ctx, ParamStore};

fn main() -> swinv2dnet::Result<()> {
    let store = ParamStore::new(DType::F32, 0);
    let mfp = MixedFeaturePyramid::new(
        &store.root().pp("mfp"),
        MfpConfig {
            channels: [32, 64, 128],
            sk_reduction: 4,
            cbam_reduction: 4,
            dropout: 0.1,
        },
    )?;
    println!("mfp parameters: {}", store.num_params());

    let levels = [(32, 64), (64, 32), (128, 16)]
        .iter()
        .map(|&(c, s)| Tensor::randn(0f32, 1.0, (1, c, s, s), &Device::Cpu))
        .collect::<candle_core::Result<Vec<_>>>()?;
    let pyramid = Pyramid::new(levels)?;
    for (k, ctx) in [("eval", Ctx::eval()), ("train", Ctx::train(7))] {
        let out = mfp.forward(&pyramid, &ctx)?;
        for (i, (a, b)) in pyramid.levels().iter().zip(out.levels()).enumerate() {
            let delta = (a - b)?.abs()?.mean_all()?.to_scalar::<f32>()?;
            println!("{k:>5} level {i}: {:?} -> {:?}, mean |change| {delta:.4}", a.dims(), b.dims());
        }
    }
    for i in 0..3 {
        println!(
            "level {i}: grounding from above: {}, multi-scale branches: {}",
            mfp.has_grounding(i),
            mfp.branch_count(i)
        );
    }
    Ok(())
}
