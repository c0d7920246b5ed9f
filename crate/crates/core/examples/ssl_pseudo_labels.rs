//! Pseudo-label consistency between the two CNN branch maps: unchanged pixels
//! pull the maps together, changed pixels push them apart.
//!
//!     cargo run --example ssl_pseudo_labels

use candle_core::{Device, Tensor};
use swinv2dnet::branch::{pseudo_label, ssl_losses, CnnBranch};
use swinv2dnet::nn::{Ctx, ParamStore};

fn map(v: &[f64]) -> candle_core::Result<Tensor> {
    Tensor::from_slice(v, (1, 1, 2, 2), &Device::Cpu)
}

fn main() -> swinv2dnet::Result<()> {
    let label = map(&[0.0, 0.0, 1.0, 1.0])?;
    let pm1 = map(&[0.9, 0.2, 0.8, 0.1])?;
    println!("pseudo-label of pm1: {:?}", pseudo_label(&pm1)?.flatten_all()?.to_vec1::<f64>()?);

    let cases = [
        ("consistent", [0.9, 0.2, 0.2, 0.9]),
        ("copy of pm1", [0.9, 0.2, 0.8, 0.1]),
        ("inverted", [0.1, 0.8, 0.2, 0.9]),
    ];
    for (name, pm2) in cases {
        let (l1, l2) = ssl_losses(&pm1, &map(&pm2)?, &label, 1e-7)?;
        println!(
            "{name:>12}: ssl1 {:.4} ssl2 {:.4}",
            l1.to_scalar::<f64>()?,
            l2.to_scalar::<f64>()?
        );
    }

    // The same losses on maps produced by a freshly built branch.
    let store = ParamStore::new(candle_core::DType::F32, 3);
    let branch = CnnBranch::new(&store.root().pp("branch"), 3, [8, 8, 16, 16, 32])?;
    let img = |s: f64| Tensor::rand(0f32, 1.0, (1, 3, 64, 64), &Device::Cpu).and_then(|t| t * s);
    let out = branch.forward(&img(1.0)?, &img(0.5)?, &Ctx::eval())?;
    let y = Tensor::zeros((1, 1, 64, 64), candle_core::DType::F32, &Device::Cpu)?;
    let (l1, l2) = ssl_losses(&out.pm1, &out.pm2, &y, 1e-7)?;
    println!(
        "branch maps {:?}: ssl1 {:.4} ssl2 {:.4}",
        out.pm1.dims(),
        l1.to_scalar::<f32>()?,
        l2.to_scalar::<f32>()?
    );
    Ok(())
}
