//! One forward pass of the full network, listing every grid node with its
//! feature shape.
//!
//!     cargo run --release --example network_forward -- [side]

use candle_core::{DType, Device, Tensor};
use swinv2dnet::network::{ModelConfig, SwinV2DNet};
use swinv2dnet::nn::{Ctx, ParamStore};

fn main() -> swinv2dnet::Result<()> {
    let side: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let store = ParamStore::new(DType::F32, 0);
    let model = SwinV2DNet::new(&store, ModelConfig::desk())?;
    println!("desk preset: {} parameters", store.num_params());

    let img = || Tensor::rand(0f32, 1.0, (1, 3, side, side), &Device::Cpu);
    let (out, state) = model.forward_with_state(&img()?, &img()?, &Ctx::eval())?;
    for (k, s) in state.s_prime.iter().enumerate() {
        println!("S'({},0) {:?}", k + 1, s.dims());
    }
    for (g, s) in &state.s {
        println!("S{g} {:?}", s.dims());
    }
    for (g, f) in &state.ff {
        println!("FF{g} {:?} read {}x", f.dims(), state.ff_reads[g]);
    }
    for (j, c) in state.c.iter().enumerate() {
        println!("C(0,{j}) {:?}", c.dims());
    }
    println!("change map {:?}, {} deep-supervision maps", out.cm.dims(), out.ds.len());
    let t = model.topology();
    println!("{} S nodes, {} FF nodes, {} C nodes", t.s_nodes.len(), t.ff_nodes.len(), t.c_nodes.len());
    Ok(())
}
