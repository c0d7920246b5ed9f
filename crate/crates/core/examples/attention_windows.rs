//! Window partitioning, cyclic shift masks and one shifted Swin V2 block on an
//! 8x8 token grid.
//!
//!     cargo run --example attention_windows

use candle_core::{DType, Device, Tensor};
use swinv2dnet::attention::{
    log_spaced_coords, shifted_window_mask, window_partition, window_reverse, BlockConfig, SwinV2Block, TokenGrid,
};
use swinv2dnet::nn::ParamStore;

fn main() -> swinv2dnet::Result<()> {
    let dev = Device::Cpu;
    let x = Tensor::arange(0f32, 64.0, &dev)?.reshape((1, 8, 8, 1))?;
    let windows = window_partition(&x, 4)?;
    println!("partition [1, 8, 8, 1] by 4 -> {:?}", windows.dims());
    let first: Vec<f32> = windows.get(0)?.flatten_all()?.to_vec1()?;
    println!("first window: {first:?}");
    let back = window_reverse(&windows, 4, 8, 8)?;
    println!("roundtrip exact: {}", back.eq(&x)?.min_all()?.to_scalar::<u8>()? == 1);

    // Token pairs that wrapped around during the shift cannot attend.
    let mask = shifted_window_mask(8, 8, 4, 2, &dev)?;
    let blocked: Vec<f32> = mask.lt(-1.0)?.to_dtype(DType::F32)?.sum((1, 2))?.to_vec1()?;
    println!("masked pairs per window: {blocked:?}");

    for (dx, dy) in [(0, 0), (1, -1), (3, 2)] {
        let (a, b) = log_spaced_coords(dx, dy);
        println!("offset ({dx:>2},{dy:>2}) -> ({a:.4}, {b:.4})");
    }

    let store = ParamStore::new(DType::F32, 0);
    let block = SwinV2Block::new(
        &store.root().pp("block"),
        BlockConfig {
            dim: 16,
            heads: 2,
            window: 4,
            shifted: true,
            cpb_hidden: 64,
            mlp_ratio: 4,
        },
    )?;
    let tokens = TokenGrid::new(Tensor::randn(0f32, 1.0, (2, 64, 16), &dev)?, 8, 8)?;
    let out = block.forward(&tokens)?;
    println!(
        "shifted block: {:?} -> {:?}, {} parameters",
        tokens.data.dims(),
        out.data.dims(),
        store.num_params()
    );
    Ok(())
}
