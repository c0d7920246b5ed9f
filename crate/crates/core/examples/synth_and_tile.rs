//! Generates a synthetic dataset, cuts it into tiles and shows the dihedral
//! augmentations of one tile.
//!
//!     cargo run --example synth_and_tile -- [out_dir]

use std::path::PathBuf;

use swinv2dnet::data::{augment, change_ratio, synth_dataset, tile_pair, DatasetLayout, DihedralOp, SynthSpec};

fn main() -> swinv2dnet::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("swinv2dnet-synth"));
    let spec = SynthSpec {
        size: 128,
        pairs: 6,
        val_fraction: 1.0 / 3.0,
        ..SynthSpec::default()
    };
    let layout = synth_dataset(&spec, &root)?;
    let pairs = layout.load_split("train", false)?;
    println!(
        "{} pairs under {} ({} train), change ratio {:.4}",
        spec.pairs,
        root.display(),
        pairs.len(),
        change_ratio(&pairs)
    );

    let tiled = DatasetLayout::create(root.join("tiles"))?;
    let mut n = 0;
    for pair in &pairs {
        for t in tile_pair(pair, 64)? {
            tiled.write_pair(&t)?;
            n += 1;
        }
    }
    println!("{n} tiles of 64x64 in {}", tiled.root().display());

    let tile = &tile_pair(&pairs[0], 64)?[0];
    for op in DihedralOp::all() {
        let a = augment(tile, op);
        println!(
            "{:>12}: {:?}, changed pixels {}",
            op.to_string(),
            a.dimensions(),
            a.label.as_ref().map_or(0, |l| l.count_ones())
        );
    }
    Ok(())
}
