//! Scores a noisy prediction against a synthetic label and writes the
//! colour-coded error map (TP white, TN black, FP green, FN red).
//!
//!     cargo run --example metrics_colorize -- [out.png]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swinv2dnet::data::{colorize, synth_pair, write_rgb, BinaryMask, SynthSpec};
use swinv2dnet::metrics::{metrics, ConfusionCounts};

fn main() -> swinv2dnet::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("colorized.png"));
    let pair = synth_pair(&SynthSpec::default(), 0)?;
    let label = pair.label.expect("synthetic pairs are labelled");

    // Flip 5% of the pixels to fake a prediction.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noisy: Vec<u8> = label.data().iter().map(|&v| if rng.random_bool(0.05) { 1 - v } else { v }).collect();
    let pred = BinaryMask::new(label.width(), label.height(), noisy)?;

    let counts = ConfusionCounts::from_slices(pred.data(), label.data())?;
    println!("{counts:?}");
    print!("{}", metrics(&counts).to_kv());
    write_rgb(&colorize(&pred, &label)?, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}
