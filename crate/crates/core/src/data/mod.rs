//! Bitemporal image pairs: PNG IO, dataset layout and manifests, tiling,
//! dihedral augmentation, synthetic data and error-map colouring.

mod augment;
mod colorize;
mod dataset;
mod io;
mod mask;
mod pair;
mod synth;
mod tile;

pub use augment::{augment, DihedralOp};
pub use colorize::{colorize, FN_COLOR, FP_COLOR, TN_COLOR, TP_COLOR};
pub use dataset::{DatasetLayout, SPLITS};
pub use io::{read_mask, read_rgb, write_gray, write_mask, write_rgb};
pub use mask::{BinaryMask, LABEL_THRESHOLD};
pub use pair::{image_to_tensor, Batch, BitemporalPair};
pub use synth::{change_ratio, synth_dataset, synth_pair, synth_pairs, ShapeKind, SynthSpec, TextureSpec};
pub use tile::tile_pair;
