//! Swin V2 primitives: windowing and cyclic shift, scaled cosine multi-head
//! attention with log-spaced continuous position bias, the post-normalised
//! block, and patch embedding/merging.

mod block;
mod cosine;
mod cpb;
mod embed;
mod window;

pub use block::{effective_window, BlockConfig, SwinStage, SwinV2Block, TokenGrid};
pub use cosine::{
    scaled_cosine_attention, scaled_cosine_attention_with_weights, CosineScale, WindowAttention,
    COSINE_EPS,
};
pub use cpb::{log_coord_table, log_spaced_coords, offset_row, relative_index, PositionBiasNet};
pub use embed::{PatchEmbed, PatchMerge};
pub use window::{cyclic_shift, shifted_window_mask, window_partition, window_reverse};
