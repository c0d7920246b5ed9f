//! Small layer library on top of `candle-core`: parameter storage,
//! conv/linear/norm layers and differentiable helpers.

mod ctx;
mod layers;
pub mod ops;
mod params;

pub use ctx::Ctx;
pub use layers::{BatchNorm2d, Conv2d, ConvBn, LayerNorm, Linear};
pub use params::{Init, ParamStore, Scope};
