//! The dense change-detection network: a Swin V2 backbone column, the mixed
//! feature pyramid on rows 1-3, nested Swin nodes joined by feature-fusion
//! units that inject the CNN branch, a full-resolution DConv row, and the
//! CBAM change-map head with deep supervision.

mod config;
mod fusion;
mod grid;
mod model;

pub use config::{BranchMode, ModelConfig, ScalePreset, DEPTH_PROFILES, PATCH, SIDE_NODE_DEPTH};
pub use fusion::{DConv, FeatureFusion, FfState, UpAlign};
pub use grid::GridIndex;
pub use model::{FfConsumer, GridState, NetworkOutputs, SwinV2DNet, Topology};
