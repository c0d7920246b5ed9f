//! Mixed feature pyramid and its units: SK-Conv and Res2Net-Conv for
//! intra-level multi-scale features, the grounding transformer for top-down
//! inter-level interaction, and CBAM for fusion.

mod cbam;
mod grounding;
mod mfp;
mod res2net;
mod sk;

pub use cbam::Cbam;
pub use grounding::{grounding_attention, GroundingTransformer, GtState};
pub use mfp::{MfpConfig, MixedFeaturePyramid, Pyramid};
pub use res2net::{Res2NetConv, Res2State, RES2_GROUPS};
pub use sk::{SkConv, SkState};
