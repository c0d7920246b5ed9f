//! Siamese VGG encoder and decoder producing per-image change probability
//! maps, plus the pseudo-label consistency losses that train it.

mod decoder;
mod encoder;
mod ssl;

pub use decoder::BranchDecoder;
pub use encoder::{import_encoder_weights, EncoderFeatures, VggEncoder, VGG_BLOCK_CONVS};
pub use ssl::{pseudo_label, region_bce, ssl_losses, RegionMasks};

use candle_core::Tensor;

use crate::error::Result;
use crate::nn::{Ctx, Scope};

/// Outputs of both branch passes.
#[derive(Debug, Clone)]
pub struct BranchOutputs {
    pub v1: EncoderFeatures,
    pub v2: EncoderFeatures,
    pub pm1: Tensor,
    pub pm2: Tensor,
}

/// Encoder + decoder with one parameter set shared by both images.
#[derive(Debug, Clone)]
pub struct CnnBranch {
    encoder: VggEncoder,
    decoder: BranchDecoder,
}

impl CnnBranch {
    pub fn new(sc: &Scope, in_channels: usize, widths: [usize; 5]) -> Result<Self> {
        Ok(Self {
            encoder: VggEncoder::new(&sc.pp("encoder"), in_channels, widths)?,
            decoder: BranchDecoder::new(&sc.pp("decoder"), widths)?,
        })
    }

    pub fn encoder(&self) -> &VggEncoder {
        &self.encoder
    }

    /// Features and probability map of a single image.
    pub fn run(&self, image: &Tensor, ctx: &Ctx) -> Result<(EncoderFeatures, Tensor)> {
        let f = self.encoder.forward(image, ctx)?;
        let pm = self.decoder.forward(&f, ctx)?;
        Ok((f, pm))
    }

    pub fn forward(&self, i1: &Tensor, i2: &Tensor, ctx: &Ctx) -> Result<BranchOutputs> {
        let (v1, pm1) = self.run(i1, ctx)?;
        let (v2, pm2) = self.run(i2, ctx)?;
        Ok(BranchOutputs { v1, v2, pm1, pm2 })
    }
}
