use candle_core::Tensor;

use super::encoder::EncoderFeatures;
use crate::error::Result;
use crate::nn::{ops, Conv2d, ConvBn, Ctx, Scope};

/// Branch decoder: five conv + BN + ReLU base blocks from stride 32 up to
/// stride 2. Between blocks the running map is upsampled 2x and added to the
/// encoder feature of matching resolution; a final 1x1 conv gives logits that
/// are upsampled to the input size and squashed by a sigmoid.
#[derive(Debug, Clone)]
pub struct BranchDecoder {
    blocks: Vec<ConvBn>,
    head: Conv2d,
}

impl BranchDecoder {
    /// `widths`: the encoder block widths (stride 2 .. stride 32).
    pub fn new(sc: &Scope, widths: [usize; 5]) -> Result<Self> {
        // block k maps the stride-(32 / 2^k) map to the width of the next
        // finer encoder level so the additive skip lines up
        let io = [
            (widths[4], widths[3]),
            (widths[3], widths[2]),
            (widths[2], widths[1]),
            (widths[1], widths[0]),
            (widths[0], widths[0]),
        ];
        let blocks = io
            .iter()
            .enumerate()
            .map(|(k, &(i, o))| ConvBn::new(&sc.pp(format!("blocks.{k}")), i, o, 3, true))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            blocks,
            head: Conv2d::new(&sc.pp("head"), widths[0], 1, 1, true)?,
        })
    }

    pub fn forward(&self, f: &EncoderFeatures, ctx: &Ctx) -> Result<Tensor> {
        let skips = [&f.levels[2], &f.levels[1], &f.levels[0], &f.stem];
        let mut x = self.blocks[0].forward(&f.levels[3], ctx)?;
        for (block, skip) in self.blocks[1..].iter().zip(skips) {
            x = (ops::upsample_bilinear(&x, 2)? + skip)?;
            x = block.forward(&x, ctx)?;
        }
        let logits = ops::upsample_bilinear(&self.head.forward(&x)?, 2)?;
        ops::sigmoid(&logits)
    }
}
