use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::nn::{ops, ConvBn, Ctx, Scope};

/// `Softmax(Q K^T) V` over token rows, no temperature. `q`, `k`: `[B, N, dk]`,
/// `v`: `[B, N, dv]`. Returns `(output, weights)`.
pub fn grounding_attention(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<(Tensor, Tensor)> {
    let logits = q.matmul(&k.transpose(1, 2)?.contiguous()?)?;
    let weights = ops::softmax_last_dim(&logits)?;
    let out = weights.matmul(&v.contiguous()?)?;
    Ok((out, weights))
}

/// Top-down grounding transformer between a coarse level and the next finer
/// one. The coarse map is projected, normalised and upsampled 2x, the fine
/// map projected and normalised; their concatenation gives Q, K, V through
/// pointwise conv + BN + ReLU, and the attention output lives at the fine
/// level's extent with the fine level's channel count.
#[derive(Debug, Clone)]
pub struct GroundingTransformer {
    coarse_proj: ConvBn,
    fine_proj: ConvBn,
    q: ConvBn,
    k: ConvBn,
    v: ConvBn,
    coarse_channels: usize,
    fine_channels: usize,
}

/// Intermediates of one grounding-transformer evaluation.
#[derive(Debug, Clone)]
pub struct GtState {
    pub coarse_bar: Tensor,
    pub fine_bar: Tensor,
    pub joint: Tensor,
    pub q: Tensor,
    pub k: Tensor,
    pub v: Tensor,
    pub weights: Tensor,
    pub output: Tensor,
}

impl GroundingTransformer {
    pub fn new(sc: &Scope, coarse_channels: usize, fine_channels: usize) -> Result<Self> {
        let cg = fine_channels;
        let dk = (fine_channels / 2).max(1);
        Ok(Self {
            coarse_proj: ConvBn::new(&sc.pp("coarse_proj"), coarse_channels, cg, 1, false)?,
            fine_proj: ConvBn::new(&sc.pp("fine_proj"), fine_channels, cg, 1, false)?,
            q: ConvBn::new(&sc.pp("q"), 2 * cg, dk, 1, true)?,
            k: ConvBn::new(&sc.pp("k"), 2 * cg, dk, 1, true)?,
            v: ConvBn::new(&sc.pp("v"), 2 * cg, fine_channels, 1, true)?,
            coarse_channels,
            fine_channels,
        })
    }

    pub fn evaluate(&self, coarse: &Tensor, fine: &Tensor, ctx: &Ctx) -> Result<GtState> {
        let (cb, cc, ch, cw) = coarse.dims4()?;
        let (fb, fc, fh, fw) = fine.dims4()?;
        if cb != fb || ch * 2 != fh || cw * 2 != fw {
            return Err(Error::dim(format!(
                "grounding transformer needs the coarse map at exactly half the fine extent, \
                 got coarse {ch}x{cw} and fine {fh}x{fw}"
            )));
        }
        if cc != self.coarse_channels || fc != self.fine_channels {
            return Err(Error::dim(format!(
                "grounding transformer built for {}/{} channels got {cc}/{fc}",
                self.coarse_channels, self.fine_channels
            )));
        }
        let coarse_bar = ops::upsample_bilinear(&self.coarse_proj.forward(coarse, ctx)?, 2)?;
        let fine_bar = self.fine_proj.forward(fine, ctx)?;
        let joint = Tensor::cat(&[&coarse_bar, &fine_bar], 1)?;
        let q = ops::map_to_tokens(&self.q.forward(&joint, ctx)?)?;
        let k = ops::map_to_tokens(&self.k.forward(&joint, ctx)?)?;
        let v = ops::map_to_tokens(&self.v.forward(&joint, ctx)?)?;
        let (out, weights) = grounding_attention(&q, &k, &v)?;
        let output = ops::tokens_to_map(&out, fh, fw)?;
        Ok(GtState {
            coarse_bar,
            fine_bar,
            joint,
            q,
            k,
            v,
            weights,
            output,
        })
    }

    pub fn forward(&self, coarse: &Tensor, fine: &Tensor, ctx: &Ctx) -> Result<Tensor> {
        Ok(self.evaluate(coarse, fine, ctx)?.output)
    }
}
