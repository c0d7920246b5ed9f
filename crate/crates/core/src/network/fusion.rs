use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::multiscale::Cbam;
use crate::nn::{ops, Conv2d, ConvBn, Ctx, Scope};

/// Two stacked 3x3 conv + BN + ReLU units.
#[derive(Debug, Clone)]
pub struct DConv {
    first: ConvBn,
    second: ConvBn,
}

impl DConv {
    pub fn new(sc: &Scope, inp: usize, out: usize) -> Result<Self> {
        Ok(Self {
            first: ConvBn::new(&sc.pp("0"), inp, out, 3, true)?,
            second: ConvBn::new(&sc.pp("1"), out, out, 3, true)?,
        })
    }

    pub fn units(&self) -> (&ConvBn, &ConvBn) {
        (&self.first, &self.second)
    }

    pub fn forward(&self, x: &Tensor, ctx: &Ctx) -> Result<Tensor> {
        self.second.forward(&self.first.forward(x, ctx)?, ctx)
    }
}

/// Intermediates of one feature-fusion evaluation. In `concat` the grid
/// feature occupies channels `[0, C)`, the first image's branch feature
/// `[C, 2C)` and the second's `[2C, 3C)`.
#[derive(Debug, Clone)]
pub struct FfState {
    pub s: Tensor,
    pub v1: Tensor,
    pub v2: Tensor,
    pub concat: Tensor,
    pub fused: Tensor,
    pub output: Tensor,
}

/// Fuses a grid feature with the two branch features of the same stride:
/// 1x1 projections to the grid width (one projection shared by both branch
/// features), concatenation, 3x3 conv + BN + ReLU back to the grid width,
/// then CBAM.
#[derive(Debug, Clone)]
pub struct FeatureFusion {
    proj_s: Conv2d,
    proj_v: Conv2d,
    fuse: ConvBn,
    cbam: Cbam,
    channels: usize,
}

impl FeatureFusion {
    pub fn new(sc: &Scope, channels: usize, branch_channels: usize, reduction: usize) -> Result<Self> {
        Ok(Self {
            proj_s: Conv2d::new(&sc.pp("proj_s"), channels, channels, 1, true)?,
            proj_v: Conv2d::new(&sc.pp("proj_v"), branch_channels, channels, 1, true)?,
            fuse: ConvBn::new(&sc.pp("fuse"), 3 * channels, channels, 3, true)?,
            cbam: Cbam::new(&sc.pp("cbam"), channels, reduction)?,
            channels,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn evaluate(&self, s: &Tensor, v1: &Tensor, v2: &Tensor, ctx: &Ctx) -> Result<FfState> {
        ops::ensure_aligned("feature fusion", &[s, v1, v2])?;
        if v1.dims() != v2.dims() {
            return Err(Error::dim(format!(
                "feature fusion: branch features {:?} and {:?} differ",
                v1.dims(),
                v2.dims()
            )));
        }
        let s = self.proj_s.forward(s)?;
        let v1 = self.proj_v.forward(v1)?;
        let v2 = self.proj_v.forward(v2)?;
        let concat = Tensor::cat(&[&s, &v1, &v2], 1)?;
        let fused = self.fuse.forward(&concat, ctx)?;
        let output = self.cbam.forward(&fused)?;
        Ok(FfState {
            s,
            v1,
            v2,
            concat,
            fused,
            output,
        })
    }

    pub fn forward(&self, s: &Tensor, v1: &Tensor, v2: &Tensor, ctx: &Ctx) -> Result<Tensor> {
        Ok(self.evaluate(s, v1, v2, ctx)?.output)
    }
}

/// Bilinear 2x upsampling with a 1x1 conv halving the channel count. The
/// conv is applied first; a pointwise linear map commutes with bilinear
/// interpolation (whose weights sum to one), so the result is the same at a
/// quarter of the cost.
#[derive(Debug, Clone)]
pub struct UpAlign {
    conv: Conv2d,
}

impl UpAlign {
    pub fn new(sc: &Scope, inp: usize, out: usize) -> Result<Self> {
        Ok(Self {
            conv: Conv2d::new(&sc.pp("conv"), inp, out, 1, true)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        ops::upsample_bilinear(&self.conv.forward(x)?, 2)
    }
}
