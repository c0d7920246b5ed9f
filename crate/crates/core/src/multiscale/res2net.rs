use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::nn::{ConvBn, Ctx, Scope};

pub const RES2_GROUPS: usize = 4;

/// Res2Net-style hierarchical convolution: 1x1 conv, four-way channel split
/// with `y1 = x1`, `y2 = K2(x2)`, `yz = Kz(xz + y(z-1))`, concat, 1x1 conv.
#[derive(Debug, Clone)]
pub struct Res2NetConv {
    reduce: ConvBn,
    convs: Vec<ConvBn>,
    expand: ConvBn,
    channels: usize,
    width: usize,
}

/// Intermediates of one Res2Net-Conv evaluation.
#[derive(Debug, Clone)]
pub struct Res2State {
    pub input: Tensor,
    pub splits: Vec<Tensor>,
    pub outputs: Vec<Tensor>,
    pub output: Tensor,
}

impl Res2NetConv {
    /// `width` is the channel count after the first 1x1 conv.
    pub fn new(sc: &Scope, channels: usize, width: usize) -> Result<Self> {
        if width == 0 || width % RES2_GROUPS != 0 {
            return Err(Error::config(format!(
                "Res2Net width {width} is not divisible by {RES2_GROUPS}"
            )));
        }
        let g = width / RES2_GROUPS;
        let convs = (0..RES2_GROUPS - 1)
            .map(|i| ConvBn::new(&sc.pp(format!("convs.{i}")), g, g, 3, true))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            reduce: ConvBn::new(&sc.pp("reduce"), channels, width, 1, true)?,
            convs,
            expand: ConvBn::new(&sc.pp("expand"), width, channels, 1, false)?,
            channels,
            width,
        })
    }

    pub fn evaluate(&self, x: &Tensor, ctx: &Ctx) -> Result<Res2State> {
        let (_, c, _, _) = x.dims4()?;
        if c != self.channels {
            return Err(Error::dim(format!(
                "Res2Net-Conv built for {} channels got {c}",
                self.channels
            )));
        }
        let input = self.reduce.forward(x, ctx)?;
        let g = self.width / RES2_GROUPS;
        let splits = (0..RES2_GROUPS)
            .map(|z| input.narrow(1, z * g, g))
            .collect::<candle_core::Result<Vec<_>>>()?;
        let mut outputs: Vec<Tensor> = Vec::with_capacity(RES2_GROUPS);
        outputs.push(splits[0].clone());
        outputs.push(self.convs[0].forward(&splits[1], ctx)?);
        for z in 2..RES2_GROUPS {
            let inp = (&splits[z] + &outputs[z - 1])?;
            outputs.push(self.convs[z - 1].forward(&inp, ctx)?);
        }
        let output = self.expand.forward(&Tensor::cat(&outputs, 1)?, ctx)?;
        Ok(Res2State {
            input,
            splits,
            outputs,
            output,
        })
    }

    pub fn forward(&self, x: &Tensor, ctx: &Ctx) -> Result<Tensor> {
        Ok(self.evaluate(x, ctx)?.output)
    }
}
