use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::nn::{ops, ConvBn, Ctx, Linear, Scope};

/// Selective-kernel convolution: 3x3 and 5x5 branches mixed per channel by a
/// softmax over two branch logits computed from a joint squeeze of `U + V`.
#[derive(Debug, Clone)]
pub struct SkConv {
    branch3: ConvBn,
    branch5: ConvBn,
    squeeze: Linear,
    select_u: Linear,
    select_v: Linear,
    channels: usize,
}

/// Intermediates of one SK-Conv evaluation.
#[derive(Debug, Clone)]
pub struct SkState {
    pub u: Tensor,
    pub v: Tensor,
    pub squeeze: Tensor,
    /// `[B, C, 2]`: weight of the 3x3 branch then the 5x5 branch.
    pub weights: Tensor,
    pub output: Tensor,
}

impl SkConv {
    pub fn new(sc: &Scope, channels: usize, reduction: usize) -> Result<Self> {
        if reduction == 0 || channels < 2 * reduction {
            return Err(Error::config(format!(
                "SK-Conv needs at least {} channels for reduction {reduction}, got {channels}",
                2 * reduction
            )));
        }
        let hidden = channels / reduction;
        Ok(Self {
            branch3: ConvBn::new(&sc.pp("branch3"), channels, channels, 3, true)?,
            branch5: ConvBn::new(&sc.pp("branch5"), channels, channels, 5, true)?,
            squeeze: Linear::new(&sc.pp("squeeze"), channels, hidden, true)?,
            select_u: Linear::new(&sc.pp("select_u"), hidden, channels, true)?,
            select_v: Linear::new(&sc.pp("select_v"), hidden, channels, true)?,
            channels,
        })
    }

    pub fn evaluate(&self, x: &Tensor, ctx: &Ctx) -> Result<SkState> {
        let (b, c, _, _) = x.dims4()?;
        if c != self.channels {
            return Err(Error::dim(format!(
                "SK-Conv built for {} channels got {c}",
                self.channels
            )));
        }
        let u = self.branch3.forward(x, ctx)?;
        let v = self.branch5.forward(x, ctx)?;
        let s = ops::global_avg_pool(&(&u + &v)?)?.reshape((b, c))?;
        let z = self.squeeze.forward(&s)?.relu()?;
        let logits = Tensor::stack(&[self.select_u.forward(&z)?, self.select_v.forward(&z)?], 2)?;
        let weights = ops::softmax_last_dim(&logits)?;
        let wu = weights.narrow(2, 0, 1)?.reshape((b, c, 1, 1))?;
        let wv = weights.narrow(2, 1, 1)?.reshape((b, c, 1, 1))?;
        let output = (u.broadcast_mul(&wu)? + v.broadcast_mul(&wv)?)?;
        Ok(SkState {
            u,
            v,
            squeeze: z,
            weights,
            output,
        })
    }

    pub fn forward(&self, x: &Tensor, ctx: &Ctx) -> Result<Tensor> {
        Ok(self.evaluate(x, ctx)?.output)
    }
}
