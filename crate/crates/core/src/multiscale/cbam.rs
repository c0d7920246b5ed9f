use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::nn::{ops, Conv2d, Linear, Scope};

/// Convolutional block attention: a channel gate (avg+max pooled descriptors
/// through a shared 2-layer MLP) followed by a spatial gate (channel-wise
/// mean and max through a 7x7 conv), both sigmoid and multiplicative.
#[derive(Debug, Clone)]
pub struct Cbam {
    fc1: Linear,
    fc2: Linear,
    spatial: Conv2d,
    channels: usize,
}

impl Cbam {
    pub fn new(sc: &Scope, channels: usize, reduction: usize) -> Result<Self> {
        if reduction == 0 || channels < reduction {
            return Err(Error::config(format!(
                "CBAM needs at least {reduction} channels, got {channels}"
            )));
        }
        let hidden = channels / reduction;
        Ok(Self {
            fc1: Linear::new(&sc.pp("fc1"), channels, hidden, false)?,
            fc2: Linear::new(&sc.pp("fc2"), hidden, channels, false)?,
            spatial: Conv2d::new(&sc.pp("spatial"), 2, 1, 7, false)?,
            channels,
        })
    }

    fn shared_mlp(&self, pooled: &Tensor) -> Result<Tensor> {
        self.fc2.forward(&self.fc1.forward(pooled)?.relu()?)
    }

    /// Channel gate `[B, C, 1, 1]`.
    pub fn channel_gate(&self, x: &Tensor) -> Result<Tensor> {
        let (b, c, _, _) = x.dims4()?;
        if c != self.channels {
            return Err(Error::dim(format!(
                "CBAM built for {} channels got {c}",
                self.channels
            )));
        }
        let avg = ops::global_avg_pool(x)?.reshape((b, c))?;
        let max = ops::global_max_pool(x)?.reshape((b, c))?;
        let logits = (self.shared_mlp(&avg)? + self.shared_mlp(&max)?)?;
        ops::sigmoid(&logits.reshape((b, c, 1, 1))?)
    }

    /// Spatial gate `[B, 1, H, W]`.
    pub fn spatial_gate(&self, x: &Tensor) -> Result<Tensor> {
        let desc = Tensor::cat(&[x.mean_keepdim(1)?, x.max_keepdim(1)?], 1)?;
        ops::sigmoid(&self.spatial.forward(&desc)?)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let x = x.broadcast_mul(&self.channel_gate(x)?)?;
        Ok(x.broadcast_mul(&self.spatial_gate(&x)?)?)
    }
}
