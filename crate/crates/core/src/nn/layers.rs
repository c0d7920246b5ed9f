use candle_core::{Tensor, Var, D};

use super::ctx::Ctx;
use super::params::{Init, Scope};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct Linear {
    weight: Tensor,
    bias: Option<Tensor>,
}

impl Linear {
    pub fn new(sc: &Scope, inp: usize, out: usize, bias: bool) -> Result<Self> {
        let weight = sc.param("weight", (out, inp), Init::FanIn { fan_in: inp })?;
        let bias = if bias {
            Some(sc.param("bias", out, Init::FanIn { fan_in: inp })?)
        } else {
            None
        };
        Ok(Self { weight, bias })
    }

    /// Transformer linear layer: truncated normal weights with std 0.02 and
    /// zero bias, the usual Swin initialisation.
    pub fn transformer(sc: &Scope, inp: usize, out: usize, bias: bool) -> Result<Self> {
        let weight = sc.param("weight", (out, inp), Init::TruncNormal(0.02))?;
        let bias = if bias {
            Some(sc.param("bias", out, Init::Zeros)?)
        } else {
            None
        };
        Ok(Self { weight, bias })
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    pub fn bias(&self) -> Option<&Tensor> {
        self.bias.as_ref()
    }

    /// Applies to the last axis of a tensor of any rank.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let dims = x.dims().to_vec();
        let inp = *dims.last().expect("rank >= 1");
        let rows = x.elem_count() / inp;
        let y = x.reshape((rows, inp))?.matmul(&self.weight.t()?)?;
        let y = match &self.bias {
            Some(b) => y.broadcast_add(b)?,
            None => y,
        };
        let mut out_dims = dims;
        *out_dims.last_mut().expect("rank >= 1") = self.weight.dim(0)?;
        Ok(y.reshape(out_dims)?)
    }
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    weight: Tensor,
    bias: Option<Tensor>,
    padding: usize,
    stride: usize,
}

impl Conv2d {
    /// Square kernel, "same" padding for odd kernels at stride 1.
    pub fn new(sc: &Scope, inp: usize, out: usize, kernel: usize, bias: bool) -> Result<Self> {
        Self::with_stride(sc, inp, out, kernel, 1, kernel / 2, bias)
    }

    pub fn with_stride(
        sc: &Scope,
        inp: usize,
        out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    ) -> Result<Self> {
        let fan_in = inp * kernel * kernel;
        let weight = sc.param("weight", (out, inp, kernel, kernel), Init::FanIn { fan_in })?;
        let bias = if bias {
            Some(sc.param("bias", out, Init::FanIn { fan_in })?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            padding,
            stride,
        })
    }

    pub fn weight(&self) -> &Tensor {
        &self.weight
    }

    pub fn bias(&self) -> Option<&Tensor> {
        self.bias.as_ref()
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv2d(&self.weight, self.padding, self.stride, 1, 1)?;
        match &self.bias {
            Some(b) => Ok(y.broadcast_add(&b.reshape((1, b.elem_count(), 1, 1))?)?),
            None => Ok(y),
        }
    }
}

/// Batch normalisation over `(B, H, W)` per channel. Training mode uses batch
/// statistics and updates the running estimates; eval mode uses the running
/// estimates only.
#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    weight: Tensor,
    bias: Tensor,
    running_mean: Var,
    running_var: Var,
    eps: f64,
    momentum: f64,
}

impl BatchNorm2d {
    pub fn new(sc: &Scope, channels: usize) -> Result<Self> {
        Ok(Self {
            weight: sc.param("weight", channels, Init::Ones)?,
            bias: sc.param("bias", channels, Init::Zeros)?,
            running_mean: sc.buffer("running_mean", channels, Init::Zeros)?,
            running_var: sc.buffer("running_var", channels, Init::Ones)?,
            eps: 1e-5,
            momentum: 0.1,
        })
    }

    pub fn forward(&self, x: &Tensor, ctx: &Ctx) -> Result<Tensor> {
        let (b, c, h, w) = x.dims4()?;
        let (mean, var) = if ctx.is_train() {
            let mean = x.mean_keepdim(0)?.mean_keepdim(2)?.mean_keepdim(3)?;
            let centred = x.broadcast_sub(&mean)?;
            let var = centred.sqr()?.mean_keepdim(0)?.mean_keepdim(2)?.mean_keepdim(3)?;
            let n = (b * h * w) as f64;
            let unbiased = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
            let m = self.momentum;
            let new_mean = ((self.running_mean.as_tensor() * (1.0 - m))?
                + (mean.detach().flatten_all()? * m)?)?;
            let new_var = ((self.running_var.as_tensor() * (1.0 - m))?
                + (var.detach().flatten_all()? * (m * unbiased))?)?;
            self.running_mean.set(&new_mean)?;
            self.running_var.set(&new_var)?;
            (mean, var)
        } else {
            (
                self.running_mean.as_tensor().reshape((1, c, 1, 1))?,
                self.running_var.as_tensor().reshape((1, c, 1, 1))?,
            )
        };
        let xhat = x
            .broadcast_sub(&mean)?
            .broadcast_div(&(var + self.eps)?.sqrt()?)?;
        Ok(xhat
            .broadcast_mul(&self.weight.reshape((1, c, 1, 1))?)?
            .broadcast_add(&self.bias.reshape((1, c, 1, 1))?)?)
    }
}

/// Layer normalisation over the last axis with a learnable affine map.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    weight: Tensor,
    bias: Tensor,
    eps: f64,
}

impl LayerNorm {
    pub fn new(sc: &Scope, dim: usize) -> Result<Self> {
        Ok(Self {
            weight: sc.param("weight", dim, Init::Ones)?,
            bias: sc.param("bias", dim, Init::Zeros)?,
            eps: 1e-5,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mean = x.mean_keepdim(D::Minus1)?;
        let centred = x.broadcast_sub(&mean)?;
        let var = centred.sqr()?.mean_keepdim(D::Minus1)?;
        let xhat = centred.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        Ok(xhat.broadcast_mul(&self.weight)?.broadcast_add(&self.bias)?)
    }
}

/// conv -> BN -> optional ReLU.
#[derive(Debug, Clone)]
pub struct ConvBn {
    conv: Conv2d,
    bn: BatchNorm2d,
    relu: bool,
}

impl ConvBn {
    pub fn new(sc: &Scope, inp: usize, out: usize, kernel: usize, relu: bool) -> Result<Self> {
        Ok(Self {
            conv: Conv2d::new(&sc.pp("conv"), inp, out, kernel, false)?,
            bn: BatchNorm2d::new(&sc.pp("bn"), out)?,
            relu,
        })
    }

    pub fn conv(&self) -> &Conv2d {
        &self.conv
    }

    pub fn forward(&self, x: &Tensor, ctx: &Ctx) -> Result<Tensor> {
        let y = self.bn.forward(&self.conv.forward(x)?, ctx)?;
        if self.relu {
            Ok(y.relu()?)
        } else {
            Ok(y)
        }
    }
}
