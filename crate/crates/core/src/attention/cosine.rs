use candle_core::{Tensor, D};

use super::cpb::PositionBiasNet;
use crate::error::{Error, Result};
use crate::nn::{ops, Init, Linear, Scope};

/// Lower bound on each row norm in the cosine division.
pub const COSINE_EPS: f64 = 1e-6;

/// Learnable inverse temperature `1/r`, one scalar per head, stored as its
/// logarithm and clamped above at `ln 100`.
#[derive(Debug, Clone)]
pub struct CosineScale {
    log_inv_r: Tensor,
}

impl CosineScale {
    pub const INIT: f64 = std::f64::consts::LN_10;
    pub const MAX_LOG: f64 = 4.605_170_185_988_092; // ln 100

    pub fn new(sc: &Scope, heads: usize) -> Result<Self> {
        Ok(Self {
            log_inv_r: sc.param("log_inv_r", heads, Init::Const(Self::INIT))?,
        })
    }

    pub fn from_tensor(log_inv_r: Tensor) -> Self {
        Self { log_inv_r }
    }

    pub fn log_inv_r(&self) -> &Tensor {
        &self.log_inv_r
    }

    /// `1/r` per head, `[heads]`.
    pub fn inv_r(&self) -> Result<Tensor> {
        Ok(self.log_inv_r.minimum(Self::MAX_LOG)?.exp()?)
    }
}

fn l2_normalize(x: &Tensor) -> Result<Tensor> {
    let norm = x.sqr()?.sum_keepdim(D::Minus1)?.sqrt()?;
    Ok(x.broadcast_div(&norm.maximum(COSINE_EPS)?)?)
}

/// Attention weights and output for head-split inputs.
///
/// `q`, `k`, `v`: `[B, h, N, d]`; `bias`: `[h, N, N]`; `inv_r`: `[h]`;
/// `mask`: `[nW, N, N]` with `B` a multiple of `nW`.
/// Logits are `cos(q_m, k_n) * (1/r) + B_mn (+ mask)`, normalised by a
/// row softmax. Returns `(output [B, h, N, d], weights [B, h, N, N])`.
pub fn scaled_cosine_attention_with_weights(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    bias: Option<&Tensor>,
    inv_r: &Tensor,
    mask: Option<&Tensor>,
) -> Result<(Tensor, Tensor)> {
    let (b, h, n, _) = q.dims4()?;
    let (kb, kh, kn, _) = k.dims4()?;
    let (vb, vh, vn, _) = v.dims4()?;
    if (kb, kh, kn) != (b, h, n) || (vb, vh, vn) != (b, h, n) {
        return Err(Error::dim(format!(
            "q {:?}, k {:?}, v {:?} disagree on batch/heads/tokens",
            q.dims(),
            k.dims(),
            v.dims()
        )));
    }
    let qn = l2_normalize(q)?;
    let kn_ = l2_normalize(k)?;
    let cos = qn.matmul(&kn_.transpose(2, 3)?.contiguous()?)?;
    let mut logits = cos.broadcast_mul(&inv_r.reshape((1, h, 1, 1))?)?;
    if let Some(bias) = bias {
        logits = logits.broadcast_add(&bias.unsqueeze(0)?)?;
    }
    if let Some(mask) = mask {
        let nw = mask.dim(0)?;
        if b % nw != 0 {
            return Err(Error::dim(format!("batch {b} is not a multiple of {nw} windows")));
        }
        let mask = mask.to_dtype(logits.dtype())?;
        logits = logits
            .reshape((b / nw, nw, h, n, n))?
            .broadcast_add(&mask.unsqueeze(1)?.unsqueeze(0)?)?
            .reshape((b, h, n, n))?;
    }
    let weights = ops::softmax_last_dim(&logits)?;
    let out = weights.matmul(&v.contiguous()?)?;
    Ok((out, weights))
}

/// See [`scaled_cosine_attention_with_weights`].
pub fn scaled_cosine_attention(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    bias: Option<&Tensor>,
    inv_r: &Tensor,
    mask: Option<&Tensor>,
) -> Result<Tensor> {
    Ok(scaled_cosine_attention_with_weights(q, k, v, bias, inv_r, mask)?.0)
}

/// Multi-head window attention: joint QKV projection, scaled cosine logits
/// with continuous position bias, head concatenation and output projection.
#[derive(Debug, Clone)]
pub struct WindowAttention {
    qkv: Linear,
    proj: Linear,
    cpb: PositionBiasNet,
    scale: CosineScale,
    heads: usize,
}

impl WindowAttention {
    pub fn new(sc: &Scope, dim: usize, heads: usize, cpb_hidden: usize) -> Result<Self> {
        if heads == 0 || dim % heads != 0 {
            return Err(Error::config(format!(
                "embedding width {dim} is not divisible by {heads} heads"
            )));
        }
        Ok(Self {
            qkv: Linear::transformer(&sc.pp("qkv"), dim, 3 * dim, true)?,
            proj: Linear::transformer(&sc.pp("proj"), dim, dim, true)?,
            cpb: PositionBiasNet::new(&sc.pp("cpb"), heads, cpb_hidden)?,
            scale: CosineScale::new(&sc.pp("scale"), heads)?,
            heads,
        })
    }

    pub fn proj(&self) -> &Linear {
        &self.proj
    }

    pub fn cpb(&self) -> &PositionBiasNet {
        &self.cpb
    }

    pub fn scale(&self) -> &CosineScale {
        &self.scale
    }

    /// `x`: `[B*nW, N, D]` tokens of `window x window` windows.
    pub fn forward(&self, x: &Tensor, window: usize, mask: Option<&Tensor>) -> Result<Tensor> {
        let (bw, n, dim) = x.dims3()?;
        let hd = dim / self.heads;
        if n != window * window {
            return Err(Error::dim(format!(
                "window attention built for {window}x{window} tokens got {n}"
            )));
        }
        let qkv = self
            .qkv
            .forward(x)?
            .reshape(vec![bw, n, 3, self.heads, hd])?
            .permute([2, 0, 3, 1, 4])?
            .contiguous()?;
        let (q, k, v) = (qkv.get(0)?, qkv.get(1)?, qkv.get(2)?);
        let bias = self.cpb.bias(window)?;
        let inv_r = self.scale.inv_r()?;
        let out = scaled_cosine_attention(&q, &k, &v, Some(&bias), &inv_r, mask)?;
        let out = out.transpose(1, 2)?.contiguous()?.reshape((bw, n, dim))?;
        self.proj.forward(&out)
    }
}
