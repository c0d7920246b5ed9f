//! Differentiable tensor helpers built from core ops only, so every one of
//! them has a backward pass.

use candle_core::{DType, Tensor, D};

use crate::error::{Error, Result};

/// Softmax over the last axis. The row max is detached before the shift;
/// softmax is invariant to it, so the gradient is unaffected.
pub fn softmax_last_dim(x: &Tensor) -> Result<Tensor> {
    let max = x.max_keepdim(D::Minus1)?.detach();
    let e = x.broadcast_sub(&max)?.exp()?;
    let s = e.sum_keepdim(D::Minus1)?;
    Ok(e.broadcast_div(&s)?)
}

/// Logistic sigmoid as `0.5 (1 + tanh(x / 2))`, finite for any input.
pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok(((x * 0.5)?.tanh()? + 1.0)?.affine(0.5, 0.0)?)
}

/// Row-stochastic interpolation matrix `[out, in]` for 1-D linear resampling
/// with half-pixel centres (no corner alignment).
pub fn linear_interp_matrix(input: usize, output: usize) -> Vec<f64> {
    let mut m = vec![0.0; input * output];
    let scale = input as f64 / output as f64;
    for o in 0..output {
        let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
        let i0 = (src.floor() as usize).min(input - 1);
        let i1 = (i0 + 1).min(input - 1);
        let w1 = src - i0 as f64;
        m[o * input + i0] += 1.0 - w1;
        m[o * input + i1] += w1;
    }
    m
}

/// Bilinear resize of a `[B, C, H, W]` map to `(out_h, out_w)`, written as
/// two matrix products so it is differentiable.
pub fn resize_bilinear(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    if (h, w) == (out_h, out_w) {
        return Ok(x.clone());
    }
    let dev = x.device();
    let dt = x.dtype();
    let mw = Tensor::from_vec(linear_interp_matrix(w, out_w), (out_w, w), dev)?.to_dtype(dt)?;
    let mh = Tensor::from_vec(linear_interp_matrix(h, out_h), (out_h, h), dev)?.to_dtype(dt)?;
    let y = x
        .contiguous()?
        .reshape((b * c * h, w))?
        .matmul(&mw.t()?)?
        .reshape((b, c, h, out_w))?;
    let y = y
        .transpose(2, 3)?
        .contiguous()?
        .reshape((b * c * out_w, h))?
        .matmul(&mh.t()?)?
        .reshape((b, c, out_w, out_h))?
        .transpose(2, 3)?
        .contiguous()?;
    Ok(y)
}

/// Integer-factor bilinear upsampling.
pub fn upsample_bilinear(x: &Tensor, factor: usize) -> Result<Tensor> {
    let (_, _, h, w) = x.dims4()?;
    resize_bilinear(x, h * factor, w * factor)
}

/// `[B, C, H, W] -> [B, C, 1, 1]`
pub fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    Ok(x.mean_keepdim(3)?.mean_keepdim(2)?)
}

pub fn global_max_pool(x: &Tensor) -> Result<Tensor> {
    Ok(x.max_keepdim(3)?.max_keepdim(2)?)
}

/// `[B, C, H, W] -> [B, H*W, C]`
pub fn map_to_tokens(x: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = x.dims4()?;
    Ok(x.reshape((b, c, h * w))?.transpose(1, 2)?.contiguous()?)
}

/// `[B, H*W, C] -> [B, C, H, W]`
pub fn tokens_to_map(x: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let (b, n, c) = x.dims3()?;
    if n != h * w {
        return Err(Error::dim(format!("{n} tokens cannot form a {h}x{w} grid")));
    }
    Ok(x.transpose(1, 2)?.contiguous()?.reshape((b, c, h, w))?)
}

/// Checks that all maps share batch and spatial extent.
pub fn ensure_aligned(what: &str, maps: &[&Tensor]) -> Result<()> {
    let first = maps[0].dims4()?;
    for m in &maps[1..] {
        let d = m.dims4()?;
        if (d.0, d.2, d.3) != (first.0, first.2, first.3) {
            return Err(Error::dim(format!(
                "{what}: spatially misaligned inputs {:?} vs {:?}",
                maps[0].dims(),
                m.dims()
            )));
        }
    }
    Ok(())
}

/// Scalar readout of a rank-0 or single-element tensor as f64.
pub fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?[0])
}
