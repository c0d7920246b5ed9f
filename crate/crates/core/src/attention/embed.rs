use candle_core::Tensor;

use super::block::TokenGrid;
use crate::error::{Error, Result};
use crate::nn::{LayerNorm, Linear, Scope};

/// Non-overlapping `patch x patch` linear projection of a `[B, C, H, W]`
/// map into a token grid, followed by layer norm.
#[derive(Debug, Clone)]
pub struct PatchEmbed {
    proj: Linear,
    norm: LayerNorm,
    patch: usize,
    in_channels: usize,
}

impl PatchEmbed {
    pub fn new(sc: &Scope, in_channels: usize, dim: usize, patch: usize) -> Result<Self> {
        if patch == 0 {
            return Err(Error::config("patch size must be positive"));
        }
        Ok(Self {
            proj: Linear::transformer(&sc.pp("proj"), in_channels * patch * patch, dim, true)?,
            norm: LayerNorm::new(&sc.pp("norm"), dim)?,
            patch,
            in_channels,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<TokenGrid> {
        let (b, c, h, w) = x.dims4()?;
        let p = self.patch;
        if c != self.in_channels {
            return Err(Error::dim(format!(
                "patch embedding expects {} channels, got {c}",
                self.in_channels
            )));
        }
        if h % p != 0 || w % p != 0 {
            return Err(Error::dim(format!(
                "{h}x{w} input is not divisible by patch {p}"
            )));
        }
        let (gh, gw) = (h / p, w / p);
        let patches = x
            .reshape(vec![b, c, gh, p, gw, p])?
            .permute([0, 2, 4, 1, 3, 5])?
            .contiguous()?
            .reshape((b, gh * gw, c * p * p))?;
        let tokens = self.norm.forward(&self.proj.forward(&patches)?)?;
        TokenGrid::new(tokens, gh, gw)
    }
}

/// 2x spatial downsampling: concatenates each 2x2 neighbourhood (4C) and
/// reduces linearly to 2C, then layer norm.
#[derive(Debug, Clone)]
pub struct PatchMerge {
    reduction: Linear,
    norm: LayerNorm,
}

impl PatchMerge {
    pub fn new(sc: &Scope, dim: usize) -> Result<Self> {
        Ok(Self {
            reduction: Linear::transformer(&sc.pp("reduction"), 4 * dim, 2 * dim, false)?,
            norm: LayerNorm::new(&sc.pp("norm"), 2 * dim)?,
        })
    }

    pub fn forward(&self, x: &TokenGrid) -> Result<TokenGrid> {
        let (b, _, c) = x.data.dims3()?;
        let (h, w) = (x.height, x.width);
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::dim(format!("cannot merge an odd {h}x{w} grid")));
        }
        let merged = x
            .data
            .reshape(vec![b, h / 2, 2, w / 2, 2, c])?
            .permute([0, 1, 3, 4, 2, 5])?
            .contiguous()?
            .reshape((b, h * w / 4, 4 * c))?;
        let tokens = self.norm.forward(&self.reduction.forward(&merged)?)?;
        TokenGrid::new(tokens, h / 2, w / 2)
    }
}
