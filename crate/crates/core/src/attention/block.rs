use candle_core::Tensor;

use super::cosine::WindowAttention;
use super::window::{cyclic_shift, shifted_window_mask, window_partition, window_reverse};
use crate::error::{Error, Result};
use crate::nn::{ops, LayerNorm, Linear, Scope};

/// Tokens of a `height x width` grid, `[B, N, D]` with `N = height * width`.
#[derive(Debug, Clone)]
pub struct TokenGrid {
    pub data: Tensor,
    pub height: usize,
    pub width: usize,
}

impl TokenGrid {
    pub fn new(data: Tensor, height: usize, width: usize) -> Result<Self> {
        let (_, n, d) = data.dims3()?;
        if n != height * width {
            return Err(Error::dim(format!(
                "{n} tokens do not form a {height}x{width} grid"
            )));
        }
        if d == 0 {
            return Err(Error::dim("token width must be positive"));
        }
        Ok(Self { data, height, width })
    }

    pub fn from_map(map: &Tensor) -> Result<Self> {
        let (_, _, h, w) = map.dims4()?;
        Self::new(ops::map_to_tokens(map)?, h, w)
    }

    pub fn to_map(&self) -> Result<Tensor> {
        ops::tokens_to_map(&self.data, self.height, self.width)
    }

    pub fn dim(&self) -> usize {
        self.data.dims()[2]
    }
}

/// Window geometry for a grid: the window shrinks to the grid when the grid
/// is smaller, and shifting is disabled when one window covers the grid.
/// Returns `(window, shift)` where `shift` is what a shifted block would use.
pub fn effective_window(height: usize, width: usize, window: usize) -> Result<(usize, usize)> {
    let win = window.min(height).min(width);
    if win == 0 || height % win != 0 || width % win != 0 {
        return Err(Error::dim(format!(
            "grid {height}x{width} is not tiled by window {win}"
        )));
    }
    let shift = if height.max(width) <= win { 0 } else { win / 2 };
    Ok((win, shift))
}

#[derive(Debug, Clone)]
struct Mlp {
    fc1: Linear,
    fc2: Linear,
}

#[derive(Debug, Clone, Copy)]
pub struct BlockConfig {
    pub dim: usize,
    pub heads: usize,
    pub window: usize,
    /// Whether this block uses shifted windows (SW-MSA).
    pub shifted: bool,
    pub cpb_hidden: usize,
    pub mlp_ratio: usize,
}

/// One Swin V2 block with residual post-normalisation:
/// `x = x + LN(MSA(x))`, `x = x + LN(MLP(x))`, where MSA is window attention,
/// on a cyclically shifted grid for shifted blocks. Window, shift and mask
/// follow the grid the block is run on.
#[derive(Debug, Clone)]
pub struct SwinV2Block {
    attn: WindowAttention,
    norm1: LayerNorm,
    mlp: Mlp,
    norm2: LayerNorm,
    cfg: BlockConfig,
}

impl SwinV2Block {
    pub fn new(sc: &Scope, cfg: BlockConfig) -> Result<Self> {
        if cfg.window == 0 {
            return Err(Error::config("window size must be positive"));
        }
        let dim = cfg.dim;
        Ok(Self {
            attn: WindowAttention::new(&sc.pp("attn"), dim, cfg.heads, cfg.cpb_hidden)?,
            norm1: LayerNorm::new(&sc.pp("norm1"), dim)?,
            mlp: Mlp {
                fc1: Linear::transformer(&sc.pp("mlp.fc1"), dim, dim * cfg.mlp_ratio, true)?,
                fc2: Linear::transformer(&sc.pp("mlp.fc2"), dim * cfg.mlp_ratio, dim, true)?,
            },
            norm2: LayerNorm::new(&sc.pp("norm2"), dim)?,
            cfg,
        })
    }

    pub fn attn(&self) -> &WindowAttention {
        &self.attn
    }

    pub fn mlp_out(&self) -> &Linear {
        &self.mlp.fc2
    }

    pub fn config(&self) -> &BlockConfig {
        &self.cfg
    }

    /// `(window, shift)` this block uses on a `height x width` grid.
    pub fn geometry(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        let (win, shift) = effective_window(height, width, self.cfg.window)?;
        Ok((win, if self.cfg.shifted { shift } else { 0 }))
    }

    pub fn forward(&self, x: &TokenGrid) -> Result<TokenGrid> {
        let (h, w) = (x.height, x.width);
        let (b, n, d) = x.data.dims3()?;
        if d != self.cfg.dim {
            return Err(Error::dim(format!(
                "block of width {} got {d}-wide tokens",
                self.cfg.dim
            )));
        }
        let (win, shift) = self.geometry(h, w)?;
        let mask = if shift > 0 {
            Some(shifted_window_mask(h, w, win, shift, x.data.device())?.to_dtype(x.data.dtype())?)
        } else {
            None
        };
        let grid = x.data.reshape((b, h, w, d))?;
        let shifted = cyclic_shift(&grid, shift, false)?;
        let windows = window_partition(&shifted, win)?;
        let attended = self.attn.forward(&windows, win, mask.as_ref())?;
        let merged = window_reverse(&attended, win, h, w)?;
        let attn_out = cyclic_shift(&merged, shift, true)?.reshape((b, n, d))?;
        let y = (&x.data + self.norm1.forward(&attn_out)?)?;
        let m = self.mlp.fc1.forward(&y)?.gelu_erf()?;
        let m = self.mlp.fc2.forward(&m)?;
        TokenGrid::new((&y + self.norm2.forward(&m)?)?, h, w)
    }
}

/// A run of Swin V2 blocks alternating plain and shifted windows
/// (W-MSA, SW-MSA, W-MSA, ...).
#[derive(Debug, Clone)]
pub struct SwinStage {
    blocks: Vec<SwinV2Block>,
}

impl SwinStage {
    pub fn new(
        sc: &Scope,
        dim: usize,
        heads: usize,
        depth: usize,
        window: usize,
        cpb_hidden: usize,
        mlp_ratio: usize,
    ) -> Result<Self> {
        let blocks = (0..depth)
            .map(|i| {
                let cfg = BlockConfig {
                    dim,
                    heads,
                    window,
                    shifted: i % 2 == 1,
                    cpb_hidden,
                    mlp_ratio,
                };
                SwinV2Block::new(&sc.pp(format!("blocks.{i}")), cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks })
    }

    pub fn depth(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[SwinV2Block] {
        &self.blocks
    }

    pub fn forward(&self, x: &TokenGrid) -> Result<TokenGrid> {
        let mut t = x.clone();
        for b in &self.blocks {
            t = b.forward(&t)?;
        }
        Ok(t)
    }

    /// Runs the stage on a `[B, C, H, W]` feature map.
    pub fn forward_map(&self, x: &Tensor) -> Result<Tensor> {
        self.forward(&TokenGrid::from_map(x)?)?.to_map()
    }
}
