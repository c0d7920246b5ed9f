//! Continuous position bias: a 2-layer MLP over log-spaced relative offsets.

use candle_core::{Device, Tensor};

use crate::error::Result;
use crate::nn::{Linear, Scope};

/// Maps a relative offset to log space, `sign(d) * ln(1 + |d|)` per axis.
pub fn log_spaced_coords(dx: i64, dy: i64) -> (f64, f64) {
    let f = |d: i64| (d.signum() as f64) * (1.0 + d.unsigned_abs() as f64).ln();
    (f(dx), f(dy))
}

/// Row of the offset table holding `(dx, dy)`; offsets range over
/// `-(window-1)..=(window-1)` on each axis, `dy` major.
pub fn offset_row(dx: i64, dy: i64, window: usize) -> usize {
    let span = 2 * window as i64 - 1;
    let off = window as i64 - 1;
    ((dy + off) * span + (dx + off)) as usize
}

/// `[(2w-1)^2, 2]` table of log-spaced `(dx, dy)` inputs for the MLP.
pub fn log_coord_table(window: usize, device: &Device) -> Result<Tensor> {
    let off = window as i64 - 1;
    let mut v = Vec::with_capacity((2 * window - 1).pow(2) * 2);
    for dy in -off..=off {
        for dx in -off..=off {
            let (x, y) = log_spaced_coords(dx, dy);
            v.push(x);
            v.push(y);
        }
    }
    let rows = v.len() / 2;
    Ok(Tensor::from_vec(v, (rows, 2), device)?)
}

/// For every (query, key) token pair in a window, the table row of their
/// offset. Flattened `[N * N]`.
pub fn relative_index(window: usize) -> Vec<u32> {
    let n = window * window;
    let mut idx = Vec::with_capacity(n * n);
    for m in 0..n {
        let (ym, xm) = ((m / window) as i64, (m % window) as i64);
        for k in 0..n {
            let (yk, xk) = ((k / window) as i64, (k % window) as i64);
            idx.push(offset_row(xm - xk, ym - yk, window) as u32);
        }
    }
    idx
}

/// Two-layer MLP (ReLU) from a log-spaced `(dx, dy)` offset to one bias per
/// head. The offset table is rebuilt for whatever window size is asked for,
/// so the same weights serve shrunken windows on small grids.
#[derive(Debug, Clone)]
pub struct PositionBiasNet {
    fc1: Linear,
    fc2: Linear,
    heads: usize,
}

impl PositionBiasNet {
    pub fn new(sc: &Scope, heads: usize, hidden: usize) -> Result<Self> {
        Ok(Self {
            fc1: Linear::transformer(&sc.pp("fc1"), 2, hidden, true)?,
            fc2: Linear::transformer(&sc.pp("fc2"), hidden, heads, false)?,
            heads,
        })
    }

    pub fn mlp(&self) -> (&Linear, &Linear) {
        (&self.fc1, &self.fc2)
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    /// MLP applied to arbitrary `[rows, 2]` log-spaced inputs.
    pub fn apply(&self, coords: &Tensor) -> Result<Tensor> {
        self.fc2.forward(&self.fc1.forward(coords)?.relu()?)
    }

    /// MLP output for every offset of a window, `[(2w-1)^2, heads]`.
    pub fn table(&self, window: usize) -> Result<Tensor> {
        let w = self.fc1.weight();
        let coords = log_coord_table(window, w.device())?.to_dtype(w.dtype())?;
        self.apply(&coords)
    }

    /// Per-head bias over window token pairs, `[heads, N, N]`.
    pub fn bias(&self, window: usize) -> Result<Tensor> {
        let n = window * window;
        let table = self.table(window)?;
        let index = Tensor::from_vec(relative_index(window), n * n, table.device())?;
        Ok(table
            .index_select(&index, 0)?
            .reshape((n, n, self.heads))?
            .permute((2, 0, 1))?
            .contiguous()?)
    }
}
