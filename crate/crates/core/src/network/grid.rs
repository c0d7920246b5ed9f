use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, SIDE_NODE_DEPTH};

/// Position `(i, j)` of a node in the dense grid: row `i` in 1..=4 (stride
/// `4 * 2^(i-1)`), column `j` in 0..=3. Only positions with `i + j <= 4`
/// exist, so an index outside the grid cannot be constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(u8, u8)", into = "(u8, u8)")]
pub struct GridIndex {
    i: u8,
    j: u8,
}

impl GridIndex {
    pub fn new(i: usize, j: usize) -> Option<Self> {
        if (1..=4).contains(&i) && j <= 3 && i + j <= 4 {
            Some(Self {
                i: i as u8,
                j: j as u8,
            })
        } else {
            None
        }
    }

    pub fn i(&self) -> usize {
        self.i as usize
    }

    pub fn j(&self) -> usize {
        self.j as usize
    }

    /// Spatial stride of the node's features relative to the input.
    pub fn stride(&self) -> usize {
        4 << (self.i - 1)
    }

    /// All grid positions, column by column, rows top-down.
    pub fn all() -> Vec<GridIndex> {
        (0..4)
            .flat_map(|j| (1..=4 - j).map(move |i| GridIndex::new(i, j).unwrap()))
            .collect()
    }

    /// Swin blocks of the node under `cfg`.
    pub fn depth(&self, cfg: &ModelConfig) -> usize {
        match (self.i, self.j) {
            (i, 0) => cfg.depths[i as usize - 1],
            (3, 1) => cfg.depths[4],
            (2, 2) => cfg.depths[5],
            (1, 3) => cfg.depths[6],
            _ => SIDE_NODE_DEPTH,
        }
    }
}

impl TryFrom<(u8, u8)> for GridIndex {
    type Error = String;
    fn try_from((i, j): (u8, u8)) -> Result<Self, String> {
        GridIndex::new(i as usize, j as usize).ok_or_else(|| format!("({i},{j}) is not a grid node"))
    }
}

impl From<GridIndex> for (u8, u8) {
    fn from(g: GridIndex) -> Self {
        (g.i, g.j)
    }
}

impl fmt::Display for GridIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}
