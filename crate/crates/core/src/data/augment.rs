use std::fmt;
use std::str::FromStr;

use image::{imageops, GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use super::mask::BinaryMask;
use super::pair::BitemporalPair;
use crate::error::{Error, Result};

/// One of the 8 symmetries of the square: an optional horizontal flip
/// followed by `quarter_turns` clockwise rotations by 90 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DihedralOp {
    quarter_turns: u8,
    flip: bool,
}

impl DihedralOp {
    pub const IDENTITY: Self = Self {
        quarter_turns: 0,
        flip: false,
    };

    pub fn new(quarter_turns: u8, flip: bool) -> Self {
        Self {
            quarter_turns: quarter_turns % 4,
            flip,
        }
    }

    pub fn rot90() -> Self {
        Self::new(1, false)
    }

    pub fn all() -> [Self; 8] {
        let mut out = [Self::IDENTITY; 8];
        for (k, op) in out.iter_mut().enumerate() {
            *op = Self::new((k % 4) as u8, k >= 4);
        }
        out
    }

    /// The op equivalent to applying `self` and then `next`.
    pub fn then(self, next: Self) -> Self {
        // F R^k = R^-k F
        let k1 = self.quarter_turns as i32;
        let k2 = next.quarter_turns as i32;
        let k = if next.flip { k2 - k1 } else { k2 + k1 };
        Self::new(k.rem_euclid(4) as u8, self.flip ^ next.flip)
    }

    pub fn inverse(self) -> Self {
        if self.flip {
            self
        } else {
            Self::new((4 - self.quarter_turns) % 4, false)
        }
    }

    pub fn apply_rgb(&self, img: &RgbImage) -> RgbImage {
        let mut out = if self.flip {
            imageops::flip_horizontal(img)
        } else {
            img.clone()
        };
        for _ in 0..self.quarter_turns {
            out = imageops::rotate90(&out);
        }
        out
    }

    pub fn apply_gray(&self, img: &GrayImage) -> GrayImage {
        let mut out = if self.flip {
            imageops::flip_horizontal(img)
        } else {
            img.clone()
        };
        for _ in 0..self.quarter_turns {
            out = imageops::rotate90(&out);
        }
        out
    }

    pub fn apply_mask(&self, m: &BinaryMask) -> BinaryMask {
        BinaryMask::from_gray(&self.apply_gray(&m.to_gray()))
    }
}

impl fmt::Display for DihedralOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let deg = 90 * self.quarter_turns as u32;
        if self.flip {
            write!(f, "flip-rot{deg}")
        } else {
            write!(f, "rot{deg}")
        }
    }
}

impl FromStr for DihedralOp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (flip, rest) = match s.strip_prefix("flip-") {
            Some(r) => (true, r),
            None => (false, s),
        };
        let deg: u32 = rest
            .strip_prefix("rot")
            .and_then(|d| d.parse().ok())
            .filter(|d| d % 90 == 0 && *d < 360)
            .ok_or_else(|| Error::config(format!("unknown augmentation op `{s}`")))?;
        Ok(Self::new((deg / 90) as u8, flip))
    }
}

impl TryFrom<String> for DihedralOp {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DihedralOp> for String {
    fn from(op: DihedralOp) -> String {
        op.to_string()
    }
}

/// Applies the same symmetry to both images and the label.
pub fn augment(pair: &BitemporalPair, op: DihedralOp) -> BitemporalPair {
    BitemporalPair {
        name: pair.name.clone(),
        a: op.apply_rgb(&pair.a),
        b: op.apply_rgb(&pair.b),
        label: pair.label.as_ref().map(|l| op.apply_mask(l)),
    }
}
