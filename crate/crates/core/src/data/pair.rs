use candle_core::{DType, Device, Tensor};
use image::RgbImage;

use super::mask::BinaryMask;
use crate::error::{Error, Result};

/// Co-registered pre-change (`a`) and post-change (`b`) images with an
/// optional change label.
#[derive(Debug, Clone, PartialEq)]
pub struct BitemporalPair {
    pub name: String,
    pub a: RgbImage,
    pub b: RgbImage,
    pub label: Option<BinaryMask>,
}

impl BitemporalPair {
    pub fn new(name: impl Into<String>, a: RgbImage, b: RgbImage, label: Option<BinaryMask>) -> Result<Self> {
        let name = name.into();
        if a.dimensions() != b.dimensions() {
            return Err(Error::dim(format!(
                "{name}: images are {:?} and {:?}",
                a.dimensions(),
                b.dimensions()
            )));
        }
        if let Some(l) = &label {
            if (l.width(), l.height()) != a.dimensions() {
                return Err(Error::dim(format!(
                    "{name}: label is {}x{}, images {:?}",
                    l.width(),
                    l.height(),
                    a.dimensions()
                )));
            }
        }
        Ok(Self { name, a, b, label })
    }

    /// `(width, height)`.
    pub fn dimensions(&self) -> (u32, u32) {
        self.a.dimensions()
    }
}

/// `[1, 3, H, W]` tensor with 8-bit values mapped to [-1, 1].
pub fn image_to_tensor(img: &RgbImage, dtype: DType, device: &Device) -> Result<Tensor> {
    let (w, h) = img.dimensions();
    let (w, h) = (w as usize, h as usize);
    let raw = img.as_raw();
    let mut v = vec![0f32; 3 * h * w];
    for c in 0..3 {
        for p in 0..h * w {
            v[c * h * w + p] = raw[3 * p + c] as f32 / 127.5 - 1.0;
        }
    }
    Ok(Tensor::from_vec(v, (1, 3, h, w), device)?.to_dtype(dtype)?)
}

/// Network-ready batch of a set of equally sized pairs.
#[derive(Debug, Clone)]
pub struct Batch {
    pub i1: Tensor,
    pub i2: Tensor,
    pub label: Option<Tensor>,
}

impl Batch {
    pub fn from_pairs(pairs: &[&BitemporalPair], dtype: DType, device: &Device) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Validation("cannot batch zero pairs".into()));
        }
        let dims = pairs[0].dimensions();
        if let Some(p) = pairs.iter().find(|p| p.dimensions() != dims) {
            return Err(Error::dim(format!(
                "{} is {:?}, batch is {:?}",
                p.name,
                p.dimensions(),
                dims
            )));
        }
        let stack = |f: &dyn Fn(&BitemporalPair) -> Result<Tensor>| -> Result<Tensor> {
            let ts = pairs.iter().map(|p| f(p)).collect::<Result<Vec<_>>>()?;
            Ok(Tensor::cat(&ts, 0)?)
        };
        let i1 = stack(&|p| image_to_tensor(&p.a, dtype, device))?;
        let i2 = stack(&|p| image_to_tensor(&p.b, dtype, device))?;
        let label = if pairs.iter().all(|p| p.label.is_some()) {
            Some(stack(&|p| p.label.as_ref().unwrap().to_tensor(dtype, device))?)
        } else {
            None
        };
        Ok(Self { i1, i2, label })
    }
}
