use candle_core::{DType, Device, Tensor};
use image::{GrayImage, Luma};

use crate::error::{Error, Result};

/// Threshold separating change from no change in 8-bit label images.
pub const LABEL_THRESHOLD: u8 = 128;

/// Row-major binary mask with values in {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != (width as usize) * (height as usize) {
            return Err(Error::dim(format!(
                "{} mask values do not fill {width}x{height}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(Error::Validation(format!("mask value {v} is not binary")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; (width * height) as usize],
        }
    }

    /// Values `>= 128` become 1.
    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.pixels().map(|p| u8::from(p.0[0] >= LABEL_THRESHOLD)).collect(),
        }
    }

    /// `{0, 255}` 8-bit image.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| Luma([self.get(x, y) * 255]))
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[(y * self.width + x) as usize]
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// Mask from a `[1, 1, H, W]` or `[H, W]` tensor of exact 0/1 values.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let dims = t.dims();
        let (h, w) = match dims {
            [1, 1, h, w] | [h, w] => (*h, *w),
            _ => return Err(Error::dim(format!("expected a single-map tensor, got {dims:?}"))),
        };
        let v = t.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
        let data = v
            .iter()
            .map(|&x| {
                if x == 0.0 || x == 1.0 {
                    Ok(x as u8)
                } else {
                    Err(Error::Validation(format!("mask value {x} is not binary")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(w as u32, h as u32, data)
    }

    /// Binarises a probability tensor at `threshold` (`p >= threshold` is 1).
    pub fn threshold(prob: &Tensor, threshold: f64) -> Result<Self> {
        let bin = prob.ge(threshold)?.to_dtype(DType::F32)?;
        Self::from_tensor(&bin)
    }

    /// `[1, 1, H, W]` tensor.
    pub fn to_tensor(&self, dtype: DType, device: &Device) -> Result<Tensor> {
        let v: Vec<f32> = self.data.iter().map(|&x| x as f32).collect();
        Ok(Tensor::from_vec(v, (1, 1, self.height as usize, self.width as usize), device)?
            .to_dtype(dtype)?)
    }
}
