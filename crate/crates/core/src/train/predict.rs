use std::path::Path;

use image::{GrayImage, Luma, RgbImage};

use super::eval::predict_maps;
use crate::data::{colorize, write_gray, write_mask, write_rgb, BinaryMask, BitemporalPair};
use crate::error::{Error, Result};
use crate::network::SwinV2DNet;
use crate::nn::ParamStore;

#[derive(Debug, Clone)]
pub struct Prediction {
    /// Change probability scaled to 0..=255.
    pub probability: GrayImage,
    pub probability_raw: Vec<f32>,
    pub mask: BinaryMask,
    /// Error map against the label, when one was given.
    pub colored: Option<RgbImage>,
}

pub fn predict(model: &SwinV2DNet, store: &ParamStore, pair: &BitemporalPair, threshold: f64) -> Result<Prediction> {
    let (w, h) = pair.dimensions();
    if w % 32 != 0 || h % 32 != 0 || w == 0 || h == 0 {
        return Err(Error::dim(format!(
            "{}: {w}x{h} is not divisible by 32; cut it into tiles first (`tile --size 256`)",
            pair.name
        )));
    }
    let cm = predict_maps(model, &[pair], store)?.remove(0);
    let raw: Vec<f32> = cm.flatten_all()?.to_dtype(candle_core::DType::F32)?.to_vec1()?;
    let probability = GrayImage::from_fn(w, h, |x, y| {
        Luma([(raw[(y * w + x) as usize] * 255.0).round().clamp(0.0, 255.0) as u8])
    });
    let mask = BinaryMask::threshold(&cm, threshold)?;
    let colored = pair.label.as_ref().map(|l| colorize(&mask, l)).transpose()?;
    Ok(Prediction {
        probability,
        probability_raw: raw,
        mask,
        colored,
    })
}

/// Writes `<name>_prob.png`, `<name>_mask.png` and, with a label,
/// `<name>_color.png` into `dir`.
pub fn write_prediction(pred: &Prediction, dir: &Path, name: &str) -> Result<()> {
    write_gray(&pred.probability, &dir.join(format!("{name}_prob.png")))?;
    write_mask(&pred.mask, &dir.join(format!("{name}_mask.png")))?;
    if let Some(c) = &pred.colored {
        write_rgb(c, &dir.join(format!("{name}_color.png")))?;
    }
    Ok(())
}
