use image::{Rgb, RgbImage};

use super::mask::BinaryMask;
use crate::error::{Error, Result};

pub const TP_COLOR: Rgb<u8> = Rgb([255, 255, 255]);
pub const TN_COLOR: Rgb<u8> = Rgb([0, 0, 0]);
pub const FP_COLOR: Rgb<u8> = Rgb([0, 255, 0]);
pub const FN_COLOR: Rgb<u8> = Rgb([255, 0, 0]);

/// Error map of a prediction: true positives white, true negatives black,
/// false positives green, false negatives red.
pub fn colorize(pred: &BinaryMask, label: &BinaryMask) -> Result<RgbImage> {
    if (pred.width(), pred.height()) != (label.width(), label.height()) {
        return Err(Error::dim(format!(
            "prediction is {}x{}, label {}x{}",
            pred.width(),
            pred.height(),
            label.width(),
            label.height()
        )));
    }
    Ok(RgbImage::from_fn(pred.width(), pred.height(), |x, y| {
        match (pred.get(x, y), label.get(x, y)) {
            (1, 1) => TP_COLOR,
            (0, 0) => TN_COLOR,
            (1, 0) => FP_COLOR,
            _ => FN_COLOR,
        }
    }))
}
