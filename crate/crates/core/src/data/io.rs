use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use super::mask::BinaryMask;
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<DynamicImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    image::load_from_memory_with_format(&bytes, ImageFormat::Png).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads an 8-bit PNG as RGB (grey images are expanded).
pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    Ok(open(path)?.into_rgb8())
}

/// Reads a label PNG and thresholds it at 128.
pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    Ok(BinaryMask::from_gray(&open(path)?.into_luma8()))
}

fn save(img: &DynamicImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    img.save_with_format(path, ImageFormat::Png).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    save(&DynamicImage::ImageRgb8(img.clone()), path)
}

pub fn write_gray(img: &GrayImage, path: &Path) -> Result<()> {
    save(&DynamicImage::ImageLuma8(img.clone()), path)
}

/// Writes a mask as a `{0, 255}` single-channel PNG.
pub fn write_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    write_gray(&mask.to_gray(), path)
}
