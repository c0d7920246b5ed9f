use image::{GenericImageView, RgbImage};

use super::mask::BinaryMask;
use super::pair::BitemporalPair;
use crate::error::{Error, Result};

fn crop_mask(m: &BinaryMask, x0: u32, y0: u32, size: u32) -> BinaryMask {
    let data = (y0..y0 + size)
        .flat_map(|y| (x0..x0 + size).map(move |x| (x, y)))
        .map(|(x, y)| m.get(x, y))
        .collect();
    BinaryMask::new(size, size, data).expect("crop of a valid mask")
}

fn crop(img: &RgbImage, x0: u32, y0: u32, size: u32) -> RgbImage {
    img.view(x0, y0, size, size).to_image()
}

/// Cuts a pair into non-overlapping `tile x tile` pairs in row-major order,
/// named `<name>_r<row>_c<col>`. Incomplete tiles along the right and bottom
/// edges are dropped with a warning.
pub fn tile_pair(pair: &BitemporalPair, tile: u32) -> Result<Vec<BitemporalPair>> {
    if tile == 0 {
        return Err(Error::config("tile size must be positive"));
    }
    let (w, h) = pair.dimensions();
    let (cols, rows) = (w / tile, h / tile);
    if rows == 0 || cols == 0 {
        log::warn!(
            "{}: {w}x{h} is smaller than tile {tile}; no tiles produced",
            pair.name
        );
        return Ok(Vec::new());
    }
    if w % tile != 0 || h % tile != 0 {
        log::warn!(
            "{}: dropping {}x{} px of partial tiles",
            pair.name,
            w % tile,
            h % tile
        );
    }
    let mut out = Vec::with_capacity((rows * cols) as usize);
    for r in 0..rows {
        for c in 0..cols {
            let (x0, y0) = (c * tile, r * tile);
            out.push(BitemporalPair::new(
                format!("{}_r{r}_c{c}", pair.name),
                crop(&pair.a, x0, y0, tile),
                crop(&pair.b, x0, y0, tile),
                pair.label.as_ref().map(|l| crop_mask(l, x0, y0, tile)),
            )?);
        }
    }
    Ok(out)
}
