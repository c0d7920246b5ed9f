use candle_core::{Device, Tensor};

use crate::error::{Error, Result};

/// Splits a channels-last grid `[B, H, W, C]` into non-overlapping square
/// windows, returned as `[B * (H/win) * (W/win), win*win, C]` in row-major
/// window order.
pub fn window_partition(x: &Tensor, window: usize) -> Result<Tensor> {
    let (b, h, w, c) = x.dims4()?;
    if window == 0 {
        return Err(Error::config("window size must be positive"));
    }
    if h % window != 0 {
        return Err(Error::dim(format!(
            "height {h} is not divisible by window {window}"
        )));
    }
    if w % window != 0 {
        return Err(Error::dim(format!(
            "width {w} is not divisible by window {window}"
        )));
    }
    let (nh, nw) = (h / window, w / window);
    Ok(x
        .reshape(vec![b, nh, window, nw, window, c])?
        .permute([0, 1, 3, 2, 4, 5])?
        .contiguous()?
        .reshape((b * nh * nw, window * window, c))?)
}

/// Exact inverse of [`window_partition`].
pub fn window_reverse(windows: &Tensor, window: usize, height: usize, width: usize) -> Result<Tensor> {
    let (count, n, c) = windows.dims3()?;
    if window == 0 || n != window * window {
        return Err(Error::dim(format!(
            "windows hold {n} tokens, expected {window}x{window}"
        )));
    }
    if height % window != 0 || width % window != 0 {
        return Err(Error::dim(format!(
            "grid {height}x{width} is not tiled by window {window}"
        )));
    }
    let (nh, nw) = (height / window, width / window);
    if count % (nh * nw) != 0 {
        return Err(Error::dim(format!(
            "{count} windows do not match a {height}x{width} grid ({} windows per image)",
            nh * nw
        )));
    }
    let b = count / (nh * nw);
    Ok(windows
        .reshape(vec![b, nh, nw, window, window, c])?
        .permute([0, 1, 3, 2, 4, 5])?
        .contiguous()?
        .reshape((b, height, width, c))?)
}

/// Cyclic shift of a `[B, H, W, C]` grid by `(-shift, -shift)` (or back
/// when `reverse`).
pub fn cyclic_shift(x: &Tensor, shift: usize, reverse: bool) -> Result<Tensor> {
    if shift == 0 {
        return Ok(x.clone());
    }
    let s = if reverse { shift as i32 } else { -(shift as i32) };
    Ok(x.roll(s, 1)?.roll(s, 2)?)
}

/// Additive logit mask for shifted windows, `[nW, N, N]`: 0 for token pairs
/// that came from the same region before the cyclic shift, `-100` for pairs
/// that were wrapped together.
pub fn shifted_window_mask(
    height: usize,
    width: usize,
    window: usize,
    shift: usize,
    device: &Device,
) -> Result<Tensor> {
    let region = |len: usize, i: usize| -> usize {
        if i < len - window {
            0
        } else if i < len - shift {
            1
        } else {
            2
        }
    };
    let (nh, nw) = (height / window, width / window);
    let n = window * window;
    let mut mask = vec![0f32; nh * nw * n * n];
    for wy in 0..nh {
        for wx in 0..nw {
            let base = (wy * nw + wx) * n * n;
            let ids: Vec<usize> = (0..n)
                .map(|t| {
                    let y = wy * window + t / window;
                    let x = wx * window + t % window;
                    region(height, y) * 3 + region(width, x)
                })
                .collect();
            for i in 0..n {
                for j in 0..n {
                    if ids[i] != ids[j] {
                        mask[base + i * n + j] = -100.0;
                    }
                }
            }
        }
    }
    Ok(Tensor::from_vec(mask, (nh * nw, n, n), device)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::DType;

    fn ramp(dims: (usize, usize, usize, usize)) -> Tensor {
        let n = dims.0 * dims.1 * dims.2 * dims.3;
        Tensor::arange(0f32, n as f32, &Device::Cpu)
            .unwrap()
            .reshape(dims)
            .unwrap()
    }

    #[test]
    fn partition_counts_windows() {
        let x = ramp((1, 8, 8, 1));
        let w = window_partition(&x, 4).unwrap();
        assert_eq!(w.dims(), &[4, 16, 1]);
        // first window is the top-left 4x4 block in row-major order
        let first: Vec<f32> = w.get(0).unwrap().flatten_all().unwrap().to_vec1().unwrap();
        assert_eq!(&first[..5], &[0.0, 1.0, 2.0, 3.0, 8.0]);
    }

    #[test]
    fn partition_rejects_indivisible() {
        let x = ramp((1, 8, 8, 1));
        let err = window_partition(&x, 3).unwrap_err();
        assert!(matches!(err, Error::Dimension(ref m) if m.contains("height")));
        let x = ramp((1, 8, 6, 1));
        let err = window_partition(&x, 4).unwrap_err();
        assert!(matches!(err, Error::Dimension(ref m) if m.contains("width")));
    }

    #[test]
    fn single_window_is_reshape() {
        let x = ramp((2, 4, 4, 3));
        let w = window_partition(&x, 4).unwrap();
        let direct = x.reshape((2, 16, 3)).unwrap();
        let diff = (w - direct).unwrap().abs().unwrap().sum_all().unwrap();
        assert_eq!(diff.to_scalar::<f32>().unwrap(), 0.0);
        let back = window_reverse(&window_partition(&x, 4).unwrap(), 4, 4, 4).unwrap();
        let diff = (back.to_dtype(DType::F64).unwrap() - x.to_dtype(DType::F64).unwrap())
            .unwrap()
            .abs()
            .unwrap()
            .sum_all()
            .unwrap();
        assert_eq!(diff.to_scalar::<f64>().unwrap(), 0.0);
    }

    #[test]
    fn reverse_rejects_mismatched_height() {
        let x = ramp((1, 8, 8, 2));
        let w = window_partition(&x, 4).unwrap();
        assert!(matches!(window_reverse(&w, 4, 12, 8), Err(Error::Dimension(_))));
        assert!(matches!(window_reverse(&w, 4, 6, 8), Err(Error::Dimension(_))));
    }

    #[test]
    fn shift_roundtrip() {
        let x = ramp((1, 8, 8, 2));
        let s = cyclic_shift(&x, 2, false).unwrap();
        let back = cyclic_shift(&s, 2, true).unwrap();
        let diff = (back - &x).unwrap().abs().unwrap().sum_all().unwrap();
        assert_eq!(diff.to_scalar::<f32>().unwrap(), 0.0);
        // element (0,0) after the shift comes from (2,2)
        let v: Vec<f32> = s.get(0).unwrap().get(0).unwrap().get(0).unwrap().to_vec1().unwrap();
        assert_eq!(v[0], ((2 * 8 + 2) * 2) as f32);
    }

    #[test]
    fn mask_blocks_wrapped_pairs_only() {
        let m = shifted_window_mask(8, 8, 4, 2, &Device::Cpu).unwrap();
        assert_eq!(m.dims(), &[4, 16, 16]);
        let v: Vec<Vec<Vec<f32>>> = m.to_vec3().unwrap();
        // the top-left window never wraps
        assert!(v[0].iter().flatten().all(|&x| x == 0.0));
        // the bottom-right window mixes four regions
        assert!(v[3].iter().flatten().any(|&x| x == -100.0));
        for w in &v {
            for i in 0..16 {
                assert_eq!(w[i][i], 0.0);
                for j in 0..16 {
                    assert_eq!(w[i][j], w[j][i]);
                }
            }
        }
    }
}
