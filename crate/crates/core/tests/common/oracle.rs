//! Plain-loop reference implementations over `[B, C, H, W]` f64 arrays.

use candle_core::Tensor;
use swinv2dnet::network::NetworkOutputs;

use super::vec_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct Arr {
    pub dims: [usize; 4],
    pub data: Vec<f64>,
}

impl Arr {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_tensor(t: &Tensor) -> Self {
        let d = t.dims();
        Self {
            dims: [d[0], d[1], d[2], d[3]],
            data: vec_f64(t),
        }
    }

    pub fn idx(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        let [_, cc, h, w] = self.dims;
        ((b * cc + c) * h + y) * w + x
    }

    pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.idx(b, c, y, x)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn add(&self, o: &Arr) -> Self {
        assert_eq!(self.dims, o.dims);
        Self {
            dims: self.dims,
            data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect(),
        }
    }

    /// Channel slice `[c0, c0 + n)`.
    pub fn channels(&self, c0: usize, n: usize) -> Self {
        let [b, _, h, w] = self.dims;
        let mut out = Arr::zeros([b, n, h, w]);
        for bi in 0..b {
            for c in 0..n {
                for y in 0..h {
                    for x in 0..w {
                        let i = out.idx(bi, c, y, x);
                        out.data[i] = self.at(bi, c0 + c, y, x);
                    }
                }
            }
        }
        out
    }

    pub fn cat(parts: &[Arr]) -> Self {
        let [b, _, h, w] = parts[0].dims;
        let c: usize = parts.iter().map(|p| p.dims[1]).sum();
        let mut out = Arr::zeros([b, c, h, w]);
        let mut c0 = 0;
        for p in parts {
            for bi in 0..b {
                for ci in 0..p.dims[1] {
                    for y in 0..h {
                        for x in 0..w {
                            let i = out.idx(bi, c0 + ci, y, x);
                            out.data[i] = p.at(bi, ci, y, x);
                        }
                    }
                }
            }
            c0 += p.dims[1];
        }
        out
    }

    pub fn max_abs_diff(&self, t: &Tensor) -> f64 {
        let o = Arr::from_tensor(t);
        assert_eq!(self.dims, o.dims);
        self.data.iter().zip(&o.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Zero-padded "same" convolution, stride 1. `weight`: `[O, I, k, k]`.
pub fn conv2d(x: &Arr, weight: &Tensor, bias: Option<&Tensor>) -> Arr {
    let wd = weight.dims();
    let (o, i, k) = (wd[0], wd[1], wd[2]);
    let w = vec_f64(weight);
    let bv = bias.map(vec_f64);
    let [b, c, h, wi] = x.dims;
    assert_eq!(c, i);
    let pad = (k / 2) as isize;
    let mut out = Arr::zeros([b, o, h, wi]);
    for bi in 0..b {
        for oc in 0..o {
            for y in 0..h {
                for xx in 0..wi {
                    let mut s = bv.as_ref().map_or(0.0, |v| v[oc]);
                    for ic in 0..i {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = y as isize + ky as isize - pad;
                                let sx = xx as isize + kx as isize - pad;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= wi as isize {
                                    continue;
                                }
                                s += w[((oc * i + ic) * k + ky) * k + kx] * x.at(bi, ic, sy as usize, sx as usize);
                            }
                        }
                    }
                    let idx = out.idx(bi, oc, y, xx);
                    out.data[idx] = s;
                }
            }
        }
    }
    out
}

/// Batch normalisation with batch statistics (biased variance), eps 1e-5.
pub fn batch_norm_train(x: &Arr, gamma: &[f64], beta: &[f64]) -> Arr {
    let [b, c, h, w] = x.dims;
    let n = (b * h * w) as f64;
    let mut out = x.clone();
    for ci in 0..c {
        let mut vals = Vec::new();
        for bi in 0..b {
            for y in 0..h {
                for xx in 0..w {
                    vals.push(x.at(bi, ci, y, xx));
                }
            }
        }
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        for bi in 0..b {
            for y in 0..h {
                for xx in 0..w {
                    let i = x.idx(bi, ci, y, xx);
                    out.data[i] = (x.data[i] - mean) / (var + 1e-5).sqrt() * gamma[ci] + beta[ci];
                }
            }
        }
    }
    out
}

/// `[B, C]` global average (or max) over space.
pub fn global_pool(x: &Arr, max: bool) -> Vec<Vec<f64>> {
    let [b, c, h, w] = x.dims;
    (0..b)
        .map(|bi| {
            (0..c)
                .map(|ci| {
                    let it = (0..h).flat_map(|y| (0..w).map(move |xx| (y, xx)));
                    if max {
                        it.map(|(y, xx)| x.at(bi, ci, y, xx)).fold(f64::NEG_INFINITY, f64::max)
                    } else {
                        it.map(|(y, xx)| x.at(bi, ci, y, xx)).sum::<f64>() / (h * w) as f64
                    }
                })
                .collect()
        })
        .collect()
}

/// `y = W x (+ b)` with `W`: `[out, in]`.
pub fn linear(x: &[f64], w: &Tensor, b: Option<&Tensor>) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = w.to_vec2().unwrap();
    let bv = b.map(vec_f64);
    rows.iter()
        .enumerate()
        .map(|(o, r)| r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + bv.as_ref().map_or(0.0, |v| v[o]))
        .collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

pub fn bce_ref(p: &[f64], y: &[f64]) -> f64 {
    let n = p.len() as f64;
    p.iter()
        .zip(y)
        .map(|(p, y)| -(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
        .sum::<f64>()
        / n
}

pub fn dice_ref(p: &[f64], y: &[f64]) -> f64 {
    let inter: f64 = p.iter().zip(y).map(|(a, b)| a * b).sum();
    1.0 - (2.0 * inter + 1.0) / (p.iter().sum::<f64>() + y.iter().sum::<f64>() + 1.0)
}

pub fn region_ref(p: &[f64], t: &[f64], mask: &[bool]) -> f64 {
    let idx: Vec<usize> = (0..p.len()).filter(|&i| mask[i]).collect();
    if idx.is_empty() {
        return 0.0;
    }
    let pp: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
    let tt: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
    bce_ref(&pp, &tt)
}

/// Five supervised terms plus the two consistency terms, computed from plain
/// vectors.
pub fn seven_term_reference(out: &NetworkOutputs, y: &[f64]) -> f64 {
    let term = |m: &Tensor| {
        let p = vec_f64(m);
        bce_ref(&p, y) + 0.5 * dice_ref(&p, y)
    };
    let supervised: f64 = std::iter::once(&out.cm).chain(&out.ds).map(term).sum();
    let p1 = vec_f64(out.pm1.as_ref().unwrap());
    let p2 = vec_f64(out.pm2.as_ref().unwrap());
    let changed: Vec<bool> = y.iter().map(|v| *v == 1.0).collect();
    let unchanged: Vec<bool> = changed.iter().map(|c| !c).collect();
    let pl = |p: &[f64]| p.iter().map(|v| if *v >= 0.5 { 1.0 } else { 0.0 }).collect::<Vec<_>>();
    let flip = |p: &[f64]| p.iter().map(|v| 1.0 - v).collect::<Vec<_>>();
    let ssl = |a: &[f64], b: &[f64]| {
        region_ref(a, &pl(b), &unchanged) + region_ref(a, &flip(&pl(b)), &changed)
    };
    supervised + 0.25 * (ssl(&p1, &p2) + ssl(&p2, &p1))
}
