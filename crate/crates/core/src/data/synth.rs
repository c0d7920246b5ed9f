use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::DatasetLayout;
use super::mask::BinaryMask;
use super::pair::BitemporalPair;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Rectangle,
    Ellipse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextureSpec {
    /// Amplitude of the smooth background pattern, in 8-bit levels.
    pub pattern_amplitude: f64,
    /// Per-pixel noise amplitude of the background.
    pub noise: u8,
    /// Largest per-channel difference between the two dates outside changed
    /// shapes (illumination-like jitter).
    pub jitter: u8,
    /// Per-channel difference up to which two pixels count as unchanged;
    /// must be at least `jitter`.
    pub tolerance: u8,
}

impl Default for TextureSpec {
    fn default() -> Self {
        Self {
            pattern_amplitude: 40.0,
            noise: 12,
            jitter: 6,
            tolerance: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub size: u32,
    pub pairs: usize,
    /// Target ratio of changed to unchanged pixels over the batch.
    pub change_ratio: f64,
    /// Most change shapes drawn per pair; 0 gives unchanged pairs.
    pub max_shapes: usize,
    /// Shapes drawn identically into both dates.
    pub static_shapes: usize,
    pub shape_kinds: Vec<ShapeKind>,
    pub texture: TextureSpec,
    /// Fractions of pairs assigned to the val and test manifests; the rest
    /// goes to train.
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            size: 64,
            pairs: 8,
            change_ratio: 0.147,
            max_shapes: 12,
            static_shapes: 4,
            shape_kinds: vec![ShapeKind::Rectangle, ShapeKind::Ellipse],
            texture: TextureSpec::default(),
            val_fraction: 0.0,
            test_fraction: 0.0,
        }
    }
}

/// Attempts per pair at placing shapes before giving up.
const MAX_ATTEMPTS: usize = 400;
/// Accepted relative deviation of a pair's changed area from its target.
const AREA_SLACK: f64 = 0.08;

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size < 8 {
            return Err(Error::config("synthetic images must be at least 8 px wide"));
        }
        if !(self.change_ratio >= 0.0 && self.change_ratio.is_finite()) {
            return Err(Error::config("change ratio must be a non-negative number"));
        }
        if self.shape_kinds.is_empty() {
            return Err(Error::config("at least one shape kind is required"));
        }
        if self.texture.jitter > self.texture.tolerance || self.texture.tolerance >= 127 {
            return Err(Error::config("need jitter <= tolerance < 127"));
        }
        let (v, t) = (self.val_fraction, self.test_fraction);
        if !(v >= 0.0 && t >= 0.0 && v + t <= 1.0) {
            return Err(Error::config("split fractions must be non-negative and sum to at most 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Shape {
    kind: ShapeKind,
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
}

impl Shape {
    fn contains(&self, x: u32, y: u32) -> bool {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let (dx, dy) = ((px - self.cx) / self.rx, (py - self.cy) / self.ry);
        match self.kind {
            ShapeKind::Rectangle => dx.abs() <= 1.0 && dy.abs() <= 1.0,
            ShapeKind::Ellipse => dx * dx + dy * dy <= 1.0,
        }
    }

    fn mask(&self, size: u32) -> Vec<bool> {
        (0..size)
            .flat_map(|y| (0..size).map(move |x| (x, y)))
            .map(|(x, y)| self.contains(x, y))
            .collect()
    }
}

fn random_shape(rng: &mut ChaCha8Rng, kinds: &[ShapeKind], size: u32, max_area: f64) -> Shape {
    let s = size as f64;
    let kind = kinds[rng.random_range(0..kinds.len())];
    // half-extent bounded by the remaining area and by a quarter of the image
    let cap = (max_area.max(4.0).sqrt() / 2.0).min(s / 4.0).max(1.5);
    let rx = rng.random_range(1.5..=cap.max(1.5 + 1e-9));
    let ry = (rx * rng.random_range(0.5..2.0)).clamp(1.5, s / 4.0);
    Shape {
        kind,
        cx: rng.random_range(0.0..s),
        cy: rng.random_range(0.0..s),
        rx,
        ry,
    }
}

fn random_color(rng: &mut ChaCha8Rng) -> [u8; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn background(rng: &mut ChaCha8Rng, size: u32, tex: &TextureSpec) -> RgbImage {
    let base = [
        rng.random_range(60.0..190.0),
        rng.random_range(60.0..190.0),
        rng.random_range(60.0..190.0),
    ];
    let waves: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.02..0.2),
                rng.random_range(0.02..0.2),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let mut img = RgbImage::new(size, size);
    for (x, y, p) in img.enumerate_pixels_mut() {
        let pattern: f64 = waves
            .iter()
            .map(|(fx, fy, ph)| (fx * x as f64 + fy * y as f64 + ph).sin())
            .sum::<f64>()
            / 3.0;
        for c in 0..3 {
            let noise = if tex.noise > 0 {
                rng.random_range(-(tex.noise as f64)..=tex.noise as f64)
            } else {
                0.0
            };
            p.0[c] = (base[c] + tex.pattern_amplitude * pattern + noise).round().clamp(0.0, 255.0) as u8;
        }
    }
    img
}

fn paint(img: &mut RgbImage, mask: &[bool], color: [u8; 3]) {
    let w = img.width();
    for (k, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        img.put_pixel(k as u32 % w, k as u32 / w, Rgb(color));
    }
}

fn max_channel_diff(a: &Rgb<u8>, b: &Rgb<u8>) -> u8 {
    (0..3).map(|c| a.0[c].abs_diff(b.0[c])).max().unwrap()
}

/// Generates pair `index` of the spec. Depends only on `(spec, index)`.
pub fn synth_pair(spec: &SynthSpec, index: usize) -> Result<BitemporalPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let size = spec.size;
    let n = (size * size) as usize;
    let tex = &spec.texture;

    let mut a = background(&mut rng, size, tex);
    for _ in 0..spec.static_shapes {
        let s = random_shape(&mut rng, &spec.shape_kinds, size, n as f64 / 16.0);
        paint(&mut a, &s.mask(size), random_color(&mut rng));
    }
    let mut b = a.clone();
    if tex.jitter > 0 {
        let j = tex.jitter as i16;
        for p in b.pixels_mut() {
            for c in 0..3 {
                p.0[c] = (p.0[c] as i16 + rng.random_range(-j..=j)).clamp(0, 255) as u8;
            }
        }
    }

    let mut changed = vec![false; n];
    if spec.max_shapes > 0 && spec.change_ratio > 0.0 {
        // jitter each pair's target a little so pairs differ; the batch mean
        // stays on target
        let fraction = spec.change_ratio / (1.0 + spec.change_ratio);
        let target = fraction * n as f64 * rng.random_range(0.9..1.1);
        let mut area = 0usize;
        let mut shapes = 0usize;
        let mut attempts = 0usize;
        while (area as f64) < target * (1.0 - AREA_SLACK) {
            if attempts == MAX_ATTEMPTS || shapes == spec.max_shapes {
                return Err(Error::Generation(format!(
                    "pair {index}: reached {area} of {target:.0} changed pixels with {shapes} shapes \
                     after {attempts} attempts"
                )));
            }
            attempts += 1;
            let remaining = target - area as f64;
            let shape = random_shape(&mut rng, &spec.shape_kinds, size, remaining);
            let m = shape.mask(size);
            let new_area = changed.iter().zip(&m).filter(|(c, s)| **c || **s).count();
            if new_area == area || new_area as f64 > target * (1.0 + AREA_SLACK) {
                continue;
            }
            match rng.random_range(0..3) {
                0 => paint(&mut b, &m, random_color(&mut rng)),
                1 => paint(&mut a, &m, random_color(&mut rng)),
                _ => {
                    paint(&mut a, &m, random_color(&mut rng));
                    paint(&mut b, &m, random_color(&mut rng));
                }
            }
            for (c, s) in changed.iter_mut().zip(&m) {
                *c |= *s;
            }
            area = new_area;
            shapes += 1;
        }
    }

    // make every changed pixel differ by more than the tolerance
    let tol = tex.tolerance;
    for (k, _) in changed.iter().enumerate().filter(|(_, &c)| c) {
        let (x, y) = (k as u32 % size, k as u32 / size);
        let pa = *a.get_pixel(x, y);
        let pb = b.get_pixel_mut(x, y);
        if max_channel_diff(&pa, pb) <= tol {
            let v = pa.0[0];
            let step = tol + 1 + (tol + 1) / 2;
            pb.0[0] = if v >= 128 { v - step } else { v + step };
        }
    }

    let label = BinaryMask::new(size, size, changed.iter().map(|&c| u8::from(c)).collect())?;
    BitemporalPair::new(format!("synth_{index:05}"), a, b, Some(label))
}

/// All pairs of the spec, generated in parallel; the result is independent
/// of scheduling.
pub fn synth_pairs(spec: &SynthSpec) -> Result<Vec<BitemporalPair>> {
    spec.validate()?;
    (0..spec.pairs).into_par_iter().map(|i| synth_pair(spec, i)).collect()
}

/// Ratio of changed to unchanged pixels over a set of labelled pairs.
pub fn change_ratio(pairs: &[BitemporalPair]) -> f64 {
    let (mut ch, mut total) = (0usize, 0usize);
    for p in pairs {
        if let Some(l) = &p.label {
            ch += l.count_ones();
            total += l.data().len();
        }
    }
    if total == ch {
        f64::INFINITY
    } else {
        ch as f64 / (total - ch) as f64
    }
}

/// Generates the spec's pairs and writes them as a dataset under `root`.
pub fn synth_dataset(spec: &SynthSpec, root: &Path) -> Result<DatasetLayout> {
    let pairs = synth_pairs(spec)?;
    let layout = DatasetLayout::create(root)?;
    for p in &pairs {
        layout.write_pair(p)?;
    }
    let names: Vec<String> = pairs.iter().map(|p| format!("{}.png", p.name)).collect();
    let n = names.len();
    let n_test = (spec.test_fraction * n as f64).round() as usize;
    let n_val = ((spec.val_fraction * n as f64).round() as usize).min(n - n_test);
    let n_train = n - n_val - n_test;
    layout.write_manifest("train", &names[..n_train])?;
    layout.write_manifest("val", &names[n_train..n_train + n_val])?;
    layout.write_manifest("test", &names[n_train + n_val..])?;
    Ok(layout)
}
