use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use super::cbam::Cbam;
use super::grounding::GroundingTransformer;
use super::res2net::Res2NetConv;
use super::sk::SkConv;
use crate::error::{Error, Result};
use crate::nn::{ConvBn, Ctx, Scope};

/// Ordered feature levels, finest first; each level halves the spatial extent
/// of its predecessor.
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<Tensor>,
}

impl Pyramid {
    pub fn new(levels: Vec<Tensor>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::config(format!(
                "a pyramid needs at least 2 levels, got {}",
                levels.len()
            )));
        }
        for (i, pair) in levels.windows(2).enumerate() {
            let (b0, _, h0, w0) = pair[0].dims4()?;
            let (b1, _, h1, w1) = pair[1].dims4()?;
            if b0 != b1 || h1 * 2 != h0 || w1 * 2 != w0 {
                return Err(Error::dim(format!(
                    "pyramid levels {i} ({h0}x{w0}) and {} ({h1}x{w1}) are not in a 2x ratio",
                    i + 1
                )));
            }
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[Tensor] {
        &self.levels
    }

    pub fn into_levels(self) -> Vec<Tensor> {
        self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MfpConfig {
    /// Channel count of each of the three levels, finest first.
    pub channels: [usize; 3],
    pub sk_reduction: usize,
    pub cbam_reduction: usize,
    pub dropout: f64,
}

#[derive(Debug, Clone)]
struct MfpLevel {
    sk: SkConv,
    res2: Res2NetConv,
    gt: Option<GroundingTransformer>,
    fuse: ConvBn,
    cbam: Cbam,
}

/// Mixed feature pyramid over three levels. Per level: SK-Conv and
/// Res2Net-Conv of the level itself plus, when a coarser level exists, a
/// grounding transformer from the next coarser level; the branches are
/// concatenated, fused by a 1x1 conv, added to the level input, then passed
/// through CBAM and dropout. Every output level keeps its input shape.
#[derive(Debug, Clone)]
pub struct MixedFeaturePyramid {
    levels: Vec<MfpLevel>,
    cfg: MfpConfig,
}

impl MixedFeaturePyramid {
    pub fn new(sc: &Scope, cfg: MfpConfig) -> Result<Self> {
        let c = cfg.channels;
        let levels = (0..3)
            .map(|l| {
                let s = sc.pp(format!("levels.{l}"));
                let gt = if l + 1 < 3 {
                    Some(GroundingTransformer::new(&s.pp("gt"), c[l + 1], c[l])?)
                } else {
                    None
                };
                let branches = if gt.is_some() { 3 } else { 2 };
                Ok(MfpLevel {
                    sk: SkConv::new(&s.pp("sk"), c[l], cfg.sk_reduction)?,
                    res2: Res2NetConv::new(&s.pp("res2"), c[l], c[l])?,
                    gt,
                    fuse: ConvBn::new(&s.pp("fuse"), branches * c[l], c[l], 1, false)?,
                    cbam: Cbam::new(&s.pp("cbam"), c[l], cfg.cbam_reduction)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels, cfg })
    }

    pub fn config(&self) -> &MfpConfig {
        &self.cfg
    }

    /// Whether level `l` (0 = finest) receives a grounding-transformer branch.
    pub fn has_grounding(&self, level: usize) -> bool {
        self.levels.get(level).is_some_and(|l| l.gt.is_some())
    }

    /// Number of concatenated branches fused at level `l`.
    pub fn branch_count(&self, level: usize) -> usize {
        if self.has_grounding(level) {
            3
        } else {
            2
        }
    }

    pub fn forward(&self, p: &Pyramid, ctx: &Ctx) -> Result<Pyramid> {
        if p.len() != 3 {
            return Err(Error::config(format!(
                "the mixed feature pyramid takes exactly 3 levels, got {}",
                p.len()
            )));
        }
        let xs = p.levels();
        for (l, x) in xs.iter().enumerate() {
            let c = x.dims4()?.1;
            if c != self.cfg.channels[l] {
                return Err(Error::dim(format!(
                    "pyramid level {l} has {c} channels, expected {}",
                    self.cfg.channels[l]
                )));
            }
        }
        let mut out = Vec::with_capacity(3);
        for (l, level) in self.levels.iter().enumerate() {
            let x = &xs[l];
            let mut branches = vec![level.sk.forward(x, ctx)?, level.res2.forward(x, ctx)?];
            if let Some(gt) = &level.gt {
                branches.push(gt.forward(&xs[l + 1], x, ctx)?);
            }
            let fused = level.fuse.forward(&Tensor::cat(&branches, 1)?, ctx)?;
            let y = level.cbam.forward(&(fused + x)?)?;
            out.push(ctx.dropout(&y, self.cfg.dropout)?);
        }
        Pyramid::new(out)
    }

    /// Convenience wrapper for bolting onto an external three-level pyramid.
    pub fn forward_levels(&self, levels: &[Tensor], ctx: &Ctx) -> Result<Vec<Tensor>> {
        Ok(self.forward(&Pyramid::new(levels.to_vec())?, ctx)?.into_levels())
    }
}
