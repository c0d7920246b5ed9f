use candle_core::{DType, Tensor};

use crate::error::{Error, Result};
use crate::loss::bce_map;
use crate::nn::ops;

/// Hard pseudo-label: 1 where `pm >= 0.5`, else 0. Detached from the graph.
pub fn pseudo_label(pm: &Tensor) -> Result<Tensor> {
    Ok(pm.detach().ge(0.5)?.to_dtype(pm.dtype())?)
}

/// Unchanged / changed region masks of a binary label.
#[derive(Debug, Clone)]
pub struct RegionMasks {
    pub unchanged: Tensor,
    pub changed: Tensor,
}

impl RegionMasks {
    /// `label` must be binary; anything `>= 0.5` counts as changed.
    pub fn from_label(label: &Tensor) -> Result<Self> {
        let changed = label.detach().ge(0.5)?.to_dtype(label.dtype())?;
        let unchanged = changed.affine(-1.0, 1.0)?;
        Ok(Self { unchanged, changed })
    }
}

/// BCE of `pred` against `target`, averaged over the pixels where
/// `mask == 1`. An empty region contributes exactly 0.
pub fn region_bce(pred: &Tensor, target: &Tensor, mask: &Tensor, eps: f64) -> Result<Tensor> {
    ops::ensure_aligned("region bce", &[pred, target, mask])?;
    let count = mask.to_dtype(DType::F64)?.sum_all()?.to_scalar::<f64>()?;
    if count == 0.0 {
        return Ok(Tensor::zeros((), pred.dtype(), pred.device())?);
    }
    let total = (bce_map(pred, target, eps)? * mask)?.sum_all()?;
    Ok((total / count)?)
}

/// Cross-branch consistency losses `(L_SSL1, L_SSL2)`.
///
/// `L_SSL1 = F(pm1, PL2 | U) + F(pm1, 1 - PL2 | C)` and symmetrically for
/// `L_SSL2`, with `F` the region-averaged BCE: in unchanged regions each map
/// is pulled towards the other branch's pseudo-label, in changed regions
/// towards its complement.
pub fn ssl_losses(pm1: &Tensor, pm2: &Tensor, label: &Tensor, eps: f64) -> Result<(Tensor, Tensor)> {
    ops::ensure_aligned("ssl losses", &[pm1, pm2, label])?;
    if pm1.dim(1)? != 1 {
        return Err(Error::dim(format!(
            "probability maps must have one channel, got {}",
            pm1.dim(1)?
        )));
    }
    let regions = RegionMasks::from_label(label)?;
    let one_side = |pm: &Tensor, other: &Tensor| -> Result<Tensor> {
        let pl = pseudo_label(other)?;
        let flipped = pl.affine(-1.0, 1.0)?;
        let u = region_bce(pm, &pl, &regions.unchanged, eps)?;
        let c = region_bce(pm, &flipped, &regions.changed, eps)?;
        Ok((u + c)?)
    };
    Ok((one_side(pm1, pm2)?, one_side(pm2, pm1)?))
}
