//! Training objective: BCE, soft Dice, and the deep-supervision + branch
//! composite.

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::branch::ssl_losses;
use crate::error::{Error, Result};
use crate::network::{BranchMode, NetworkOutputs};
use crate::nn::ops;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub dice_weight: f64,
    pub ssl_weight: f64,
    pub dice_smooth: f64,
    pub clamp_eps: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            dice_weight: 0.5,
            ssl_weight: 0.25,
            dice_smooth: 1.0,
            clamp_eps: 1e-7,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dice_weight >= 0.0 && self.ssl_weight >= 0.0) {
            return Err(Error::config("loss weights must be non-negative"));
        }
        if !(self.dice_smooth > 0.0) {
            return Err(Error::config("dice smoothing must be positive"));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            return Err(Error::config("clamp epsilon must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

fn ensure_same_shape(what: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::dim(format!(
            "{what}: prediction {:?} and target {:?} differ in shape",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Per-pixel `-(y ln p + (1 - y) ln(1 - p))` with `p` clamped to
/// `[eps, 1 - eps]`.
pub fn bce_map(pred: &Tensor, target: &Tensor, eps: f64) -> Result<Tensor> {
    ensure_same_shape("bce", pred, target)?;
    let p = pred.clamp(eps, 1.0 - eps)?;
    let pos = (target * p.log()?)?;
    let neg = (target.affine(-1.0, 1.0)? * p.affine(-1.0, 1.0)?.log()?)?;
    Ok((pos + neg)?.neg()?)
}

/// Mean binary cross-entropy over every pixel of the batch.
pub fn bce_loss(pred: &Tensor, target: &Tensor, eps: f64) -> Result<Tensor> {
    Ok(bce_map(pred, target, eps)?.mean_all()?)
}

/// Global soft Dice loss `1 - (2 sum(p y) + s) / (sum p + sum y + s)`.
pub fn dice_loss(pred: &Tensor, target: &Tensor, smooth: f64) -> Result<Tensor> {
    ensure_same_shape("dice", pred, target)?;
    let inter = (pred * target)?.sum_all()?;
    let num = inter.affine(2.0, smooth)?;
    let den = ((pred.sum_all()? + target.sum_all()?)? + smooth)?;
    Ok((num / den)?.affine(-1.0, 1.0)?)
}

/// BCE + weighted Dice for one supervised map.
#[derive(Debug, Clone)]
pub struct MapTerm {
    pub name: String,
    pub bce: Tensor,
    pub dice: Tensor,
}

impl MapTerm {
    fn new(name: &str, pred: &Tensor, target: &Tensor, cfg: &LossConfig) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            bce: bce_loss(pred, target, cfg.clamp_eps)?,
            dice: dice_loss(pred, target, cfg.dice_smooth)?,
        })
    }

    pub fn combined(&self, cfg: &LossConfig) -> Result<Tensor> {
        Ok((&self.bce + (&self.dice * cfg.dice_weight)?)?)
    }
}

/// Every term of the objective, kept as graph tensors.
#[derive(Debug, Clone)]
pub struct LossBreakdown {
    /// Final change map followed by the four deep-supervision maps.
    pub supervised: Vec<MapTerm>,
    /// `ssl1`/`ssl2` in self-supervised mode, `pm1`/`pm2` map terms folded
    /// to scalars in supervised mode, empty in unsupervised mode.
    pub branch: Vec<(String, Tensor)>,
    pub total: Tensor,
}

impl LossBreakdown {
    /// Named scalar values of every term plus `total`.
    pub fn values(&self) -> Result<Vec<(String, f64)>> {
        let mut out = Vec::new();
        for t in &self.supervised {
            out.push((format!("{}.bce", t.name), ops::scalar(&t.bce)?));
            out.push((format!("{}.dice", t.name), ops::scalar(&t.dice)?));
        }
        for (n, v) in &self.branch {
            out.push((n.clone(), ops::scalar(v)?));
        }
        out.push(("total".to_string(), ops::scalar(&self.total)?));
        Ok(out)
    }
}

/// Composite objective: BCE + λ1·Dice on the change map and each of the four
/// deep-supervision maps, plus the branch terms selected by `mode`.
pub fn total_loss(
    outputs: &NetworkOutputs,
    target: &Tensor,
    cfg: &LossConfig,
    mode: BranchMode,
) -> Result<LossBreakdown> {
    if outputs.ds.len() != 4 {
        return Err(Error::config(format!(
            "expected 4 deep-supervision maps, got {}",
            outputs.ds.len()
        )));
    }
    let mut supervised = vec![MapTerm::new("cm", &outputs.cm, target, cfg)?];
    for (k, ds) in outputs.ds.iter().enumerate() {
        supervised.push(MapTerm::new(&format!("ds{}", k + 1), ds, target, cfg)?);
    }
    let mut total = supervised[0].combined(cfg)?;
    for t in &supervised[1..] {
        total = (total + t.combined(cfg)?)?;
    }
    let branch_maps = || -> Result<(&Tensor, &Tensor)> {
        match (&outputs.pm1, &outputs.pm2) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::config(format!(
                "branch mode `{}` needs both branch probability maps",
                mode.as_str()
            ))),
        }
    };
    let mut branch = Vec::new();
    match mode {
        BranchMode::Unsupervised => {}
        BranchMode::Supervised => {
            let (pm1, pm2) = branch_maps()?;
            for (name, pm) in [("pm1", pm1), ("pm2", pm2)] {
                let term = MapTerm::new(name, pm, target, cfg)?.combined(cfg)?;
                total = (total + &term)?;
                branch.push((name.to_string(), term));
            }
        }
        BranchMode::SelfSupervised => {
            let (pm1, pm2) = branch_maps()?;
            let (s1, s2) = ssl_losses(pm1, pm2, target, cfg.clamp_eps)?;
            total = (total + ((&s1 + &s2)? * cfg.ssl_weight)?)?;
            branch.push(("ssl1".to_string(), s1));
            branch.push(("ssl2".to_string(), s2));
        }
    }
    Ok(LossBreakdown {
        supervised,
        branch,
        total,
    })
}
