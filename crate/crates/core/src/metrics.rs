//! Confusion counting and change-class metrics.

use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use candle_core::{DType, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel tallies with change as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Tallies two equally long binary slices.
    pub fn from_slices(pred: &[u8], target: &[u8]) -> Result<Self> {
        if pred.len() != target.len() {
            return Err(Error::dim(format!(
                "prediction has {} pixels, target {}",
                pred.len(),
                target.len()
            )));
        }
        let mut c = Self::default();
        for (i, (&p, &t)) in pred.iter().zip(target).enumerate() {
            match (p, t) {
                (1, 1) => c.tp += 1,
                (0, 0) => c.tn += 1,
                (1, 0) => c.fp += 1,
                (0, 1) => c.fn_ += 1,
                _ => {
                    return Err(Error::Validation(format!(
                        "non-binary value at pixel {i}: prediction {p}, target {t}"
                    )))
                }
            }
        }
        Ok(c)
    }
}

impl Add for ConfusionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

fn binary_values(t: &Tensor, what: &str) -> Result<Vec<u8>> {
    let v = t.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            if x == 0.0 {
                Ok(0)
            } else if x == 1.0 {
                Ok(1)
            } else {
                Err(Error::Validation(format!("{what} is not binary: {x} at index {i}")))
            }
        })
        .collect()
}

/// Exact tallies of two binary masks of identical shape.
pub fn confusion(pred: &Tensor, target: &Tensor) -> Result<ConfusionCounts> {
    if pred.dims() != target.dims() {
        return Err(Error::dim(format!(
            "prediction {:?} and target {:?} differ in shape",
            pred.dims(),
            target.dims()
        )));
    }
    let p = binary_values(pred, "prediction")?;
    let t = binary_values(target, "target")?;
    ConfusionCounts::from_slices(&p, &t)
}

/// Precision, recall, F1, IoU and overall accuracy. A metric whose
/// denominator is zero is reported as 0 and named in `degenerate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub iou: f64,
    pub oa: f64,
    pub degenerate: Vec<String>,
}

impl MetricReport {
    pub fn is_degenerate(&self, metric: &str) -> bool {
        self.degenerate.iter().any(|m| m == metric)
    }

    /// One `key=value` pair per line.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("precision", self.precision),
            ("recall", self.recall),
            ("f1", self.f1),
            ("iou", self.iou),
            ("oa", self.oa),
        ] {
            let _ = writeln!(s, "{k}={v:.6}");
        }
        let _ = writeln!(s, "degenerate={}", self.degenerate.join(","));
        s
    }
}

pub fn metrics(c: &ConfusionCounts) -> MetricReport {
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let mut degenerate = Vec::new();
    let mut ratio = |name: &str, num: f64, den: f64| {
        if den == 0.0 {
            degenerate.push(name.to_string());
            0.0
        } else {
            num / den
        }
    };
    let precision = ratio("precision", tp, tp + fp);
    let recall = ratio("recall", tp, tp + fn_);
    let f1 = ratio("f1", 2.0 * tp, 2.0 * tp + fp + fn_);
    let iou = ratio("iou", tp, tp + fp + fn_);
    let oa = ratio("oa", tp + tn, tp + tn + fp + fn_);
    MetricReport {
        precision,
        recall,
        f1,
        iou,
        oa,
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    fn mask(v: &[f32]) -> Tensor {
        Tensor::from_vec(v.to_vec(), (1, 1, 2, 2), &Device::Cpu).unwrap()
    }

    #[test]
    fn two_by_two_enumeration() {
        let c = confusion(&mask(&[1., 1., 0., 0.]), &mask(&[1., 0., 0., 1.])).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, tn: 1, fp: 1, fn_: 1 });
        assert_eq!(c.total(), 4);
    }

    #[test]
    fn non_binary_is_validation_error() {
        let r = confusion(&mask(&[1., 0.5, 0., 0.]), &mask(&[1., 0., 0., 1.]));
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn formula_arithmetic() {
        let m = metrics(&ConfusionCounts { tp: 2, tn: 0, fp: 1, fn_: 1 });
        assert!((m.f1 - 4.0 / 6.0).abs() < 1e-15);
        assert!((m.iou - 0.5).abs() < 1e-15);
    }

    #[test]
    fn perfect_prediction() {
        let m = metrics(&ConfusionCounts { tp: 5, tn: 3, fp: 0, fn_: 0 });
        for v in [m.precision, m.recall, m.f1, m.iou, m.oa] {
            assert_eq!(v, 1.0);
        }
        assert!(m.degenerate.is_empty());
    }

    #[test]
    fn empty_change_class_is_flagged() {
        let m = metrics(&ConfusionCounts { tp: 0, tn: 9, fp: 0, fn_: 0 });
        assert_eq!(m.f1, 0.0);
        assert!(m.is_degenerate("f1"));
        assert!(!m.is_degenerate("oa"));
    }

    #[test]
    fn kv_lines() {
        let kv = metrics(&ConfusionCounts { tp: 1, tn: 1, fp: 1, fn_: 1 }).to_kv();
        assert!(kv.lines().any(|l| l == "f1=0.500000"));
        assert_eq!(kv.lines().count(), 6);
    }
}
