use candle_core::Tensor;

use crate::data::{Batch, BinaryMask, BitemporalPair};
use crate::error::{Error, Result};
use crate::metrics::{metrics, ConfusionCounts, MetricReport};
use crate::network::SwinV2DNet;
use crate::nn::{Ctx, ParamStore};

#[derive(Debug, Clone)]
pub struct ImageResult {
    pub name: String,
    pub counts: ConfusionCounts,
    pub report: MetricReport,
}

/// Per-image metrics plus the micro aggregate over summed confusion counts.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub images: Vec<ImageResult>,
    pub counts: ConfusionCounts,
    pub report: MetricReport,
}

impl EvalReport {
    /// Aggregate `key=value` lines followed by one `image=...` line per image.
    pub fn to_text(&self) -> String {
        let c = &self.counts;
        let mut s = format!(
            "images={}\ntp={}\ntn={}\nfp={}\nfn={}\n{}",
            self.images.len(),
            c.tp,
            c.tn,
            c.fp,
            c.fn_,
            self.report.to_kv()
        );
        for im in &self.images {
            s.push_str(&format!(
                "image={} f1={:.6} iou={:.6} oa={:.6}\n",
                im.name, im.report.f1, im.report.iou, im.report.oa
            ));
        }
        s
    }
}

/// Change maps of a batch in eval mode, one `[1, 1, H, W]` tensor per pair.
pub fn predict_maps(model: &SwinV2DNet, pairs: &[&BitemporalPair], store: &ParamStore) -> Result<Vec<Tensor>> {
    let batch = Batch::from_pairs(pairs, store.dtype(), store.device())?;
    let out = model.forward(&batch.i1, &batch.i2, &Ctx::eval())?;
    (0..pairs.len())
        .map(|k| Ok(out.cm.narrow(0, k, 1)?))
        .collect()
}

/// Evaluates labelled pairs with the change map binarised at `threshold`.
pub fn evaluate(
    model: &SwinV2DNet,
    store: &ParamStore,
    pairs: &[BitemporalPair],
    threshold: f64,
    batch_size: usize,
) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::Validation("evaluation split is empty".into()));
    }
    let mut images = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(batch_size.max(1)) {
        let refs: Vec<&BitemporalPair> = chunk.iter().collect();
        let maps = predict_maps(model, &refs, store)?;
        for (pair, cm) in chunk.iter().zip(maps) {
            let label = pair
                .label
                .as_ref()
                .ok_or_else(|| Error::Validation(format!("{} has no label", pair.name)))?;
            let pred = BinaryMask::threshold(&cm, threshold)?;
            let counts = ConfusionCounts::from_slices(pred.data(), label.data())?;
            images.push(ImageResult {
                name: pair.name.clone(),
                counts,
                report: metrics(&counts),
            });
        }
    }
    let counts: ConfusionCounts = images.iter().map(|r| r.counts).sum();
    Ok(EvalReport {
        report: metrics(&counts),
        counts,
        images,
    })
}
