use std::collections::HashMap;

use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::nn::{ConvBn, Ctx, ParamStore, Scope};

/// Convolutions per VGG16 block.
pub const VGG_BLOCK_CONVS: [usize; 5] = [2, 2, 3, 3, 3];

/// Feature levels of one encoder pass. `stem` is the stride-2 output of the
/// first block (used only by the branch decoder); `levels` are the strides
/// 4, 8, 16 and 32 features handed to the main network.
#[derive(Debug, Clone)]
pub struct EncoderFeatures {
    pub stem: Tensor,
    pub levels: [Tensor; 4],
}

impl EncoderFeatures {
    /// Level `i` in 1..=4 (stride `4 * 2^(i-1)`).
    pub fn level(&self, i: usize) -> &Tensor {
        &self.levels[i - 1]
    }
}

/// VGG16-style encoder with batch norm: five blocks of 3x3 conv + BN + ReLU,
/// each followed by 2x2 max pooling.
#[derive(Debug, Clone)]
pub struct VggEncoder {
    blocks: Vec<Vec<ConvBn>>,
    widths: [usize; 5],
}

impl VggEncoder {
    pub fn new(sc: &Scope, in_channels: usize, widths: [usize; 5]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(5);
        let mut c = in_channels;
        for (b, (&w, &n)) in widths.iter().zip(VGG_BLOCK_CONVS.iter()).enumerate() {
            let mut convs = Vec::with_capacity(n);
            for k in 0..n {
                convs.push(ConvBn::new(&sc.pp(format!("blocks.{b}.{k}")), c, w, 3, true)?);
                c = w;
            }
            blocks.push(convs);
        }
        Ok(Self { blocks, widths })
    }

    pub fn widths(&self) -> [usize; 5] {
        self.widths
    }

    /// Channel counts of the four levels handed to the main network.
    pub fn level_channels(&self) -> [usize; 4] {
        [self.widths[1], self.widths[2], self.widths[3], self.widths[4]]
    }

    pub fn forward(&self, image: &Tensor, ctx: &Ctx) -> Result<EncoderFeatures> {
        let (_, _, h, w) = image.dims4()?;
        if h % 32 != 0 || w % 32 != 0 || h == 0 || w == 0 {
            return Err(Error::dim(format!(
                "encoder input {h}x{w} is not divisible by 32"
            )));
        }
        let mut x = image.clone();
        let mut outs = Vec::with_capacity(5);
        for block in &self.blocks {
            for conv in block {
                x = conv.forward(&x, ctx)?;
            }
            x = x.max_pool2d(2)?;
            outs.push(x.clone());
        }
        let mut it = outs.into_iter();
        let stem = it.next().unwrap();
        let levels: Vec<Tensor> = it.collect();
        Ok(EncoderFeatures {
            stem,
            levels: levels.try_into().unwrap(),
        })
    }
}

/// Loads externally trained encoder weights into `store`.
///
/// Keys are relative to the encoder, e.g. `blocks.0.1.conv.weight` or
/// `blocks.4.2.bn.running_var`; they are looked up under `prefix` (the
/// encoder's scope, `branch.encoder` in the full network). Every key must
/// name an existing tensor of the same shape. Returns the number of tensors
/// loaded.
pub fn import_encoder_weights(
    store: &ParamStore,
    prefix: &str,
    tensors: &HashMap<String, Tensor>,
) -> Result<usize> {
    let mut names: Vec<&String> = tensors.keys().collect();
    names.sort();
    for name in &names {
        let full = if prefix.is_empty() {
            (*name).clone()
        } else {
            format!("{prefix}.{name}")
        };
        store.assign(&full, &tensors[*name])?;
    }
    Ok(names.len())
}
