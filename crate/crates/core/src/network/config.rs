use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the CNN branch is trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchMode {
    /// No loss on the branch maps; the decoder is not run.
    Unsupervised,
    /// BCE + Dice of each branch map against the label.
    Supervised,
    /// Pseudo-label consistency between the two branch maps.
    SelfSupervised,
}

impl BranchMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BranchMode::Unsupervised => "unsupervised",
            BranchMode::Supervised => "supervised",
            BranchMode::SelfSupervised => "self-supervised",
        }
    }
}

impl std::str::FromStr for BranchMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unsupervised" => Ok(Self::Unsupervised),
            "supervised" => Ok(Self::Supervised),
            "self-supervised" => Ok(Self::SelfSupervised),
            other => Err(Error::config(format!("unknown branch mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalePreset {
    Full,
    Desk,
}

/// Block counts of the U-path nodes S10, S20, S30, S40, S31, S22, S13.
pub const DEPTH_PROFILES: [[usize; 7]; 3] = [
    [2, 2, 2, 2, 2, 2, 2],
    [2, 2, 6, 2, 6, 2, 2],
    [2, 2, 18, 2, 18, 2, 2],
];

/// Blocks used by S11, S12 and S21 regardless of profile.
pub const SIDE_NODE_DEPTH: usize = 2;

/// Patch size of the embedding; fixes the row strides at 4, 8, 16, 32.
pub const PATCH: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub preset: ScalePreset,
    pub in_channels: usize,
    pub depths: [usize; 7],
    /// Token width of rows 1..4; each row doubles the previous one.
    pub embed_dims: [usize; 4],
    pub heads: [usize; 4],
    pub window: usize,
    /// Width of the full-resolution DConv row C(0, j).
    pub stem_width: usize,
    /// Widths of the five VGG blocks.
    pub vgg_widths: [usize; 5],
    pub cpb_hidden: usize,
    pub mlp_ratio: usize,
    pub cbam_reduction: usize,
    pub sk_reduction: usize,
    pub mfp_dropout: f64,
    pub mfp_enabled: bool,
    pub branch_mode: BranchMode,
}

impl ModelConfig {
    pub fn full() -> Self {
        Self {
            preset: ScalePreset::Full,
            in_channels: 3,
            depths: DEPTH_PROFILES[1],
            embed_dims: [96, 192, 384, 768],
            heads: [3, 6, 12, 24],
            window: 8,
            stem_width: 32,
            vgg_widths: [64, 128, 256, 512, 512],
            cpb_hidden: 512,
            mlp_ratio: 4,
            cbam_reduction: 16,
            sk_reduction: 16,
            mfp_dropout: 0.1,
            mfp_enabled: true,
            branch_mode: BranchMode::SelfSupervised,
        }
    }

    pub fn desk() -> Self {
        Self {
            preset: ScalePreset::Desk,
            in_channels: 3,
            depths: DEPTH_PROFILES[0],
            embed_dims: [16, 32, 64, 128],
            heads: [2, 4, 8, 16],
            window: 4,
            stem_width: 16,
            vgg_widths: [16, 16, 32, 64, 128],
            cpb_hidden: 64,
            mlp_ratio: 4,
            cbam_reduction: 4,
            sk_reduction: 4,
            mfp_dropout: 0.1,
            mfp_enabled: true,
            branch_mode: BranchMode::SelfSupervised,
        }
    }

    pub fn preset(p: ScalePreset) -> Self {
        match p {
            ScalePreset::Full => Self::full(),
            ScalePreset::Desk => Self::desk(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !DEPTH_PROFILES.contains(&self.depths) {
            return Err(Error::config(format!(
                "depth profile {:?} is not one of {:?}",
                self.depths, DEPTH_PROFILES
            )));
        }
        if self.in_channels == 0 || self.stem_width == 0 || self.window == 0 {
            return Err(Error::config(
                "in_channels, stem_width and window must be positive",
            ));
        }
        for k in 0..4 {
            let (d, h) = (self.embed_dims[k], self.heads[k]);
            if h == 0 || d % h != 0 {
                return Err(Error::config(format!(
                    "row {} width {d} is not divisible by {h} heads",
                    k + 1
                )));
            }
            if k > 0 && d != 2 * self.embed_dims[k - 1] {
                return Err(Error::config(format!(
                    "row widths must double from row to row, got {:?}",
                    self.embed_dims
                )));
            }
        }
        if self.vgg_widths.contains(&0) || self.cpb_hidden == 0 || self.mlp_ratio == 0 {
            return Err(Error::config("layer widths must be positive"));
        }
        if self.cbam_reduction == 0 || self.sk_reduction == 0 {
            return Err(Error::config("reduction ratios must be positive"));
        }
        if self.embed_dims[0] < self.cbam_reduction || self.embed_dims[0] < 2 * self.sk_reduction {
            return Err(Error::config(format!(
                "row 1 width {} is too narrow for reductions cbam={} sk={}",
                self.embed_dims[0], self.cbam_reduction, self.sk_reduction
            )));
        }
        if !(0.0..1.0).contains(&self.mfp_dropout) {
            return Err(Error::config("dropout must lie in [0, 1)"));
        }
        Ok(())
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk()
    }
}
