use std::collections::BTreeMap;

use candle_core::Tensor;

use super::config::{BranchMode, ModelConfig, PATCH};
use super::fusion::{DConv, FeatureFusion, UpAlign};
use super::grid::GridIndex;
use crate::attention::{PatchEmbed, PatchMerge, SwinStage, TokenGrid};
use crate::branch::{BranchOutputs, CnnBranch};
use crate::error::{Error, Result};
use crate::multiscale::{Cbam, MfpConfig, MixedFeaturePyramid, Pyramid};
use crate::nn::{ops, Conv2d, Ctx, ParamStore, Scope};

/// Change map, deep-supervision maps (from C(0,1)..C(0,4)) and, unless the
/// branch is unsupervised, the two branch maps. All `[B, 1, H, W]` in [0, 1].
#[derive(Debug, Clone)]
pub struct NetworkOutputs {
    pub cm: Tensor,
    pub ds: Vec<Tensor>,
    pub pm1: Option<Tensor>,
    pub pm2: Option<Tensor>,
}

/// Every intermediate feature of one forward pass.
#[derive(Debug, Clone)]
pub struct GridState {
    /// Raw backbone column S'(1..4, 0).
    pub s_prime: Vec<Tensor>,
    pub s: BTreeMap<GridIndex, Tensor>,
    pub ff: BTreeMap<GridIndex, Tensor>,
    /// DConv row C(0, 0..4).
    pub c: Vec<Tensor>,
    /// How many times each FF output was read while building later columns.
    pub ff_reads: BTreeMap<GridIndex, usize>,
    pub branch: BranchOutputs,
}

/// Which node reads an FF output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfConsumer {
    Grid(GridIndex),
    DconvRow(usize),
}

/// Structural description of a built network.
#[derive(Debug, Clone)]
pub struct Topology {
    pub s_nodes: Vec<GridIndex>,
    pub ff_nodes: Vec<GridIndex>,
    pub c_nodes: Vec<usize>,
    pub backbone_stages: usize,
    pub ds_heads: usize,
    pub ff_consumers: Vec<(GridIndex, FfConsumer)>,
    pub swin_depths: Vec<(GridIndex, usize)>,
}

#[derive(Debug, Clone)]
struct DenseNode {
    align: Conv2d,
    up: UpAlign,
    swin: SwinStage,
}

#[derive(Debug, Clone)]
struct Backbone {
    embed: PatchEmbed,
    stages: Vec<SwinStage>,
    merges: Vec<PatchMerge>,
}

/// The full change-detection network.
#[derive(Debug, Clone)]
pub struct SwinV2DNet {
    cfg: ModelConfig,
    c00: DConv,
    backbone: Backbone,
    mfp: Option<MixedFeaturePyramid>,
    nodes: BTreeMap<GridIndex, DenseNode>,
    ff: BTreeMap<GridIndex, FeatureFusion>,
    crow: Vec<DConv>,
    head_cbam: Cbam,
    head: Conv2d,
    ds_heads: Vec<Conv2d>,
    branch: CnnBranch,
}

fn at<T>(r: Result<T>, what: impl std::fmt::Display) -> Result<T> {
    r.map_err(|e| e.at(what))
}

impl SwinV2DNet {
    /// Registers all parameters in `store` and builds the network.
    pub fn new(store: &ParamStore, cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let root = store.root();
        Self::build(&root, cfg)
    }

    fn build(sc: &Scope, cfg: ModelConfig) -> Result<Self> {
        let d = cfg.embed_dims;
        let vgg_levels = [cfg.vgg_widths[1], cfg.vgg_widths[2], cfg.vgg_widths[3], cfg.vgg_widths[4]];
        let c00 = DConv::new(&sc.pp("c00"), 2 * cfg.in_channels, cfg.stem_width)?;

        let bb = sc.pp("backbone");
        let embed = PatchEmbed::new(&bb.pp("embed"), cfg.stem_width, d[0], PATCH)?;
        let mut stages = Vec::with_capacity(4);
        let mut merges = Vec::with_capacity(3);
        for k in 0..4 {
            let g = GridIndex::new(k + 1, 0).unwrap();
            stages.push(SwinStage::new(
                &bb.pp(format!("stages.{k}")),
                d[k],
                cfg.heads[k],
                g.depth(&cfg),
                cfg.window,
                cfg.cpb_hidden,
                cfg.mlp_ratio,
            )?);
            if k < 3 {
                merges.push(PatchMerge::new(&bb.pp(format!("merges.{k}")), d[k])?);
            }
        }

        let mfp = if cfg.mfp_enabled {
            Some(MixedFeaturePyramid::new(
                &sc.pp("mfp"),
                MfpConfig {
                    channels: [d[0], d[1], d[2]],
                    sk_reduction: cfg.sk_reduction,
                    cbam_reduction: cfg.cbam_reduction,
                    dropout: cfg.mfp_dropout,
                },
            )?)
        } else {
            None
        };

        let mut nodes = BTreeMap::new();
        let mut ff = BTreeMap::new();
        for g in GridIndex::all() {
            let (i, j) = (g.i(), g.j());
            let c = d[i - 1];
            ff.insert(
                g,
                FeatureFusion::new(
                    &sc.pp(format!("ff.{i}{j}")),
                    c,
                    vgg_levels[i - 1],
                    cfg.cbam_reduction,
                )?,
            );
            if j == 0 {
                continue;
            }
            let s = sc.pp(format!("grid.{i}{j}"));
            nodes.insert(
                g,
                DenseNode {
                    align: Conv2d::new(&s.pp("align"), (j + 1) * c, c, 1, true)?,
                    up: UpAlign::new(&s.pp("up"), d[i], c)?,
                    swin: SwinStage::new(
                        &s.pp("swin"),
                        c,
                        cfg.heads[i - 1],
                        g.depth(&cfg),
                        cfg.window,
                        cfg.cpb_hidden,
                        cfg.mlp_ratio,
                    )?,
                },
            );
        }

        let w = cfg.stem_width;
        let crow = (1..=4)
            .map(|j| DConv::new(&sc.pp(format!("crow.{j}")), j * w + d[0], w))
            .collect::<Result<Vec<_>>>()?;
        let head_cbam = Cbam::new(&sc.pp("head.cbam"), 4 * w, cfg.cbam_reduction)?;
        let head = Conv2d::new(&sc.pp("head.out"), 4 * w, 1, 1, true)?;
        let ds_heads = (1..=4)
            .map(|j| Conv2d::new(&sc.pp(format!("ds.{j}")), w, 1, 1, true))
            .collect::<Result<Vec<_>>>()?;
        let branch = CnnBranch::new(&sc.pp("branch"), cfg.in_channels, cfg.vgg_widths)?;

        Ok(Self {
            cfg,
            c00,
            backbone: Backbone {
                embed,
                stages,
                merges,
            },
            mfp,
            nodes,
            ff,
            crow,
            head_cbam,
            head,
            ds_heads,
            branch,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn branch(&self) -> &CnnBranch {
        &self.branch
    }

    pub fn mfp(&self) -> Option<&MixedFeaturePyramid> {
        self.mfp.as_ref()
    }

    pub fn topology(&self) -> Topology {
        let mut s_nodes: Vec<GridIndex> = (1..=4).map(|i| GridIndex::new(i, 0).unwrap()).collect();
        s_nodes.extend(self.nodes.keys().copied());
        s_nodes.sort();
        let ff_consumers = self
            .ff
            .keys()
            .map(|g| {
                let consumer = if g.i() == 1 {
                    FfConsumer::DconvRow(g.j() + 1)
                } else {
                    FfConsumer::Grid(GridIndex::new(g.i() - 1, g.j() + 1).unwrap())
                };
                (*g, consumer)
            })
            .collect();
        let mut swin_depths: Vec<(GridIndex, usize)> = self
            .backbone
            .stages
            .iter()
            .enumerate()
            .map(|(k, s)| (GridIndex::new(k + 1, 0).unwrap(), s.depth()))
            .collect();
        swin_depths.extend(self.nodes.iter().map(|(g, n)| (*g, n.swin.depth())));
        swin_depths.sort();
        Topology {
            s_nodes,
            ff_nodes: self.ff.keys().copied().collect(),
            c_nodes: (0..=self.crow.len()).collect(),
            backbone_stages: self.backbone.stages.len(),
            ds_heads: self.ds_heads.len(),
            ff_consumers,
            swin_depths,
        }
    }

    fn check_inputs(&self, i1: &Tensor, i2: &Tensor) -> Result<()> {
        let (b, c, h, w) = i1.dims4()?;
        if i2.dims() != i1.dims() {
            return Err(Error::dim(format!(
                "image pair is not aligned: {:?} vs {:?}",
                i1.dims(),
                i2.dims()
            )));
        }
        if c != self.cfg.in_channels {
            return Err(Error::dim(format!(
                "images have {c} channels, the network expects {}",
                self.cfg.in_channels
            )));
        }
        if b == 0 || h == 0 || w == 0 || h % 32 != 0 || w % 32 != 0 {
            return Err(Error::dim(format!(
                "image size {h}x{w} is not divisible by 32; tile the images first"
            )));
        }
        Ok(())
    }

    /// C(0,0) and the raw backbone column S'(1..4, 0).
    pub fn backbone_column(&self, i1: &Tensor, i2: &Tensor, ctx: &Ctx) -> Result<(Tensor, Vec<Tensor>)> {
        self.check_inputs(i1, i2)?;
        let x = Tensor::cat(&[i1, i2], 1)?;
        let c00 = at(self.c00.forward(&x, ctx), "C(0,0)")?;
        let mut grid = at(self.backbone.embed.forward(&c00), "patch embedding")?;
        let mut column = Vec::with_capacity(4);
        for (k, stage) in self.backbone.stages.iter().enumerate() {
            let g = GridIndex::new(k + 1, 0).unwrap();
            grid = at(stage.forward(&grid), format!("grid node S'{g}"))?;
            column.push(grid.to_map()?);
            if let Some(m) = self.backbone.merges.get(k) {
                grid = at(m.forward(&grid), format!("patch merge after S'{g}"))?;
            }
        }
        Ok((c00, column))
    }

    pub fn forward(&self, i1: &Tensor, i2: &Tensor, ctx: &Ctx) -> Result<NetworkOutputs> {
        Ok(self.forward_with_state(i1, i2, ctx)?.0)
    }

    pub fn forward_with_state(
        &self,
        i1: &Tensor,
        i2: &Tensor,
        ctx: &Ctx,
    ) -> Result<(NetworkOutputs, GridState)> {
        self.check_inputs(i1, i2)?;
        let run_decoder = self.cfg.branch_mode != BranchMode::Unsupervised;
        let branch = if run_decoder {
            at(self.branch.forward(i1, i2, ctx), "CNN branch")?
        } else {
            let enc = self.branch.encoder();
            let v1 = at(enc.forward(i1, ctx), "CNN branch")?;
            let v2 = at(enc.forward(i2, ctx), "CNN branch")?;
            // placeholders, never read in this mode
            BranchOutputs {
                pm1: v1.stem.zeros_like()?,
                pm2: v2.stem.zeros_like()?,
                v1,
                v2,
            }
        };

        let (c00, s_prime) = self.backbone_column(i1, i2, ctx)?;

        let mut s: BTreeMap<GridIndex, Tensor> = BTreeMap::new();
        let column0: Vec<Tensor> = match &self.mfp {
            Some(mfp) => {
                let p = Pyramid::new(s_prime[..3].to_vec())?;
                let mut out = at(mfp.forward(&p, ctx), "mixed feature pyramid")?.into_levels();
                out.push(s_prime[3].clone());
                out
            }
            None => s_prime.clone(),
        };
        for (k, t) in column0.into_iter().enumerate() {
            s.insert(GridIndex::new(k + 1, 0).unwrap(), t);
        }

        let mut ff: BTreeMap<GridIndex, Tensor> = BTreeMap::new();
        let mut ff_reads: BTreeMap<GridIndex, usize> = BTreeMap::new();
        let fuse = |g: GridIndex, x: &Tensor| -> Result<Tensor> {
            let unit = &self.ff[&g];
            at(
                unit.forward(x, branch.v1.level(g.i()), branch.v2.level(g.i()), ctx),
                format!("grid node FF{g}"),
            )
        };
        for i in 1..=4 {
            let g = GridIndex::new(i, 0).unwrap();
            ff.insert(g, fuse(g, &s[&g])?);
        }
        for j in 1..=3 {
            for i in 1..=4 - j {
                let g = GridIndex::new(i, j).unwrap();
                let node = &self.nodes[&g];
                let below = GridIndex::new(i + 1, j - 1).unwrap();
                *ff_reads.entry(below).or_default() += 1;
                let mut parts: Vec<Tensor> =
                    (0..j).map(|jj| s[&GridIndex::new(i, jj).unwrap()].clone()).collect();
                let up = at(node.up.forward(&ff[&below]), format!("grid node S{g}"))?;
                parts.push(up);
                let x = at(
                    ops::ensure_aligned("dense concat", &parts.iter().collect::<Vec<_>>())
                        .and_then(|_| Ok(Tensor::cat(&parts, 1)?)),
                    format!("grid node S{g}"),
                )?;
                let x = node.align.forward(&x)?;
                let y = at(node.swin.forward(&TokenGrid::from_map(&x)?), format!("grid node S{g}"))?
                    .to_map()?;
                ff.insert(g, fuse(g, &y)?);
                s.insert(g, y);
            }
        }

        let mut c = vec![c00];
        for j in 1..=4 {
            let src = GridIndex::new(1, j - 1).unwrap();
            *ff_reads.entry(src).or_default() += 1;
            let mut parts = c.clone();
            parts.push(ops::upsample_bilinear(&ff[&src], 4)?);
            let x = at(
                ops::ensure_aligned("dconv row concat", &parts.iter().collect::<Vec<_>>())
                    .and_then(|_| Ok(Tensor::cat(&parts, 1)?)),
                format!("grid node C(0,{j})"),
            )?;
            c.push(at(self.crow[j - 1].forward(&x, ctx), format!("grid node C(0,{j})"))?);
        }

        let cat = Tensor::cat(&c[1..], 1)?;
        let cm = ops::sigmoid(&self.head.forward(&self.head_cbam.forward(&cat)?)?)?;
        let ds = self
            .ds_heads
            .iter()
            .zip(&c[1..])
            .map(|(h, x)| ops::sigmoid(&h.forward(x)?))
            .collect::<Result<Vec<_>>>()?;
        let (pm1, pm2) = if run_decoder {
            (Some(branch.pm1.clone()), Some(branch.pm2.clone()))
        } else {
            (None, None)
        };
        let outputs = NetworkOutputs { cm, ds, pm1, pm2 };
        let state = GridState {
            s_prime,
            s,
            ff,
            c,
            ff_reads,
            branch,
        };
        Ok((outputs, state))
    }
}
