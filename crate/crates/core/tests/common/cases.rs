//! Toy-shape gradient checks shared by the gradcheck and acceptance targets.
//! Every case returns the per-variable relative errors.

use candle_core::{Tensor, Var};
use swinv2dnet::attention::{scaled_cosine_attention, shifted_window_mask, WindowAttention};
use swinv2dnet::loss::{bce_loss, dice_loss};
use swinv2dnet::multiscale::{Cbam, GroundingTransformer, Res2NetConv, SkConv};
use swinv2dnet::nn::Ctx;
use swinv2dnet::Result;

use super::{gradcheck, params_under, probe, randn, store64, uniform};

const PER_VAR: usize = 24;

/// Parameters are jittered first: freshly initialised zero biases would put
/// ReLU inputs exactly on the kink, where finite differences are meaningless.
fn check(store_vars: Vec<(String, Var)>, inputs: &[(&str, &Var)], f: impl Fn() -> Result<Tensor>) -> Vec<(String, f64)> {
    for (i, (_, v)) in store_vars.iter().enumerate() {
        let jitter = (randn(v.dims(), 1000 + i as u64) * 0.1).unwrap();
        v.set(&(v.as_tensor() + jitter).unwrap()).unwrap();
    }
    let mut vars: Vec<(&str, &Var)> = inputs.to_vec();
    vars.extend(store_vars.iter().map(|(n, v)| (n.as_str(), v)));
    gradcheck(&vars, PER_VAR, f).unwrap()
}

/// Bare scaled cosine attention with a bias and learnable inverse temperature.
pub fn cosine_kernel() -> Vec<(String, f64)> {
    let q = Var::from_tensor(&randn(&[2, 2, 4, 3], 1)).unwrap();
    let k = Var::from_tensor(&randn(&[2, 2, 4, 3], 2)).unwrap();
    let v = Var::from_tensor(&randn(&[2, 2, 4, 3], 3)).unwrap();
    let bias = Var::from_tensor(&randn(&[2, 4, 4], 4)).unwrap();
    let log_inv_r = Var::from_tensor(&Tensor::new(&[1.2f64, 2.0], &candle_core::Device::Cpu).unwrap()).unwrap();
    let f = || {
        let inv_r = log_inv_r.as_tensor().exp()?;
        let out = scaled_cosine_attention(
            q.as_tensor(),
            k.as_tensor(),
            v.as_tensor(),
            Some(bias.as_tensor()),
            &inv_r,
            None,
        )?;
        probe(&out, 9)
    };
    check(
        Vec::new(),
        &[("q", &q), ("k", &k), ("v", &v), ("bias", &bias), ("log_inv_r", &log_inv_r)],
        f,
    )
}

/// Full window attention module (QKV, CPB MLP, 1/r, projection) on a
/// shifted 4x4 grid of 2x2 windows.
pub fn window_attention() -> Vec<(String, f64)> {
    let store = store64(11);
    let attn = WindowAttention::new(&store.root().pp("attn"), 8, 2, 16).unwrap();
    let x = Var::from_tensor(&randn(&[4, 4, 8], 12)).unwrap();
    let mask = shifted_window_mask(4, 4, 2, 1, &candle_core::Device::Cpu)
        .unwrap()
        .to_dtype(candle_core::DType::F64)
        .unwrap();
    let f = || probe(&attn.forward(x.as_tensor(), 2, Some(&mask))?, 13);
    check(store.params(), &[("x", &x)], f)
}

pub fn sk_conv() -> Vec<(String, f64)> {
    let store = store64(21);
    let sk = SkConv::new(&store.root().pp("sk"), 8, 4).unwrap();
    let x = Var::from_tensor(&randn(&[2, 8, 5, 5], 22)).unwrap();
    let f = || probe(&sk.forward(x.as_tensor(), &Ctx::train(0))?, 23);
    check(params_under(&store, "sk"), &[("x", &x)], f)
}

pub fn res2net_conv() -> Vec<(String, f64)> {
    let store = store64(31);
    let r = Res2NetConv::new(&store.root().pp("res2"), 8, 8).unwrap();
    let x = Var::from_tensor(&randn(&[2, 8, 4, 4], 32)).unwrap();
    let f = || probe(&r.forward(x.as_tensor(), &Ctx::train(0))?, 33);
    check(params_under(&store, "res2"), &[("x", &x)], f)
}

pub fn grounding_transformer() -> Vec<(String, f64)> {
    let store = store64(41);
    let gt = GroundingTransformer::new(&store.root().pp("gt"), 6, 4).unwrap();
    let coarse = Var::from_tensor(&randn(&[2, 6, 2, 2], 42)).unwrap();
    let fine = Var::from_tensor(&randn(&[2, 4, 4, 4], 43)).unwrap();
    let f = || probe(&gt.forward(coarse.as_tensor(), fine.as_tensor(), &Ctx::train(0))?, 44);
    check(params_under(&store, "gt"), &[("coarse", &coarse), ("fine", &fine)], f)
}

pub fn cbam() -> Vec<(String, f64)> {
    let store = store64(51);
    let c = Cbam::new(&store.root().pp("cbam"), 8, 2).unwrap();
    let x = Var::from_tensor(&randn(&[2, 8, 5, 5], 52)).unwrap();
    let f = || probe(&c.forward(x.as_tensor())?, 53);
    check(params_under(&store, "cbam"), &[("x", &x)], f)
}

fn binary_target(shape: &[usize], seed: u64) -> Tensor {
    uniform(shape, 0.0, 1.0, seed).ge(0.5).unwrap().to_dtype(candle_core::DType::F64).unwrap()
}

pub fn bce() -> Vec<(String, f64)> {
    let pred = Var::from_tensor(&uniform(&[2, 1, 4, 4], 0.05, 0.95, 61)).unwrap();
    let target = binary_target(&[2, 1, 4, 4], 62);
    check(Vec::new(), &[("pred", &pred)], || bce_loss(pred.as_tensor(), &target, 1e-7))
}

pub fn dice() -> Vec<(String, f64)> {
    let pred = Var::from_tensor(&uniform(&[2, 1, 4, 4], 0.05, 0.95, 71)).unwrap();
    let target = binary_target(&[2, 1, 4, 4], 72);
    check(Vec::new(), &[("pred", &pred)], || dice_loss(pred.as_tensor(), &target, 1.0))
}

/// Every case by name.
pub fn all() -> Vec<(&'static str, fn() -> Vec<(String, f64)>)> {
    vec![
        ("scaled_cosine_attention", cosine_kernel as fn() -> _),
        ("window_attention", window_attention),
        ("sk_conv", sk_conv),
        ("res2net_conv", res2net_conv),
        ("grounding_transformer", grounding_transformer),
        ("cbam", cbam),
        ("bce_loss", bce),
        ("dice_loss", dice),
    ]
}
