#![allow(dead_code)]

pub mod cases;
pub mod oracle;

use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swinv2dnet::network::NetworkOutputs;
use swinv2dnet::nn::ParamStore;
use swinv2dnet::Result;

pub const FD_STEP: f64 = 1e-5;
const GRAD_FLOOR: f64 = 1e-5;

pub fn store64(seed: u64) -> ParamStore {
    ParamStore::new(DType::F64, seed)
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_vec(v, shape, &Device::Cpu).unwrap()
}

pub fn randn(shape: &[usize], seed: u64) -> Tensor {
    uniform(shape, -1.0, 1.0, seed)
}

pub fn vec_f64(t: &Tensor) -> Vec<f64> {
    t.to_dtype(DType::F64).unwrap().flatten_all().unwrap().to_vec1().unwrap()
}

pub fn scalar(t: &Tensor) -> f64 {
    vec_f64(t)[0]
}

pub fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.dims(), b.dims(), "shape mismatch");
    vec_f64(a)
        .iter()
        .zip(vec_f64(b))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Contracts an output with fixed random weights so that every output element
/// contributes to the scalar under test.
pub fn probe(out: &Tensor, seed: u64) -> Result<Tensor> {
    let w = uniform(out.dims(), 0.5, 1.5, seed).to_dtype(out.dtype())?;
    Ok((out * w)?.sum_all()?)
}

/// Max over `vars` of `|a - n|_inf / max(|a|_inf, |n|_inf)` between autodiff
/// and central-difference gradients of `f`. At most `per_var` evenly spaced
/// elements of each variable are perturbed.
pub fn gradcheck(vars: &[(&str, &Var)], per_var: usize, f: impl Fn() -> Result<Tensor>) -> Result<Vec<(String, f64)>> {
    let grads = f()?.backward()?;
    let mut out = Vec::new();
    for (name, var) in vars {
        let base = vec_f64(var.as_tensor());
        let analytic = match grads.get(var.as_tensor()) {
            Some(g) => vec_f64(g),
            None => vec![0.0; base.len()],
        };
        let stride = base.len().div_ceil(per_var).max(1);
        let (mut diff, mut scale) = (0.0f64, 0.0f64);
        for idx in (0..base.len()).step_by(stride) {
            let eval = |delta: f64| -> Result<f64> {
                let mut v = base.clone();
                v[idx] += delta;
                var.set(&Tensor::from_vec(v, var.shape(), var.device())?)?;
                Ok(scalar(&f()?))
            };
            let numeric = (eval(FD_STEP)? - eval(-FD_STEP)?) / (2.0 * FD_STEP);
            diff = diff.max((analytic[idx] - numeric).abs());
            scale = scale.max(analytic[idx].abs()).max(numeric.abs());
        }
        var.set(&Tensor::from_vec(base, var.shape(), var.device())?)?;
        // Structurally zero gradients (e.g. a bias cancelled by a later
        // batch norm) leave only rounding noise, so small scales are floored.
        out.push((name.to_string(), diff / scale.max(GRAD_FLOOR)));
    }
    Ok(out)
}

pub fn worst(errs: &[(String, f64)]) -> f64 {
    errs.iter().map(|(_, e)| *e).fold(0.0, f64::max)
}

/// Every parameter of `store` whose name starts with `prefix`.
pub fn params_under(store: &ParamStore, prefix: &str) -> Vec<(String, Var)> {
    store
        .params()
        .into_iter()
        .filter(|(n, _)| n.starts_with(prefix))
        .collect()
}

/// 0/1 tensor with each entry set with probability `p`.
pub fn binary(shape: &[usize], p: f64, seed: u64) -> Tensor {
    uniform(shape, 0.0, 1.0, seed).lt(p).unwrap().to_dtype(DType::F64).unwrap()
}

/// Random network outputs on `[2, 1, 4, 4]` maps, probabilities in (0, 1).
pub fn toy_outputs(seed: u64) -> NetworkOutputs {
    let m = |s| uniform(&[2, 1, 4, 4], 0.02, 0.98, s);
    NetworkOutputs {
        cm: m(seed),
        ds: (1..=4).map(|k| m(seed + k)).collect(),
        pm1: Some(m(seed + 10)),
        pm2: Some(m(seed + 11)),
    }
}
