mod common;

use std::collections::HashMap;

use candle_core::{Device, Tensor, Var};
use proptest::prelude::*;
use swinv2dnet::branch::{
    import_encoder_weights, pseudo_label, region_bce, ssl_losses, CnnBranch, VggEncoder,
};
use swinv2dnet::nn::Ctx;
use swinv2dnet::Error;

use common::{randn, scalar, store64, uniform, vec_f64};

const WIDTHS: [usize; 5] = [4, 4, 8, 8, 8];

fn map(v: &[f64], h: usize, w: usize) -> Tensor {
    Tensor::from_vec(v.to_vec(), (1, 1, h, w), &Device::Cpu).unwrap()
}

#[test]
fn encoder_levels_have_expected_extents() {
    let store = store64(1);
    let enc = VggEncoder::new(&store.root(), 3, WIDTHS).unwrap();
    let f = enc.forward(&randn(&[2, 3, 64, 64], 2), &Ctx::eval()).unwrap();
    assert_eq!(f.stem.dims(), &[2, 4, 32, 32]);
    let sides: Vec<usize> = (1..=4).map(|i| f.level(i).dims()[2]).collect();
    assert_eq!(sides, vec![16, 8, 4, 2]);
    let chans: Vec<usize> = (1..=4).map(|i| f.level(i).dims()[1]).collect();
    assert_eq!(chans, enc.level_channels().to_vec());
}

#[test]
fn encoder_rejects_sizes_not_divisible_by_32() {
    let store = store64(1);
    let enc = VggEncoder::new(&store.root(), 3, WIDTHS).unwrap();
    let r = enc.forward(&randn(&[1, 3, 50, 50], 2), &Ctx::eval());
    assert!(matches!(r, Err(Error::Dimension(_))));
}

#[test]
fn both_images_share_one_parameter_set() {
    let store = store64(3);
    let branch = CnnBranch::new(&store.root().pp("branch"), 3, WIDTHS).unwrap();
    assert!(store.params().iter().all(|(n, _)| n.starts_with("branch.encoder.") || n.starts_with("branch.decoder.")));
    let a = randn(&[1, 3, 32, 32], 4);
    let b = randn(&[1, 3, 32, 32], 5);
    let ab = branch.forward(&a, &b, &Ctx::eval()).unwrap();
    let ba = branch.forward(&b, &a, &Ctx::eval()).unwrap();
    assert_eq!(vec_f64(&ab.pm1), vec_f64(&ba.pm2));
    assert_eq!(vec_f64(&ab.pm2), vec_f64(&ba.pm1));
    assert_eq!(vec_f64(ab.v1.level(4)), vec_f64(ba.v2.level(4)));
}

#[test]
fn probability_maps_are_full_size_and_bounded() {
    let store = store64(6);
    let branch = CnnBranch::new(&store.root(), 3, WIDTHS).unwrap();
    let out = branch
        .forward(&randn(&[2, 3, 64, 32], 7), &randn(&[2, 3, 64, 32], 8), &Ctx::train(0))
        .unwrap();
    for pm in [&out.pm1, &out.pm2] {
        assert_eq!(pm.dims(), &[2, 1, 64, 32]);
        assert!(vec_f64(pm).iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn pseudo_label_threshold_is_inclusive() {
    let pm = map(&[0.5, 0.5 - 1e-9, 1.0, 0.0], 2, 2);
    assert_eq!(vec_f64(&pseudo_label(&pm).unwrap()), vec![1.0, 0.0, 1.0, 0.0]);
}

proptest! {
    #[test]
    fn pseudo_label_is_idempotent(seed in any::<u64>()) {
        let pm = uniform(&[1, 1, 6, 6], 0.0, 1.0, seed);
        let once = pseudo_label(&pm).unwrap();
        let twice = pseudo_label(&once).unwrap();
        prop_assert_eq!(vec_f64(&once), vec_f64(&twice));
    }

    #[test]
    fn ssl_losses_swap_with_their_inputs(seed in any::<u64>()) {
        let pm1 = uniform(&[1, 1, 4, 4], 0.01, 0.99, seed);
        let pm2 = uniform(&[1, 1, 4, 4], 0.01, 0.99, seed ^ 7);
        let label = uniform(&[1, 1, 4, 4], 0.0, 1.0, seed ^ 9).ge(0.5).unwrap().to_dtype(candle_core::DType::F64).unwrap();
        let (a1, a2) = ssl_losses(&pm1, &pm2, &label, 1e-7).unwrap();
        let (b1, b2) = ssl_losses(&pm2, &pm1, &label, 1e-7).unwrap();
        prop_assert_eq!(scalar(&a1), scalar(&b2));
        prop_assert_eq!(scalar(&a2), scalar(&b1));
    }
}

#[test]
fn ssl_losses_match_two_by_two_oracle() {
    let pm1 = [0.8, 0.3, 0.6, 0.1];
    let pm2 = [0.4, 0.7, 0.5, 0.2];
    let label = [0.0, 0.0, 1.0, 1.0];
    let (l1, l2) = ssl_losses(&map(&pm1, 2, 2), &map(&pm2, 2, 2), &map(&label, 2, 2), 1e-7).unwrap();

    let bce = |p: f64, t: f64| -(t * p.ln() + (1.0 - t) * (1.0 - p).ln());
    let pl = |p: f64| if p >= 0.5 { 1.0 } else { 0.0 };
    let side = |a: &[f64; 4], b: &[f64; 4]| {
        // Unchanged pixels 0 and 1 follow the other map's pseudo-label; changed
        // pixels 2 and 3 follow its complement.
        let u = (bce(a[0], pl(b[0])) + bce(a[1], pl(b[1]))) / 2.0;
        let c = (bce(a[2], 1.0 - pl(b[2])) + bce(a[3], 1.0 - pl(b[3]))) / 2.0;
        u + c
    };
    assert!((scalar(&l1) - side(&pm1, &pm2)).abs() < 1e-12);
    assert!((scalar(&l2) - side(&pm2, &pm1)).abs() < 1e-12);
}

#[test]
fn consistent_hard_maps_have_near_zero_ssl_loss() {
    let label = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
    let pm1 = [1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
    // Agree on unchanged pixels, disagree on changed ones.
    let pm2: Vec<f64> = pm1.iter().zip(&label).map(|(p, l)| if *l == 1.0 { 1.0 - p } else { *p }).collect();
    let (l1, l2) = ssl_losses(&map(&pm1, 2, 3), &map(&pm2, 2, 3), &map(&label, 2, 3), 1e-7).unwrap();
    assert!(scalar(&l1) + scalar(&l2) < 1e-3);
}

#[test]
fn no_gradient_reaches_the_pseudo_label_source() {
    let pm1 = Var::from_tensor(&uniform(&[1, 1, 4, 4], 0.1, 0.9, 1)).unwrap();
    let pm2 = Var::from_tensor(&uniform(&[1, 1, 4, 4], 0.1, 0.9, 2)).unwrap();
    let label = map(&[0., 1., 0., 1., 1., 0., 0., 1., 0., 0., 1., 1., 0., 1., 0., 0.], 4, 4);
    let (l1, _) = ssl_losses(pm1.as_tensor(), pm2.as_tensor(), &label, 1e-7).unwrap();
    let grads = l1.backward().unwrap();
    let g2 = grads.get(pm2.as_tensor()).map(vec_f64).unwrap_or(vec![0.0; 16]);
    assert!(g2.iter().all(|g| *g == 0.0));
    let g1 = vec_f64(grads.get(pm1.as_tensor()).unwrap());
    assert!(g1.iter().any(|g| *g != 0.0));

    let pl = pseudo_label(pm2.as_tensor()).unwrap();
    let grads = (pl * pm1.as_tensor()).unwrap().sum_all().unwrap().backward().unwrap();
    assert!(grads.get(pm2.as_tensor()).map_or(true, |g| vec_f64(g).iter().all(|v| *v == 0.0)));
}

#[test]
fn empty_region_contributes_zero() {
    let pm = map(&[0.3, 0.7], 1, 2);
    let z = map(&[0.0, 0.0], 1, 2);
    assert_eq!(scalar(&region_bce(&pm, &z, &z, 1e-7).unwrap()), 0.0);
}

#[test]
fn encoder_weights_import_by_name() {
    let store = store64(9);
    let _ = CnnBranch::new(&store.root().pp("branch"), 3, WIDTHS).unwrap();
    let w = Tensor::ones((4, 3, 3, 3), candle_core::DType::F64, &Device::Cpu).unwrap();
    let rv = Tensor::full(2.0f64, 8, &Device::Cpu).unwrap();
    let mut m = HashMap::new();
    m.insert("blocks.0.0.conv.weight".to_string(), w);
    m.insert("blocks.4.2.bn.running_var".to_string(), rv);
    assert_eq!(import_encoder_weights(&store, "branch.encoder", &m).unwrap(), 2);
    let got = store.param("branch.encoder.blocks.0.0.conv.weight").unwrap();
    assert!(vec_f64(got.as_tensor()).iter().all(|v| *v == 1.0));

    let mut bad = HashMap::new();
    bad.insert("blocks.0.0.conv.weight".to_string(), Tensor::ones((2, 2), candle_core::DType::F64, &Device::Cpu).unwrap());
    assert!(matches!(import_encoder_weights(&store, "branch.encoder", &bad), Err(Error::Dimension(_))));
    let mut unknown = HashMap::new();
    unknown.insert("blocks.9.0.conv.weight".to_string(), Tensor::ones(1, candle_core::DType::F64, &Device::Cpu).unwrap());
    assert!(matches!(import_encoder_weights(&store, "branch.encoder", &unknown), Err(Error::Validation(_))));
}
