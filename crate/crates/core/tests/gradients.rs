//! Analytic gradients against central finite differences.

mod common;

use common::gradcheck::{margin_case, softmax_case, FLOOR, STEP, TOL};
use common::{central_diff, rand_vec, rel_err, seeded};
use event_tensors::linalg::{contract3, contract3_grads, cosine, cosine_grads};
use event_tensors::models::ModelKind;
use event_tensors::training::{event_margin_loss, l2_penalty};

#[test]
fn margin_loss_all_kinds() {
    for kind in ModelKind::ALL {
        for seed in 0..20 {
            margin_case(kind, seed);
        }
    }
}

#[test]
fn softmax_loss_all_kinds() {
    for kind in ModelKind::ALL {
        for seed in 0..20 {
            softmax_case(kind, seed);
        }
    }
}

#[test]
fn contract3_grads_match_differences() {
    let mut rng = seeded(11);
    for _ in 0..20 {
        let t = common::rand_tensor(&mut rng, (3, 4, 2));
        let a = rand_vec(&mut rng, 4);
        let b = rand_vec(&mut rng, 2);
        let g = rand_vec(&mut rng, 3);
        let (dt, da, db) = contract3_grads(&t, &a, &b, &g).unwrap();
        let f_t = |x: &[f64]| {
            let tt = event_tensors::linalg::Tensor3::from_vec((3, 4, 2), x.to_vec()).unwrap();
            event_tensors::linalg::dot(&contract3(&tt, &a, &b).unwrap(), &g)
        };
        for i in 0..t.data().len() {
            let num = central_diff(&f_t, t.data(), i, STEP);
            assert!(rel_err(dt.data()[i], num, FLOOR) <= TOL);
        }
        let f_a = |x: &[f64]| event_tensors::linalg::dot(&contract3(&t, x, &b).unwrap(), &g);
        for i in 0..4 {
            assert!(rel_err(da[i], central_diff(&f_a, &a, i, STEP), FLOOR) <= TOL);
        }
        let f_b = |x: &[f64]| event_tensors::linalg::dot(&contract3(&t, &a, x).unwrap(), &g);
        for i in 0..2 {
            assert!(rel_err(db[i], central_diff(&f_b, &b, i, STEP), FLOOR) <= TOL);
        }
    }
}

#[test]
fn cosine_grads_match_differences() {
    let mut rng = seeded(5);
    for _ in 0..50 {
        let a = rand_vec(&mut rng, 6);
        let b = rand_vec(&mut rng, 6);
        let (c, da, db) = cosine_grads(&a, &b);
        assert!((c - cosine(&a, &b).value).abs() < 1e-15);
        let fa = |x: &[f64]| cosine(x, &b).value;
        let fb = |x: &[f64]| cosine(&a, x).value;
        for i in 0..6 {
            assert!(rel_err(da[i], central_diff(&fa, &a, i, STEP), FLOOR) <= TOL);
            assert!(rel_err(db[i], central_diff(&fb, &b, i, STEP), FLOOR) <= TOL);
        }
    }
}

#[test]
fn l2_penalty_gradient() {
    let mut rng = seeded(3);
    let a = rand_vec(&mut rng, 5);
    let b = rand_vec(&mut rng, 3);
    let (_, grads) = l2_penalty(&[&a, &b], 1e-2);
    let f = |x: &[f64]| l2_penalty(&[x, &b], 1e-2).0;
    for (i, g) in grads[0].iter().enumerate() {
        assert!(rel_err(*g, central_diff(&f, &a, i, STEP), FLOOR) <= TOL);
    }
}

#[test]
fn inactive_hinge_has_zero_gradient() {
    let mut rng = seeded(8);
    let e = rand_vec(&mut rng, 4);
    let n = rand_vec(&mut rng, 4);
    // target = input gives cos 1; a negative margin keeps the hinge closed
    let ml = event_margin_loss(&e, &e, &n, -2.5).unwrap();
    assert_eq!(ml.loss, 0.0);
    assert!(ml.d_input.iter().chain(ml.d_target.iter()).chain(ml.d_negative.iter()).all(|&x| x == 0.0));
}
