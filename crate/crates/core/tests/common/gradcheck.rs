//! Finite-difference checks of composed losses, shared by the gradient
//! suite and the acceptance run.

use event_tensors::models::{CompositionModel, ModelDims, ModelKind};
use event_tensors::training::{event_margin_loss, word_softmax_loss, SoftmaxHead};
use rand::Rng;

use super::{central_diff, rand_vec, rel_err, seeded};

pub const STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
pub const FLOOR: f64 = 1e-5;

fn perturbed_model(model: &CompositionModel, block: usize, i: usize, x: f64) -> CompositionModel {
    let mut m = model.clone();
    m.param_blocks_mut()[block][i] = x;
    m
}

/// Check every parameter and input coordinate of `loss(model, inputs)`.
fn check_all(
    label: &str,
    model: &CompositionModel,
    inputs: &[Vec<f64>],
    loss: &dyn Fn(&CompositionModel, &[Vec<f64>]) -> f64,
    d_params: &[Vec<f64>],
    d_inputs: &[Vec<f64>],
) -> f64 {
    let mut worst = 0.0f64;
    for (b, block) in model.param_blocks().iter().enumerate() {
        for i in 0..block.len() {
            let f = |x: &[f64]| loss(&perturbed_model(model, b, i, x[0]), inputs);
            let num = central_diff(&f, &[block[i]], 0, STEP);
            let e = rel_err(d_params[b][i], num, FLOOR);
            assert!(e <= TOL, "{label}: block {b}[{i}] analytic {} numeric {num}", d_params[b][i]);
            worst = worst.max(e);
        }
    }
    for (slot, x0) in inputs.iter().enumerate() {
        for i in 0..x0.len() {
            let f = |x: &[f64]| {
                let mut ins = inputs.to_vec();
                ins[slot] = x.to_vec();
                loss(model, &ins)
            };
            let num = central_diff(&f, x0, i, STEP);
            let e = rel_err(d_inputs[slot][i], num, FLOOR);
            assert!(e <= TOL, "{label}: input {slot}[{i}] analytic {} numeric {num}", d_inputs[slot][i]);
            worst = worst.max(e);
        }
    }
    worst
}

fn add(acc: &mut [Vec<f64>], g: &[Vec<f64>]) {
    for (a, b) in acc.iter_mut().zip(g) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

/// Margin loss over three composed events; inputs are the nine slot vectors.
pub fn margin_case(kind: ModelKind, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (d, h, dp) = (4, 3, 3);
    let model = CompositionModel::new(kind, ModelDims::new(d, h, dp), seed.is_multiple_of(2), seed).unwrap();
    let inputs: Vec<Vec<f64>> = (0..9).map(|_| rand_vec(&mut rng, d)).collect();
    // margin 2.5 keeps the hinge active for any cosines
    let margin = 2.5;
    let loss = |m: &CompositionModel, x: &[Vec<f64>]| {
        let e: Vec<_> = (0..3)
            .map(|n| m.compose(&x[3 * n], &x[3 * n + 1], &x[3 * n + 2]).unwrap())
            .collect();
        event_margin_loss(&e[0], &e[1], &e[2], margin).unwrap().loss
    };
    let e: Vec<_> = (0..3)
        .map(|n| model.compose(&inputs[3 * n], &inputs[3 * n + 1], &inputs[3 * n + 2]).unwrap())
        .collect();
    let ml = event_margin_loss(&e[0], &e[1], &e[2], margin).unwrap();
    assert!(ml.loss > 0.0);
    let mut d_params = model.zero_grads();
    let mut d_inputs = vec![vec![0.0; d]; 9];
    for (n, g) in [&ml.d_input, &ml.d_target, &ml.d_negative].into_iter().enumerate() {
        let cg = model
            .compose_with_grads(&inputs[3 * n], &inputs[3 * n + 1], &inputs[3 * n + 2], g)
            .unwrap();
        add(&mut d_params, &cg.params);
        add(&mut d_inputs[3 * n..3 * n + 3], &[cg.ds.to_vec(), cg.dp.to_vec(), cg.d_o.to_vec()]);
    }
    check_all(&format!("{kind} margin seed {seed}"), &model, &inputs, &loss, &d_params, &d_inputs)
}

/// Word softmax over one composed event; the head is checked as well.
pub fn softmax_case(kind: ModelKind, seed: u64) -> f64 {
    let mut rng = seeded(seed ^ 0xABCD);
    let (d, h, dp) = (4, 3, 3);
    let model = CompositionModel::new(kind, ModelDims::new(d, h, dp), seed % 2 == 1, seed).unwrap();
    let inputs: Vec<Vec<f64>> = (0..3).map(|_| rand_vec(&mut rng, d)).collect();
    let mut head = SoftmaxHead::new(5, model.output_dim(), seed);
    for x in head.bias.iter_mut() {
        *x = rng.random_range(-0.5..0.5);
    }
    let word = (seed % 5) as usize;
    let head_loss = |m: &CompositionModel, hd: &SoftmaxHead, x: &[Vec<f64>]| {
        let e = m.compose(&x[0], &x[1], &x[2]).unwrap();
        word_softmax_loss(&e, word, hd).unwrap().loss
    };
    let loss = |m: &CompositionModel, x: &[Vec<f64>]| head_loss(m, &head, x);
    let e = model.compose(&inputs[0], &inputs[1], &inputs[2]).unwrap();
    let sl = word_softmax_loss(&e, word, &head).unwrap();
    let cg = model
        .compose_with_grads(&inputs[0], &inputs[1], &inputs[2], &sl.d_event)
        .unwrap();
    let label = format!("{kind} softmax seed {seed}");
    let mut worst = check_all(
        &label,
        &model,
        &inputs,
        &loss,
        &cg.params,
        &[cg.ds.to_vec(), cg.dp.to_vec(), cg.d_o.to_vec()],
    );
    let analytic = [sl.d_projection.data().to_vec(), sl.d_bias.to_vec()];
    for b in 0..2 {
        let theta = head.param_blocks()[b].to_vec();
        for i in 0..theta.len() {
            let f = |x: &[f64]| {
                let mut hd = head.clone();
                hd.param_blocks_mut()[b][i] = x[0];
                head_loss(&model, &hd, &inputs)
            };
            let num = central_diff(&f, &[theta[i]], 0, STEP);
            let e = rel_err(analytic[b][i], num, FLOOR);
            assert!(e <= TOL, "{label}: head block {b}[{i}] analytic {} numeric {num}", analytic[b][i]);
            worst = worst.max(e);
        }
    }
    worst
}
