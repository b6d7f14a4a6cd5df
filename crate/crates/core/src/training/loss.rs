//! Objectives: cosine margin ranking over events, softmax over context
//! words, and the l2 penalty.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{cosine, cosine_grads, dot, Matrix, Vector};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct MarginLoss {
    pub loss: f64,
    pub d_input: Vector,
    pub d_target: Vector,
    pub d_negative: Vector,
    /// Some operand had zero norm and fell back to cosine 0.
    pub degenerate: bool,
}

/// `max(0, m + cos(e_i, e_n) - cos(e_i, e_t))` and its gradients. All
/// gradients are exactly zero when the hinge is inactive.
pub fn event_margin_loss(
    input: &[f64],
    target: &[f64],
    negative: &[f64],
    margin: f64,
) -> Result<MarginLoss> {
    if input.len() != target.len() || input.len() != negative.len() {
        return Err(Error::shape(
            "event_margin_loss",
            format!(
                "input {}, target {}, negative {}",
                input.len(),
                target.len(),
                negative.len()
            ),
        ));
    }
    let pos = cosine(input, target);
    let neg = cosine(input, negative);
    let degenerate = pos.degenerate || neg.degenerate;
    let raw = margin + neg.value - pos.value;
    let d = input.len();
    if raw <= 0.0 {
        return Ok(MarginLoss {
            loss: 0.0,
            d_input: Vector::zeros(d),
            d_target: Vector::zeros(d),
            d_negative: Vector::zeros(d),
            degenerate,
        });
    }
    let (_, di_pos, dt) = cosine_grads(input, target);
    let (_, di_neg, dn) = cosine_grads(input, negative);
    let mut d_input = di_neg;
    d_input.axpy(-1.0, &di_pos);
    Ok(MarginLoss {
        loss: raw,
        d_input,
        d_target: dt.scaled(-1.0),
        d_negative: dn,
        degenerate,
    })
}

/// Linear layer plus softmax over word classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxHead {
    pub projection: Matrix,
    pub bias: Vector,
}

impl SoftmaxHead {
    /// Uniform `[-r, r]` projection with `r = sqrt(6 / (classes + dim))`,
    /// zero bias.
    pub fn new(classes: usize, event_dim: usize, seed: u64) -> Self {
        let mut rng = rng::substream(seed, rng::stream::HEAD_INIT);
        let r = (6.0 / (classes + event_dim) as f64).sqrt();
        let mut projection = Matrix::zeros(classes, event_dim);
        for x in projection.data_mut() {
            *x = rng.random_range(-r..=r);
        }
        SoftmaxHead {
            projection,
            bias: Vector::zeros(classes),
        }
    }

    pub fn classes(&self) -> usize {
        self.projection.rows()
    }

    pub fn event_dim(&self) -> usize {
        self.projection.cols()
    }

    pub fn param_blocks(&self) -> Vec<&[f64]> {
        vec![self.projection.data(), self.bias.as_slice()]
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.projection.data_mut(), &mut self.bias[..]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxLoss {
    pub loss: f64,
    pub d_event: Vector,
    pub d_projection: Matrix,
    pub d_bias: Vector,
}

/// Cross-entropy of `softmax(projection · e + bias)` at `word`.
pub fn word_softmax_loss(e: &[f64], word: usize, head: &SoftmaxHead) -> Result<SoftmaxLoss> {
    let mut d_projection = Matrix::zeros(head.classes(), head.event_dim());
    let mut d_bias = Vector::zeros(head.classes());
    let (loss, d_event) =
        word_softmax_accumulate(e, word, head, d_projection.data_mut(), &mut d_bias)?;
    Ok(SoftmaxLoss {
        loss,
        d_event,
        d_projection,
        d_bias,
    })
}

/// Same as `word_softmax_loss`, adding the head gradients (scaled by
/// `scale`) into caller buffers instead of allocating them.
pub(crate) fn word_softmax_accumulate_scaled(
    e: &[f64],
    word: usize,
    head: &SoftmaxHead,
    d_projection: &mut [f64],
    d_bias: &mut [f64],
    scale: f64,
) -> Result<(f64, Vector)> {
    let classes = head.classes();
    let dim = head.event_dim();
    if e.len() != dim {
        return Err(Error::shape(
            "word_softmax_loss",
            format!("event dim {} vs head dim {dim}", e.len()),
        ));
    }
    if word >= classes {
        return Err(Error::Invalid(format!("word id {word} >= vocabulary size {classes}")));
    }
    let logits: Vec<f64> = (0..classes)
        .map(|c| dot(head.projection.row(c), e) + head.bias[c])
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
    let log_z = max + sum.ln();
    let loss = log_z - logits[word];
    let mut d_event = vec![0.0; dim];
    for (c, z) in logits.iter().enumerate() {
        let mut delta = (z - log_z).exp();
        if c == word {
            delta -= 1.0;
        }
        let row = head.projection.row(c);
        for (de, w) in d_event.iter_mut().zip(row) {
            *de += delta * w;
        }
        let sd = scale * delta;
        d_bias[c] += sd;
        for (dp, x) in d_projection[c * dim..(c + 1) * dim].iter_mut().zip(e) {
            *dp += sd * x;
        }
    }
    Ok((loss, Vector::from(d_event)))
}

fn word_softmax_accumulate(
    e: &[f64],
    word: usize,
    head: &SoftmaxHead,
    d_projection: &mut [f64],
    d_bias: &mut [f64],
) -> Result<(f64, Vector)> {
    word_softmax_accumulate_scaled(e, word, head, d_projection, d_bias, 1.0)
}

/// `λ Σ θ²` over all blocks and its gradient `2 λ θ`.
pub fn l2_penalty(blocks: &[&[f64]], lambda: f64) -> (f64, Vec<Vec<f64>>) {
    let mut value = 0.0;
    let grads = blocks
        .iter()
        .map(|b| {
            value += b.iter().map(|x| x * x).sum::<f64>();
            b.iter().map(|x| 2.0 * lambda * x).collect()
        })
        .collect();
    (lambda * value, grads)
}
