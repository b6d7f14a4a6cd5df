use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Per-parameter squared-gradient accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    accumulators: Vec<Vec<f64>>,
    epsilon: f64,
}

impl AdagradState {
    pub fn new(block_sizes: &[usize], epsilon: f64) -> Self {
        AdagradState {
            accumulators: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            epsilon,
        }
    }

    pub fn for_blocks(blocks: &[&[f64]]) -> Self {
        let sizes: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
        AdagradState::new(&sizes, DEFAULT_EPSILON)
    }

    pub fn accumulators(&self) -> &[Vec<f64>] {
        &self.accumulators
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Update only `rows` (each `row_len` wide) of block `block`.
    pub(crate) fn step_rows<'g, I>(
        &mut self,
        block: usize,
        params: &mut [f64],
        row_len: usize,
        rows: I,
        lr: f64,
    ) where
        I: IntoIterator<Item = (usize, &'g [f64])>,
    {
        let acc = &mut self.accumulators[block];
        for (row, grad) in rows {
            let off = row * row_len;
            update(
                &mut params[off..off + row_len],
                grad,
                &mut acc[off..off + row_len],
                lr,
                self.epsilon,
            );
        }
    }
}

fn update(params: &mut [f64], grads: &[f64], acc: &mut [f64], lr: f64, eps: f64) {
    for ((p, &g), a) in params.iter_mut().zip(grads).zip(acc.iter_mut()) {
        if g == 0.0 {
            continue;
        }
        *a += g * g;
        *p -= lr * g / (a.sqrt() + eps);
    }
}

/// `acc += g²; θ -= lr · g / (√acc + ε)`, elementwise over every block.
pub fn adagrad_step(
    params: &mut [&mut [f64]],
    grads: &[Vec<f64>],
    state: &mut AdagradState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.accumulators.len() {
        return Err(Error::shape(
            "adagrad_step",
            format!(
                "{} parameter blocks, {} gradient blocks, {} accumulators",
                params.len(),
                grads.len(),
                state.accumulators.len()
            ),
        ));
    }
    for (b, ((p, g), a)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.accumulators.iter_mut())
        .enumerate()
    {
        if p.len() != g.len() || p.len() != a.len() {
            return Err(Error::shape(
                "adagrad_step",
                format!("block {b}: params {}, grads {}, acc {}", p.len(), g.len(), a.len()),
            ));
        }
        update(p, g, a, lr, state.epsilon);
    }
    Ok(())
}
