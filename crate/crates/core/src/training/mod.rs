//! Minibatch training of a composition model (and its word embeddings)
//! under either the event-prediction or the word-prediction objective.

mod adagrad;
mod config;
mod loss;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::Serialize;

pub use adagrad::{adagrad_step, AdagradState, DEFAULT_EPSILON};
pub use config::{Objective, TrainConfig};
pub use loss::{event_margin_loss, l2_penalty, word_softmax_loss, MarginLoss, SoftmaxHead, SoftmaxLoss};

use crate::corpus::{make_event_pairs, make_word_contexts, Corpus, WordClasses};
use crate::embeddings::EmbeddingTable;
use crate::encoder::{EncodedEvent, EventEncoder};
use crate::error::{Error, Result};
use crate::models::CompositionModel;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean over batches of `data loss + λ Σθ²`.
    pub mean_loss: f64,
    pub mean_data_loss: f64,
    pub mean_penalty: f64,
    pub batches: usize,
    pub instances: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub steps: usize,
}

impl TrainReport {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_loss).collect()
    }

    /// One tab-separated line per epoch with a header.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("epoch\tmean_loss\tmean_data_loss\tmean_penalty\tbatches\tinstances\n");
        for e in &self.epochs {
            s.push_str(&format!(
                "{}\t{:.9}\t{:.9}\t{:.9}\t{}\t{}\n",
                e.epoch, e.mean_loss, e.mean_data_loss, e.mean_penalty, e.batches, e.instances
            ));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CompositionModel,
    pub table: EmbeddingTable,
    pub head: Option<SoftmaxHead>,
    pub report: TrainReport,
}

/// Gradient buffers for one minibatch.
struct BatchGrads {
    model: Vec<Vec<f64>>,
    head: Option<[Vec<f64>; 2]>,
    rows: BTreeMap<usize, Vec<f64>>,
    dim: usize,
}

impl BatchGrads {
    fn new(model: &CompositionModel, head: Option<&SoftmaxHead>, dim: usize) -> Self {
        BatchGrads {
            model: model.zero_grads(),
            head: head.map(|h| {
                [
                    vec![0.0; h.projection.data().len()],
                    vec![0.0; h.bias.dim()],
                ]
            }),
            rows: BTreeMap::new(),
            dim,
        }
    }

    /// Backpropagate upstream `g` (already batch-scaled) through the model
    /// into parameter and embedding-row gradients.
    fn backprop(&mut self, model: &CompositionModel, ev: &EncodedEvent, g: &[f64]) -> Result<()> {
        if g.iter().all(|&x| x == 0.0) {
            return Ok(());
        }
        let [s, p, o] = &ev.inputs;
        let grads = model.compose_with_grads(s, p, o, g)?;
        for (acc, block) in self.model.iter_mut().zip(&grads.params) {
            for (a, x) in acc.iter_mut().zip(block) {
                *a += x;
            }
        }
        for (rows, slot) in ev.rows.iter().zip([&grads.ds, &grads.dp, &grads.d_o]) {
            let w = rows.weight();
            for &r in &rows.rows {
                let acc = self.rows.entry(r).or_insert_with(|| vec![0.0; self.dim]);
                for (a, x) in acc.iter_mut().zip(slot.iter()) {
                    *a += w * x;
                }
            }
        }
        Ok(())
    }
}

struct Optimizer {
    model: AdagradState,
    head: Option<AdagradState>,
    rows: AdagradState,
}

/// Train `model` and `table` on `corpus`.
///
/// Each epoch redraws the event pairs (targets and negatives) for the
/// event objective and reshuffles the instances. A batch applies one Adagrad
/// step to the model, the softmax head and the embedding rows it touched.
/// Embedding rows are not part of the l2 penalty.
pub fn train(
    config: &TrainConfig,
    corpus: &Corpus,
    mut table: EmbeddingTable,
    mut model: CompositionModel,
) -> Result<TrainOutcome> {
    config.validate()?;
    EventEncoder::new(&model, &table)?;
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus has no events".into()));
    }
    let mut head = match config.objective {
        Objective::PredictWords => Some(SoftmaxHead::new(
            WordClasses::new(&table, config.vocab_cap).len(),
            model.output_dim(),
            config.seed,
        )),
        Objective::PredictEvents => None,
    };
    let mut report = TrainReport::default();
    if config.epochs == 0 {
        return Ok(TrainOutcome {
            model,
            table,
            head,
            report,
        });
    }

    let word_contexts = match config.objective {
        Objective::PredictWords => {
            let classes = WordClasses::new(&table, config.vocab_cap);
            make_word_contexts(corpus, &table, classes)
        }
        Objective::PredictEvents => Vec::new(),
    };
    let mut pair_rng = rng::substream(config.seed, rng::stream::EVENT_PAIRS);
    let mut shuffle_rng = rng::substream(config.seed, rng::stream::SHUFFLE);
    let mut opt = Optimizer {
        model: AdagradState::for_blocks(&model.param_blocks()),
        head: head.as_ref().map(|h| AdagradState::for_blocks(&h.param_blocks())),
        rows: AdagradState::new(&[table.data().len()], DEFAULT_EPSILON),
    };
    let dim = table.dim();

    for epoch in 1..=config.epochs {
        // Instances are indices into either the pair list or the word list.
        let pairs = match config.objective {
            Objective::PredictEvents => make_event_pairs(corpus, config.window, &mut pair_rng),
            Objective::PredictWords => Vec::new(),
        };
        let n = match config.objective {
            Objective::PredictEvents => pairs.len(),
            Objective::PredictWords => word_contexts.len(),
        };
        if n == 0 {
            return Err(Error::Empty(format!(
                "{} training stream is empty",
                config.objective.as_str()
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle_rng);

        let mut sum_obj = 0.0;
        let mut sum_data = 0.0;
        let mut sum_pen = 0.0;
        let mut batches = 0usize;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let scale = 1.0 / batch.len() as f64;
            let mut grads = BatchGrads::new(&model, head.as_ref(), dim);
            let mut data_loss = 0.0;
            {
                let enc = EventEncoder::new(&model, &table)?;
                for &idx in batch {
                    match config.objective {
                        Objective::PredictEvents => {
                            let pair = pairs[idx];
                            let ev = corpus.events();
                            let ei = enc.encode(&ev[pair.input].triple)?;
                            let et = enc.encode(&ev[pair.target].triple)?;
                            let en = enc.encode(&ev[pair.negative].triple)?;
                            let l = event_margin_loss(
                                &ei.embedding,
                                &et.embedding,
                                &en.embedding,
                                config.margin,
                            )?;
                            data_loss += l.loss;
                            if l.loss > 0.0 {
                                grads.backprop(&model, &ei, &l.d_input.scaled(scale))?;
                                grads.backprop(&model, &et, &l.d_target.scaled(scale))?;
                                grads.backprop(&model, &en, &l.d_negative.scaled(scale))?;
                            }
                        }
                        Objective::PredictWords => {
                            let wc = word_contexts[idx];
                            let ev = enc.encode(&corpus.events()[wc.event].triple)?;
                            let h = head.as_ref().expect("word objective has a head");
                            let [dp, db] = grads.head.as_mut().expect("head grads");
                            let (loss, de) = loss::word_softmax_accumulate_scaled(
                                &ev.embedding,
                                wc.word,
                                h,
                                dp,
                                db,
                                scale,
                            )?;
                            data_loss += loss;
                            grads.backprop(&model, &ev, &de.scaled(scale))?;
                        }
                    }
                }
            }
            let data_mean = data_loss * scale;

            let mut penalized: Vec<&[f64]> = model.param_blocks();
            if let Some(h) = &head {
                penalized.extend(h.param_blocks());
            }
            let (penalty, pen_grads) = l2_penalty(&penalized, config.lambda);
            let objective = data_mean + penalty;
            debug_assert!((objective - (data_mean + penalty)).abs() <= 1e-9);
            if !objective.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    step: b,
                    value: objective,
                });
            }
            let n_model = grads.model.len();
            for (acc, pg) in grads.model.iter_mut().zip(&pen_grads[..n_model]) {
                for (a, x) in acc.iter_mut().zip(pg) {
                    *a += x;
                }
            }
            if let Some(hg) = grads.head.as_mut() {
                for (acc, pg) in hg.iter_mut().zip(&pen_grads[n_model..]) {
                    for (a, x) in acc.iter_mut().zip(pg) {
                        *a += x;
                    }
                }
            }

            adagrad_step(
                &mut model.param_blocks_mut(),
                &grads.model,
                &mut opt.model,
                config.learning_rate,
            )?;
            if let (Some(h), Some(st), Some(hg)) = (head.as_mut(), opt.head.as_mut(), grads.head) {
                adagrad_step(&mut h.param_blocks_mut(), &hg, st, config.learning_rate)?;
            }
            if config.update_embeddings {
                let row_len = table.dim();
                opt.rows.step_rows(
                    0,
                    table.data_mut(),
                    row_len,
                    grads.rows.iter().map(|(&r, g)| (r, g.as_slice())),
                    config.learning_rate,
                );
            }

            sum_obj += objective;
            sum_data += data_mean;
            sum_pen += penalty;
            batches += 1;
            report.steps += 1;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: sum_obj / batches as f64,
            mean_data_loss: sum_data / batches as f64,
            mean_penalty: sum_pen / batches as f64,
            batches,
            instances: n,
        };
        log::info!(
            "epoch {epoch}: loss {:.6} (data {:.6}, penalty {:.6})",
            stats.mean_loss,
            stats.mean_data_loss,
            stats.mean_penalty
        );
        report.epochs.push(stats);
    }

    Ok(TrainOutcome {
        model,
        table,
        head,
        report,
    })
}
