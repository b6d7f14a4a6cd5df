//! Multiple-choice narrative cloze: instance generation, optional
//! coherence curation, and scoring.
//!
//! Instance files are JSON Lines, one object per instance:
//!
//! ```json
//! {"doc_id":"d1",
//!  "context":[{"doc_id":"d1","sent_index":0,"subject":["police"],"predicate":["chased"],"object":["robber"],"sentence_tokens":[]}],
//!  "held_out":{...},
//!  "distractors":[{...}, ...]}
//! ```

use std::collections::HashSet;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EventRecord, StopEventList, Triple};
use crate::embeddings::{normalize_token, EmbeddingTable};
use crate::encoder::EventEmbedder;
use crate::error::{Error, Result};
use crate::linalg::{cosine, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClozeInstance {
    pub doc_id: String,
    pub context: Vec<EventRecord>,
    pub held_out: EventRecord,
    pub distractors: Vec<EventRecord>,
}

impl ClozeInstance {
    /// Held-out event first, then distractors.
    pub fn candidates(&self) -> impl Iterator<Item = &EventRecord> {
        std::iter::once(&self.held_out).chain(&self.distractors)
    }
}

pub fn write_instances(instances: &[ClozeInstance]) -> Result<String> {
    let mut out = String::new();
    for inst in instances {
        out.push_str(&serde_json::to_string(inst)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn read_instances(text: &str, name: &str) -> Result<Vec<ClozeInstance>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: name.into(),
                line: i + 1,
                message: format!("expected one JSON cloze instance per line: {e}"),
            })
        })
        .collect()
}

pub fn load_instances(path: impl AsRef<Path>) -> Result<Vec<ClozeInstance>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_instances(&text, &path.display().to_string())
}

/// Inputs for the mechanical coherence criteria.
#[derive(Debug, Clone, Copy)]
pub struct Curation<'a> {
    pub stoplist: &'a StopEventList,
    /// Word vectors used to find the nearest context entity.
    pub table: &'a EmbeddingTable,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ClozeStats {
    /// Documents with fewer than two (surviving) events.
    pub skipped_documents: usize,
    /// Held-out events without enough distractor candidates.
    pub skipped_instances: usize,
    /// Held-out events sharing no argument token with their context.
    pub discarded_no_overlap: usize,
    /// Held-out events that are stop events (re-curation only).
    pub discarded_stop: usize,
    /// Distractor arguments rewritten to a context entity.
    pub substitutions: usize,
}

fn argument_tokens(t: &Triple) -> impl Iterator<Item = String> + '_ {
    t.arguments().flatten().map(|tok| normalize_token(tok))
}

/// True when some argument token of `held` appears as an argument token of
/// a context event.
pub fn shares_entity(held: &Triple, context: &[EventRecord]) -> bool {
    let ctx: HashSet<String> = context.iter().flat_map(|e| argument_tokens(&e.triple)).collect();
    argument_tokens(held).any(|t| ctx.contains(&t))
}

/// Distinct argument phrases of the context events, first-seen order.
fn context_entities(context: &[EventRecord]) -> Vec<Vec<String>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for e in context {
        for arg in e.triple.arguments() {
            let norm: Vec<String> = arg.iter().map(|t| normalize_token(t)).collect();
            if seen.insert(norm.clone()) {
                out.push(norm);
            }
        }
    }
    out
}

/// Replace each non-empty argument of `distractor` with the context entity
/// whose phrase vector has the highest cosine to it (earliest on ties).
pub fn substitute_entities(
    distractor: &mut Triple,
    context: &[EventRecord],
    table: &EmbeddingTable,
) -> Result<usize> {
    let entities = context_entities(context);
    if entities.is_empty() {
        return Ok(0);
    }
    let vectors: Vec<Vector> = entities
        .iter()
        .map(|e| table.embed_phrase(e))
        .collect::<Result<_>>()?;
    let mut count = 0;
    for slot in [&mut distractor.subject, &mut distractor.object] {
        if slot.is_empty() {
            continue;
        }
        let v = table.embed_phrase(slot)?;
        let mut best = 0;
        let mut best_cos = f64::NEG_INFINITY;
        for (i, ev) in vectors.iter().enumerate() {
            let c = cosine(&v, ev).value;
            if c > best_cos {
                best = i;
                best_cos = c;
            }
        }
        *slot = entities[best].clone();
        count += 1;
    }
    Ok(count)
}

#[derive(Debug, Clone, Default)]
pub struct McncOutcome {
    pub instances: Vec<ClozeInstance>,
    pub stats: ClozeStats,
}

/// Build one cloze instance per event of every document with at least two
/// events: that event is held out, the rest form the context, and
/// `n_distractors` distinct events are drawn from other documents.
///
/// With `curation`, stop events are removed first, held-out events must
/// share an argument token with the context, and distractor arguments are
/// rewritten to their nearest context entity.
pub fn generate_mcnc<R: Rng>(
    corpus: &Corpus,
    n_distractors: usize,
    rng: &mut R,
    curation: Option<Curation<'_>>,
) -> Result<McncOutcome> {
    if n_distractors == 0 {
        return Err(Error::Invalid("n_distractors must be >= 1".into()));
    }
    let keep = |e: &EventRecord| curation.is_none_or(|c| !c.stoplist.is_stop(&e.triple));
    let docs: Vec<Vec<&EventRecord>> = (0..corpus.num_documents())
        .map(|d| corpus.document(d).iter().filter(|e| keep(e)).collect())
        .collect();
    let pool: Vec<(usize, &EventRecord)> = docs
        .iter()
        .enumerate()
        .flat_map(|(d, evs)| evs.iter().map(move |e| (d, *e)))
        .collect();

    let mut out = McncOutcome::default();
    for (d, events) in docs.iter().enumerate() {
        if events.len() < 2 {
            out.stats.skipped_documents += 1;
            continue;
        }
        for h in 0..events.len() {
            let held = events[h];
            let context: Vec<EventRecord> = events
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != h)
                .map(|(_, e)| (*e).clone())
                .collect();
            if curation.is_some() && !shares_entity(&held.triple, &context) {
                out.stats.discarded_no_overlap += 1;
                continue;
            }
            let candidates: Vec<&EventRecord> = pool
                .iter()
                .filter(|(od, e)| *od != d && e.triple != held.triple)
                .map(|(_, e)| *e)
                .collect();
            if candidates.len() < n_distractors {
                out.stats.skipped_instances += 1;
                continue;
            }
            let mut distractors: Vec<EventRecord> = sample(rng, candidates.len(), n_distractors)
                .into_iter()
                .map(|i| candidates[i].clone())
                .collect();
            if let Some(c) = curation {
                for dist in &mut distractors {
                    out.stats.substitutions +=
                        substitute_entities(&mut dist.triple, &context, c.table)?;
                }
            }
            out.instances.push(ClozeInstance {
                doc_id: held.doc_id.clone(),
                context,
                held_out: held.clone(),
                distractors,
            });
        }
    }
    Ok(out)
}

/// Apply the mechanical curation criteria to existing instances.
pub fn curate_instances(
    instances: Vec<ClozeInstance>,
    curation: Curation<'_>,
) -> Result<(Vec<ClozeInstance>, ClozeStats)> {
    let mut stats = ClozeStats::default();
    let mut kept = Vec::new();
    for mut inst in instances {
        if curation.stoplist.is_stop(&inst.held_out.triple) {
            stats.discarded_stop += 1;
            continue;
        }
        inst.context.retain(|e| !curation.stoplist.is_stop(&e.triple));
        inst.distractors.retain(|e| !curation.stoplist.is_stop(&e.triple));
        if inst.context.is_empty() || inst.distractors.is_empty() {
            stats.skipped_instances += 1;
            continue;
        }
        if !shares_entity(&inst.held_out.triple, &inst.context) {
            stats.discarded_no_overlap += 1;
            continue;
        }
        for dist in &mut inst.distractors {
            stats.substitutions += substitute_entities(&mut dist.triple, &inst.context, curation.table)?;
        }
        kept.push(inst);
    }
    Ok((kept, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Mean cosine to the context events.
    #[default]
    Mean,
    /// Highest cosine to any context event.
    Max,
}

/// Score each candidate against the context embeddings.
pub fn score_candidates(context: &[Vector], candidates: &[Vector], agg: Aggregation) -> Vec<f64> {
    candidates
        .iter()
        .map(|c| {
            let sims = context.iter().map(|x| cosine(c, x).value);
            match agg {
                Aggregation::Mean => sims.sum::<f64>() / context.len() as f64,
                Aggregation::Max => sims.fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClozeReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// Instances where a distractor tied the held-out score at the maximum.
    pub ties: usize,
}

/// Accuracy of picking the held-out event as the strict argmax of the
/// candidate scores. Ties count as errors.
pub fn eval_mcnc<E: EventEmbedder + ?Sized>(
    embedder: &E,
    instances: &[ClozeInstance],
    agg: Aggregation,
) -> Result<ClozeReport> {
    if instances.is_empty() {
        return Err(Error::Empty("cloze instance list".into()));
    }
    let (mut correct, mut ties) = (0, 0);
    for inst in instances {
        if inst.context.is_empty() {
            return Err(Error::Invalid(format!("instance for {} has no context", inst.doc_id)));
        }
        let ctx: Vec<Vector> = inst
            .context
            .iter()
            .map(|e| embedder.embed_event(&e.triple))
            .collect::<Result<_>>()?;
        let cands: Vec<Vector> = inst
            .candidates()
            .map(|e| embedder.embed_event(&e.triple))
            .collect::<Result<_>>()?;
        let scores = score_candidates(&ctx, &cands, agg);
        let best_other = scores[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if scores[0] > best_other {
            correct += 1;
        } else if scores[0] == best_other {
            ties += 1;
        }
    }
    Ok(ClozeReport {
        accuracy: correct as f64 / instances.len() as f64,
        correct,
        total: instances.len(),
        ties,
    })
}
