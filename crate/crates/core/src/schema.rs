//! Exact nearest-neighbour event index and seed-driven schema generation.
//!
//! Distances are cosine distances, `1 - cos`. Starting from a seed event,
//! neighbours are scanned by increasing distance and accepted when they pass
//! three gates:
//!
//! * **predicate**: the neighbour's predicate vector is farther than `alpha`
//!   from every predicate already in the schema;
//! * **entity**: at least one argument is closer than `beta` to a schema
//!   entity, and is rewritten to that entity;
//! * **coherence**: the rewritten event, recomposed, has mean distance below
//!   `gamma` to the events accepted so far.
//!
//! Gates read word vectors from a separate gate table (normally the
//! pretrained vectors); composition uses the encoder's own table.

use std::fmt::Write as _;

use serde::Serialize;

use crate::corpus::{EventRecord, Triple};
use crate::embeddings::{normalize_token, EmbeddingTable};
use crate::encoder::{EventEmbedder, EventEncoder};
use crate::error::{Error, Result};
use crate::linalg::{cosine, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub event: EventRecord,
    pub embedding: Vector,
    /// Zero-norm embeddings never appear in neighbour lists.
    pub zero_norm: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventIndex {
    entries: Vec<IndexEntry>,
    fingerprint: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub cosine: f64,
}

/// Embed every event with the encoder's model.
pub fn build_index(events: &[EventRecord], encoder: &EventEncoder<'_>) -> Result<EventIndex> {
    if events.is_empty() {
        return Err(Error::Empty("cannot index an empty corpus".into()));
    }
    let mut zero = 0;
    let entries = events
        .iter()
        .map(|e| {
            let embedding = encoder.embed_event(&e.triple)?;
            let zero_norm = embedding.norm() == 0.0;
            zero += usize::from(zero_norm);
            Ok(IndexEntry {
                event: e.clone(),
                embedding,
                zero_norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if zero > 0 {
        log::warn!("{zero} indexed events have zero-norm embeddings and are excluded");
    }
    Ok(EventIndex {
        entries,
        fingerprint: encoder.model.fingerprint(),
    })
}

impl EventIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Exhaustive top-`k` by cosine, ties broken by index order.
    pub fn nearest(&self, query: &[f64], k: usize) -> Vec<Neighbor> {
        let mut scored: Vec<Neighbor> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.zero_norm)
            .map(|(index, e)| Neighbor {
                index,
                cosine: cosine(query, &e.embedding).value,
            })
            .collect();
        scored.sort_by(|a, b| b.cosine.total_cmp(&a.cosine).then(a.index.cmp(&b.index)));
        scored.truncate(k);
        scored
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemaParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub max_size: usize,
}

impl Default for SchemaParams {
    fn default() -> Self {
        SchemaParams {
            k: 500,
            alpha: 0.5,
            beta: 0.25,
            gamma: 0.2,
            max_size: 10,
        }
    }
}

/// One schema event after grounding.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaEvent {
    /// Event with unified arguments replaced by their entity tokens.
    pub event: EventRecord,
    /// Index entry the event came from; `None` for the seed.
    pub source: Option<usize>,
    pub subject_entity: Option<usize>,
    pub object_entity: Option<usize>,
    /// Arguments rewritten under the entity gate (subject, object).
    pub unified: [bool; 2],
    /// Recomposed event vector.
    pub embedding: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub seed: EventRecord,
    /// First element is the seed.
    pub events: Vec<SchemaEvent>,
    /// Entity pool, in order of creation.
    pub entities: Vec<Vec<String>>,
    /// Variable symbol per entity in first-appearance order; filled by
    /// [`ground_entities`].
    pub bindings: Vec<(String, Vec<String>)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GateStats {
    pub candidates: usize,
    pub scanned: usize,
    pub rejected_predicate: usize,
    pub rejected_entity: usize,
    pub rejected_coherence: usize,
    pub accepted: usize,
    /// `k` was larger than the index and got clamped.
    pub k_clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaOutcome {
    pub schema: Schema,
    pub stats: GateStats,
}

struct EntityState {
    tokens: Vec<String>,
    vector: Vector,
}

fn normalized(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| normalize_token(t)).collect()
}

/// Grow a schema around `seed` from its nearest neighbours in `index`.
pub fn generate_schema(
    seed: &EventRecord,
    index: &EventIndex,
    encoder: &EventEncoder<'_>,
    gate_table: &EmbeddingTable,
    params: &SchemaParams,
) -> Result<SchemaOutcome> {
    if params.max_size == 0 {
        return Err(Error::Invalid("max_size must be >= 1".into()));
    }
    for (name, v) in [("alpha", params.alpha), ("beta", params.beta), ("gamma", params.gamma)] {
        if !(0.0..=2.0).contains(&v) {
            return Err(Error::Invalid(format!("{name} = {v} outside [0, 2]")));
        }
    }
    if encoder.model.fingerprint() != index.fingerprint {
        return Err(Error::Invalid(
            "index was built with a different model than the encoder".into(),
        ));
    }
    let seed_embedding = encoder.embed_event(&seed.triple)?;
    if seed_embedding.norm() == 0.0 {
        return Err(Error::Invalid(format!("seed {} has a zero-norm embedding", seed.triple)));
    }

    let mut stats = GateStats::default();
    let k = if params.k > index.len() {
        log::warn!("k = {} exceeds index size {}; clamping", params.k, index.len());
        stats.k_clamped = true;
        index.len()
    } else {
        params.k
    };
    let neighbors = index.nearest(&seed_embedding, k);
    stats.candidates = neighbors.len();

    let mut entities: Vec<EntityState> = Vec::new();
    let add_entity = |entities: &mut Vec<EntityState>, tokens: &[String]| -> Result<usize> {
        let norm = normalized(tokens);
        if let Some(i) = entities.iter().position(|e| e.tokens == norm) {
            return Ok(i);
        }
        let vector = gate_table.embed_phrase(&norm)?;
        entities.push(EntityState {
            tokens: norm,
            vector,
        });
        Ok(entities.len() - 1)
    };

    let seed_subject = if seed.triple.subject.is_empty() {
        None
    } else {
        Some(add_entity(&mut entities, &seed.triple.subject)?)
    };
    let seed_object = if seed.triple.object.is_empty() {
        None
    } else {
        Some(add_entity(&mut entities, &seed.triple.object)?)
    };
    let mut predicates = vec![gate_table.embed_phrase(&seed.triple.predicate)?];
    let mut events = vec![SchemaEvent {
        event: seed.clone(),
        source: None,
        subject_entity: seed_subject,
        object_entity: seed_object,
        unified: [false, false],
        embedding: seed_embedding,
    }];

    for nb in neighbors {
        if events.len() >= params.max_size {
            break;
        }
        stats.scanned += 1;
        let cand = &index.entries[nb.index].event;

        let pvec = gate_table.embed_phrase(&cand.triple.predicate)?;
        if predicates
            .iter()
            .any(|q| 1.0 - cosine(&pvec, q).value <= params.alpha)
        {
            stats.rejected_predicate += 1;
            continue;
        }

        // best (entity, distance) per argument slot under beta
        let mut matches: [Option<(usize, f64)>; 2] = [None, None];
        for (slot, arg) in [&cand.triple.subject, &cand.triple.object].into_iter().enumerate() {
            if arg.is_empty() {
                continue;
            }
            let avec = gate_table.embed_phrase(arg)?;
            for (ei, ent) in entities.iter().enumerate() {
                let dist = 1.0 - cosine(&avec, &ent.vector).value;
                if dist < params.beta && matches[slot].is_none_or(|(_, best)| dist < best) {
                    matches[slot] = Some((ei, dist));
                }
            }
        }
        if let [Some((a, da)), Some((b, db))] = matches {
            if a == b {
                if db < da {
                    matches[0] = None;
                } else {
                    matches[1] = None;
                }
            }
        }
        if matches.iter().all(Option::is_none) {
            stats.rejected_entity += 1;
            continue;
        }

        let mut grounded = cand.clone();
        if let Some((e, _)) = matches[0] {
            grounded.triple.subject = entities[e].tokens.clone();
        }
        if let Some((e, _)) = matches[1] {
            grounded.triple.object = entities[e].tokens.clone();
        }
        let embedding = encoder.embed_event(&grounded.triple)?;
        let mean_dist = events
            .iter()
            .map(|ev| 1.0 - cosine(&embedding, &ev.embedding).value)
            .sum::<f64>()
            / events.len() as f64;
        if mean_dist >= params.gamma {
            stats.rejected_coherence += 1;
            continue;
        }

        let subject_entity = match matches[0] {
            Some((e, _)) => Some(e),
            None if !grounded.triple.subject.is_empty() => {
                Some(add_entity(&mut entities, &grounded.triple.subject)?)
            }
            None => None,
        };
        let object_entity = match matches[1] {
            Some((e, _)) => Some(e),
            None if !grounded.triple.object.is_empty() => {
                Some(add_entity(&mut entities, &grounded.triple.object)?)
            }
            None => None,
        };
        predicates.push(pvec);
        events.push(SchemaEvent {
            event: grounded,
            source: Some(nb.index),
            subject_entity,
            object_entity,
            unified: [matches[0].is_some(), matches[1].is_some()],
            embedding,
        });
        stats.accepted += 1;
    }

    let schema = Schema {
        seed: seed.clone(),
        events,
        entities: entities.into_iter().map(|e| e.tokens).collect(),
        bindings: Vec::new(),
    };
    Ok(SchemaOutcome {
        schema: ground_entities(schema),
        stats,
    })
}

/// `X, Y, Z, W, V, U, ...`, then `E<n>`.
pub fn variable_symbol(n: usize) -> String {
    const NAMES: [&str; 10] = ["X", "Y", "Z", "W", "V", "U", "T", "S", "R", "Q"];
    NAMES
        .get(n)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("E{n}"))
}

/// Assign one variable symbol per entity, in order of first appearance
/// over the events (subject before object).
pub fn ground_entities(mut schema: Schema) -> Schema {
    let mut order: Vec<usize> = Vec::new();
    for ev in &schema.events {
        for e in [ev.subject_entity, ev.object_entity].into_iter().flatten() {
            if !order.contains(&e) {
                order.push(e);
            }
        }
    }
    schema.bindings = order
        .into_iter()
        .enumerate()
        .map(|(n, e)| (variable_symbol(n), schema.entities[e].clone()))
        .collect();
    schema
}

impl Schema {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn symbol_of(&self, entity: Option<usize>) -> Option<&str> {
        let tokens = &self.entities[entity?];
        self.bindings
            .iter()
            .find(|(_, t)| t == tokens)
            .map(|(s, _)| s.as_str())
    }

    fn slot_text(&self, entity: Option<usize>, tokens: &[String]) -> String {
        match self.symbol_of(entity) {
            Some(sym) => sym.to_string(),
            None if tokens.is_empty() => "-".to_string(),
            None => tokens.join(" "),
        }
    }

    /// Human-readable schema document.
    pub fn to_text(&self, stats: &GateStats) -> String {
        let mut s = String::new();
        let t = &self.seed.triple;
        let _ = writeln!(
            s,
            "schema seed: {} | {} | {}",
            t.subject.join(" "),
            t.predicate.join(" "),
            t.object.join(" ")
        );
        let _ = writeln!(s, "bindings:");
        for (sym, tokens) in &self.bindings {
            let _ = writeln!(s, "  {sym} = {}", tokens.join(" "));
        }
        let _ = writeln!(s, "events:");
        for (i, ev) in self.events.iter().enumerate() {
            let tr = &ev.event.triple;
            let _ = write!(
                s,
                "  {}. {} {} {}",
                i + 1,
                self.slot_text(ev.subject_entity, &tr.subject),
                tr.predicate.join(" "),
                self.slot_text(ev.object_entity, &tr.object)
            );
            if ev.source.is_some() {
                let _ = write!(s, "    [{}#{}]", ev.event.doc_id, ev.event.sent_index);
            }
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "gates: candidates={} scanned={} rejected_predicate={} rejected_entity={} rejected_coherence={} accepted={}",
            stats.candidates,
            stats.scanned,
            stats.rejected_predicate,
            stats.rejected_entity,
            stats.rejected_coherence,
            stats.accepted
        );
        s
    }

    /// Machine-readable form of the schema.
    pub fn to_record(&self, stats: &GateStats, params: &SchemaParams) -> SchemaRecord {
        SchemaRecord {
            seed: self.seed.triple.clone(),
            params: *params,
            bindings: self
                .bindings
                .iter()
                .map(|(symbol, tokens)| BindingRecord {
                    symbol: symbol.clone(),
                    tokens: tokens.clone(),
                })
                .collect(),
            events: self
                .events
                .iter()
                .map(|ev| SchemaEventRecord {
                    subject: self.slot_text(ev.subject_entity, &ev.event.triple.subject),
                    predicate: ev.event.triple.predicate.join(" "),
                    object: self.slot_text(ev.object_entity, &ev.event.triple.object),
                    grounded: ev.event.triple.clone(),
                    source: ev.source.map(|_| SourceRecord {
                        doc_id: ev.event.doc_id.clone(),
                        sent_index: ev.event.sent_index,
                    }),
                    unified: ev.unified,
                })
                .collect(),
            stats: stats.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BindingRecord {
    pub symbol: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceRecord {
    pub doc_id: String,
    pub sent_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemaEventRecord {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    pub grounded: Triple,
    pub source: Option<SourceRecord>,
    pub unified: [bool; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemaRecord {
    pub seed: Triple,
    pub params: SchemaParams,
    pub bindings: Vec<BindingRecord>,
    pub events: Vec<SchemaEventRecord>,
    pub stats: GateStats,
}
