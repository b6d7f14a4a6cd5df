//! Turning triples into event vectors with a model and an embedding table.

use crate::corpus::Triple;
use crate::embeddings::{EmbeddingTable, PhraseRows};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::models::CompositionModel;

/// Anything that maps a triple to an event vector.
pub trait EventEmbedder {
    fn embed_event(&self, triple: &Triple) -> Result<Vector>;
}

impl<F> EventEmbedder for F
where
    F: Fn(&Triple) -> Result<Vector>,
{
    fn embed_event(&self, triple: &Triple) -> Result<Vector> {
        self(triple)
    }
}

/// Slot inputs and output of one forward pass.
#[derive(Debug, Clone)]
pub struct EncodedEvent {
    /// Embedding rows averaged into subject, predicate, object.
    pub rows: [PhraseRows; 3],
    pub inputs: [Vector; 3],
    pub embedding: Vector,
}

#[derive(Debug, Clone, Copy)]
pub struct EventEncoder<'a> {
    pub model: &'a CompositionModel,
    pub table: &'a EmbeddingTable,
}

impl<'a> EventEncoder<'a> {
    pub fn new(model: &'a CompositionModel, table: &'a EmbeddingTable) -> Result<Self> {
        if model.input_dim() != table.dim() {
            return Err(Error::shape(
                "event encoder",
                format!(
                    "model input dim {} vs embedding dim {}",
                    model.input_dim(),
                    table.dim()
                ),
            ));
        }
        Ok(EventEncoder { model, table })
    }

    /// An empty argument slot reads the UNK row.
    pub fn slot_rows(&self, tokens: &[String]) -> Result<PhraseRows> {
        if tokens.is_empty() {
            return Ok(PhraseRows {
                rows: vec![self.table.unk_index()],
            });
        }
        self.table.phrase_rows(tokens)
    }

    pub fn encode(&self, triple: &Triple) -> Result<EncodedEvent> {
        if triple.predicate.is_empty() {
            return Err(Error::Invalid(format!("event {triple} has no predicate")));
        }
        let rows = [
            self.slot_rows(&triple.subject)?,
            self.slot_rows(&triple.predicate)?,
            self.slot_rows(&triple.object)?,
        ];
        let inputs = [
            self.table.mean_rows(&rows[0]),
            self.table.mean_rows(&rows[1]),
            self.table.mean_rows(&rows[2]),
        ];
        let embedding = self.model.compose(&inputs[0], &inputs[1], &inputs[2])?;
        Ok(EncodedEvent {
            rows,
            inputs,
            embedding,
        })
    }
}

impl EventEmbedder for EventEncoder<'_> {
    fn embed_event(&self, triple: &Triple) -> Result<Vector> {
        Ok(self.encode(triple)?.embedding)
    }
}
