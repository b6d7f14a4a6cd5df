//! Continuous event representations from `(subject, predicate, object)`
//! triples.
//!
//! Word vectors for the three slots are composed into one event vector by a
//! [`models::CompositionModel`]: two tensor models (predicate tensor and role
//! factored) and three baselines. Models are trained with a cosine margin
//! objective over co-occurring events or a softmax over sentence words,
//! evaluated on similarity and narrative cloze tasks, and used to grow event
//! schemas by nearest-neighbour search.

pub mod checkpoint;
pub mod cli;
pub mod corpus;
pub mod embeddings;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod models;
pub mod rng;
pub mod schema;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
