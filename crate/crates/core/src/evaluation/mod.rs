//! Transitive-similarity correlation, hard-similarity accuracy and the
//! multiple-choice narrative cloze.

mod cloze;
mod similarity;
mod spearman;

pub use cloze::{
    curate_instances, eval_mcnc, generate_mcnc, load_instances, read_instances,
    score_candidates, shares_entity, substitute_entities, write_instances, Aggregation,
    ClozeInstance, ClozeReport, ClozeStats, Curation, McncOutcome,
};
pub use similarity::{
    eval_hard, eval_transitive, parse_hard, parse_transitive, serialize_hard,
    serialize_transitive, HardPairInstance, HardReport, SimilarityPair, TransitiveReport,
    HARD_FORMAT, TRANSITIVE_FORMAT,
};
pub use spearman::{average_ranks, spearman};
