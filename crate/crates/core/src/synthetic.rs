//! Deterministic toy corpora, hard-similarity sets and embeddings.
//!
//! A scenario is a small closed vocabulary of predicates and arguments.
//! Documents are drawn from one scenario each; shared predicates appear in
//! several scenarios with that scenario's own arguments, giving the
//! "threw a football" / "threw a bomb" ambiguity at toy scale.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{serialize_triples, EventRecord, Triple};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::evaluation::{HardPairInstance, SimilarityPair};
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub predicates: Vec<String>,
    pub subjects: Vec<String>,
    pub objects: Vec<String>,
    pub n_docs: usize,
    pub events_per_doc: usize,
    pub seed: u64,
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

impl ScenarioSpec {
    /// Build from whitespace-separated word lists.
    pub fn new(name: &str, predicates: &str, subjects: &str, objects: &str) -> Self {
        ScenarioSpec {
            name: name.to_string(),
            predicates: words(predicates),
            subjects: words(subjects),
            objects: words(objects),
            n_docs: 10,
            events_per_doc: 5,
            seed: 0,
        }
    }

    pub fn with_size(mut self, n_docs: usize, events_per_doc: usize) -> Self {
        self.n_docs = n_docs;
        self.events_per_doc = events_per_doc;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (what, list) in [
            ("predicates", &self.predicates),
            ("subjects", &self.subjects),
            ("objects", &self.objects),
        ] {
            if list.is_empty() {
                return Err(Error::Invalid(format!("scenario `{}` has no {what}", self.name)));
            }
        }
        Ok(())
    }

    /// Every token the scenario can emit, shared predicates excluded.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .predicates
            .iter()
            .chain(&self.subjects)
            .chain(&self.objects)
            .cloned()
            .collect();
        v.sort();
        v.dedup();
        v
    }

    fn rng(&self, index: usize) -> StreamRng {
        rng::substream(
            self.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            rng::stream::SYNTHETIC,
        )
    }
}

/// The two-scenario world used throughout the tests: sports and terrorism,
/// sharing the predicate `throw`.
pub fn sports_and_terror(n_docs: usize, events_per_doc: usize, seed: u64) -> (Vec<ScenarioSpec>, Vec<String>) {
    let sports = ScenarioSpec::new(
        "sports",
        "score kick pass win catch",
        "quarterback striker coach team player",
        "football goal ball match trophy",
    )
    .with_size(n_docs, events_per_doc)
    .with_seed(seed);
    let terror = ScenarioSpec::new(
        "terror",
        "detonate explode attack kill flee",
        "militant bomber insurgent attacker gunman",
        "bomb grenade explosive embassy convoy",
    )
    .with_size(n_docs, events_per_doc)
    .with_seed(seed.wrapping_add(1));
    (vec![sports, terror], vec!["throw".to_string()])
}

fn pick<'a>(rng: &mut StreamRng, xs: &'a [String]) -> &'a str {
    xs.choose(rng).expect("validated non-empty")
}

/// Event records for every document of every scenario. Document ids are
/// `<scenario>-<n>`; each event's predicate is drawn from the scenario's
/// own predicates plus `overlap`.
pub fn gen_records(specs: &[ScenarioSpec], overlap: &[String]) -> Result<Vec<EventRecord>> {
    if specs.is_empty() {
        return Err(Error::Invalid("no scenarios given".into()));
    }
    let mut out = Vec::new();
    for (si, spec) in specs.iter().enumerate() {
        spec.validate()?;
        let preds: Vec<String> = spec.predicates.iter().chain(overlap).cloned().collect();
        let mut rng = spec.rng(si);
        for d in 0..spec.n_docs {
            let doc = format!("{}-{d}", spec.name);
            for i in 0..spec.events_per_doc {
                let (s, p, o) = (
                    pick(&mut rng, &spec.subjects),
                    pick(&mut rng, &preds),
                    pick(&mut rng, &spec.objects),
                );
                let sentence = format!("{s} {p} {o}");
                out.push(EventRecord::new(&doc, i, Triple::new(s, p, o), &sentence));
            }
        }
    }
    Ok(out)
}

/// Triples-file content for [`gen_records`].
pub fn gen_corpus(specs: &[ScenarioSpec], overlap: &[String]) -> Result<String> {
    Ok(serialize_triples(&gen_records(specs, overlap)?))
}

fn distinct_pair(rng: &mut StreamRng, xs: &[String], what: &str, name: &str) -> Result<(String, String)> {
    let mut pool: Vec<&String> = xs.iter().collect();
    pool.sort();
    pool.dedup();
    if pool.len() < 2 {
        return Err(Error::Invalid(format!(
            "scenario `{name}` needs at least 2 distinct {what} for hard pairs"
        )));
    }
    let idx = rand::seq::index::sample(rng, pool.len(), 2);
    Ok((pool[idx.index(0)].clone(), pool[idx.index(1)].clone()))
}

/// `n` hard-similarity instances.
///
/// The similar pair is two events of one scenario with no token in common.
/// The dissimilar pair shares subject and a shared predicate and takes its
/// objects from two different scenarios.
pub fn gen_hard_pairs(specs: &[ScenarioSpec], shared: &[String], n: usize) -> Result<Vec<HardPairInstance>> {
    if specs.len() < 2 {
        return Err(Error::Invalid("hard pairs need at least 2 scenarios".into()));
    }
    if shared.is_empty() {
        return Err(Error::Invalid("hard pairs need at least 1 shared predicate".into()));
    }
    for s in specs {
        s.validate()?;
    }
    let mut rng = rng::substream(specs[0].seed, rng::stream::SYNTHETIC_PAIRS);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > 100 * n.max(1) {
            return Err(Error::Invalid(
                "scenario vocabularies too small to build token-disjoint similar pairs".into(),
            ));
        }
        let a = out.len() % specs.len();
        let b = (a + 1 + rng.random_range(0..specs.len() - 1)) % specs.len();
        let (sa, sb) = (&specs[a], &specs[b]);

        let (s1, s2) = distinct_pair(&mut rng, &sa.subjects, "subjects", &sa.name)?;
        let (p1, p2) = distinct_pair(&mut rng, &sa.predicates, "predicates", &sa.name)?;
        let (o1, o2) = distinct_pair(&mut rng, &sa.objects, "objects", &sa.name)?;
        let left = [s1, p1, o1];
        let right = [s2, p2, o2];
        if left.iter().any(|t| right.contains(t)) {
            continue;
        }

        let subj = pick(&mut rng, &sa.subjects).to_string();
        let pred = pick(&mut rng, shared).to_string();
        let oa = pick(&mut rng, &sa.objects).to_string();
        let ob = pick(&mut rng, &sb.objects).to_string();
        if oa == ob {
            continue;
        }
        out.push(HardPairInstance {
            similar: SimilarityPair {
                left: Triple::new(&left[0], &left[1], &left[2]),
                right: Triple::new(&right[0], &right[1], &right[2]),
                gold: None,
            },
            dissimilar: SimilarityPair {
                left: Triple::new(&subj, &pred, &oa),
                right: Triple::new(&subj, &pred, &ob),
                gold: None,
            },
        });
    }
    Ok(out)
}

/// All tokens of the given scenarios plus the shared predicates, sorted.
pub fn vocabulary(specs: &[ScenarioSpec], shared: &[String]) -> Vec<String> {
    let mut v: Vec<String> = specs.iter().flat_map(|s| s.vocabulary()).chain(shared.iter().cloned()).collect();
    v.sort();
    v.dedup();
    v
}

/// Gaussian vectors with standard deviation `1/sqrt(dim)`; carries no
/// scenario information.
pub fn gen_embeddings(tokens: Vec<String>, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::Invalid("embedding dim must be >= 1".into()));
    }
    let mut rng = rng::substream(seed, rng::stream::SYNTHETIC_EMBEDDINGS);
    let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("positive std");
    let vectors = tokens
        .iter()
        .map(|_| (0..dim).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    EmbeddingTable::from_vectors(tokens, vectors)
}

/// One-hot vectors: token `i` sits on axis `i`, so every cosine between
/// distinct single-token phrases is zero.
pub fn axis_embeddings(tokens: Vec<String>) -> Result<EmbeddingTable> {
    let n = tokens.len();
    let vectors = (0..n)
        .map(|i| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            v
        })
        .collect();
    EmbeddingTable::from_vectors(tokens, vectors)
}

/// Unit vectors in the plane at the given angles (radians), padded with
/// zeros up to `dim`.
pub fn angle_embeddings(tokens: &[(&str, f64)], dim: usize) -> Result<EmbeddingTable> {
    if dim < 2 {
        return Err(Error::Invalid("angle embeddings need dim >= 2".into()));
    }
    let vectors = tokens
        .iter()
        .map(|&(_, a)| {
            let mut v = vec![0.0; dim];
            v[0] = a.cos();
            v[1] = a.sin();
            v
        })
        .collect();
    EmbeddingTable::from_vectors(tokens.iter().map(|(t, _)| t.to_string()).collect(), vectors)
}
