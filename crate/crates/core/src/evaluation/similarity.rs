//! Sentence-similarity style evaluations over composed event vectors.
//!
//! Dataset files are tab-separated, token lists space-separated inside a
//! column:
//!
//! * transitive: `subj pred obj subj2 pred2 obj2 gold` (7 columns)
//! * hard: similar pair then dissimilar pair, `s1 p1 o1 s2 p2 o2 s3 p3 o3 s4 p4 o4`
//!   (12 columns)

use std::fmt::Write as _;

use serde::Serialize;

use super::spearman::spearman;
use crate::corpus::Triple;
use crate::encoder::EventEmbedder;
use crate::error::{Error, Result};
use crate::linalg::cosine;

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityPair {
    pub left: Triple,
    pub right: Triple,
    /// Mean annotator score in `[1, 7]`; absent for hard-task pairs.
    pub gold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardPairInstance {
    pub similar: SimilarityPair,
    pub dissimilar: SimilarityPair,
}

pub const TRANSITIVE_FORMAT: &str = "7 tab-separated columns: subj pred obj subj2 pred2 obj2 gold";
pub const HARD_FORMAT: &str =
    "12 tab-separated columns: similar pair (6 slots) then dissimilar pair (6 slots)";

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn triple_from(cols: &[&str], name: &str, line: usize) -> Result<Triple> {
    let t = Triple::new(cols[0], cols[1], cols[2]);
    if t.predicate.is_empty() {
        return Err(Error::Parse {
            path: name.into(),
            line,
            message: "empty predicate".into(),
        });
    }
    Ok(t)
}

pub fn parse_transitive(text: &str, name: &str) -> Result<Vec<SimilarityPair>> {
    let mut out = Vec::new();
    for (line, l) in data_lines(text) {
        let cols: Vec<&str> = l.split('\t').collect();
        if cols.len() != 7 {
            return Err(Error::Parse {
                path: name.into(),
                line,
                message: format!("found {} columns; expected {TRANSITIVE_FORMAT}", cols.len()),
            });
        }
        let gold: f64 = cols[6].trim().parse().map_err(|_| Error::Parse {
            path: name.into(),
            line,
            message: format!("gold score `{}` is not a number", cols[6].trim()),
        })?;
        if !(1.0..=7.0).contains(&gold) {
            return Err(Error::Parse {
                path: name.into(),
                line,
                message: format!("gold score {gold} outside [1, 7]"),
            });
        }
        out.push(SimilarityPair {
            left: triple_from(&cols[0..3], name, line)?,
            right: triple_from(&cols[3..6], name, line)?,
            gold: Some(gold),
        });
    }
    Ok(out)
}

pub fn parse_hard(text: &str, name: &str) -> Result<Vec<HardPairInstance>> {
    let mut out = Vec::new();
    for (line, l) in data_lines(text) {
        let cols: Vec<&str> = l.split('\t').collect();
        if cols.len() != 12 {
            return Err(Error::Parse {
                path: name.into(),
                line,
                message: format!("found {} columns; expected {HARD_FORMAT}", cols.len()),
            });
        }
        let pair = |k: usize| -> Result<SimilarityPair> {
            Ok(SimilarityPair {
                left: triple_from(&cols[k..k + 3], name, line)?,
                right: triple_from(&cols[k + 3..k + 6], name, line)?,
                gold: None,
            })
        };
        out.push(HardPairInstance {
            similar: pair(0)?,
            dissimilar: pair(6)?,
        });
    }
    Ok(out)
}

fn triple_cols(t: &Triple) -> String {
    format!(
        "{}\t{}\t{}",
        t.subject.join(" "),
        t.predicate.join(" "),
        t.object.join(" ")
    )
}

pub fn serialize_transitive(pairs: &[SimilarityPair]) -> String {
    let mut s = String::new();
    for p in pairs {
        let _ = writeln!(
            s,
            "{}\t{}\t{}",
            triple_cols(&p.left),
            triple_cols(&p.right),
            p.gold.unwrap_or(1.0)
        );
    }
    s
}

pub fn serialize_hard(instances: &[HardPairInstance]) -> String {
    let mut s = String::new();
    for h in instances {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            triple_cols(&h.similar.left),
            triple_cols(&h.similar.right),
            triple_cols(&h.dissimilar.left),
            triple_cols(&h.dissimilar.right)
        );
    }
    s
}

/// Cosine of a pair plus whether the zero-norm fallback fired.
fn pair_cosine<E: EventEmbedder + ?Sized>(embedder: &E, pair: &SimilarityPair) -> Result<(f64, bool)> {
    let a = embedder.embed_event(&pair.left)?;
    let b = embedder.embed_event(&pair.right)?;
    if a.dim() != b.dim() {
        return Err(Error::shape("similarity", "event vectors differ in dim"));
    }
    let c = cosine(&a, &b);
    Ok((c.value, c.degenerate))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitiveReport {
    pub rho: f64,
    pub pairs: usize,
    /// Pairs that fell back to cosine 0 because of a zero-norm event.
    pub zero_norm: usize,
}

/// Spearman correlation between model cosines and gold scores.
pub fn eval_transitive<E: EventEmbedder + ?Sized>(
    embedder: &E,
    dataset: &[SimilarityPair],
) -> Result<TransitiveReport> {
    if dataset.is_empty() {
        return Err(Error::Empty("transitive dataset".into()));
    }
    let mut cos = Vec::with_capacity(dataset.len());
    let mut gold = Vec::with_capacity(dataset.len());
    let mut zero_norm = 0;
    for p in dataset {
        let g = p
            .gold
            .ok_or_else(|| Error::Invalid("transitive pair without gold score".into()))?;
        let (c, degenerate) = pair_cosine(embedder, p)?;
        if degenerate {
            zero_norm += 1;
        }
        cos.push(c);
        gold.push(g);
    }
    if zero_norm > 0 {
        log::warn!("{zero_norm} transitive pairs had a zero-norm event");
    }
    Ok(TransitiveReport {
        rho: spearman(&cos, &gold)?,
        pairs: dataset.len(),
        zero_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardReport {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub ties: usize,
    pub zero_norm: usize,
}

/// Fraction of instances whose similar pair has strictly higher cosine
/// than the dissimilar pair. Ties count as failures.
pub fn eval_hard<E: EventEmbedder + ?Sized>(
    embedder: &E,
    dataset: &[HardPairInstance],
) -> Result<HardReport> {
    if dataset.is_empty() {
        return Err(Error::Empty("hard similarity dataset".into()));
    }
    let (mut correct, mut ties, mut zero_norm) = (0, 0, 0);
    for inst in dataset {
        let (cs, ds) = pair_cosine(embedder, &inst.similar)?;
        let (cd, dd) = pair_cosine(embedder, &inst.dissimilar)?;
        zero_norm += usize::from(ds) + usize::from(dd);
        if cs > cd {
            correct += 1;
        } else if cs == cd {
            ties += 1;
        }
    }
    Ok(HardReport {
        accuracy: correct as f64 / dataset.len() as f64,
        correct,
        total: dataset.len(),
        ties,
        zero_norm,
    })
}
