//! Event triple files, document grouping, stop events and the two
//! training streams.
//!
//! Triple file format: UTF-8, one record per line, six tab-separated
//! columns `doc_id, sent_index, subject, predicate, object, sentence_tokens`.
//! Token lists are space-separated inside a column. Lines starting with `#`
//! and blank lines are ignored.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

/// The three slots of an event.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Triple {
    pub subject: Vec<String>,
    pub predicate: Vec<String>,
    pub object: Vec<String>,
}

impl Triple {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Self {
        Triple {
            subject: split_tokens(subject),
            predicate: split_tokens(predicate),
            object: split_tokens(object),
        }
    }

    /// Parse `subj|pred|obj`.
    pub fn parse_bar(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split('|').collect();
        if parts.len() != 3 {
            return Err(Error::Invalid(format!(
                "expected `subj|pred|obj`, got {} field(s)",
                parts.len()
            )));
        }
        let t = Triple::new(parts[0], parts[1], parts[2]);
        if t.predicate.is_empty() {
            return Err(Error::Invalid("triple predicate is empty".into()));
        }
        Ok(t)
    }

    /// Last predicate token, lowercased.
    pub fn head_lemma(&self) -> Option<String> {
        self.predicate.last().map(|t| t.to_lowercase())
    }

    /// Non-empty argument slots (subject, then object).
    pub fn arguments(&self) -> impl Iterator<Item = &Vec<String>> {
        [&self.subject, &self.object].into_iter().filter(|a| !a.is_empty())
    }
}

impl std::fmt::Display for Triple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            self.subject.join(" "),
            self.predicate.join(" "),
            self.object.join(" ")
        )
    }
}

pub fn split_tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventRecord {
    pub doc_id: String,
    pub sent_index: usize,
    #[serde(flatten)]
    pub triple: Triple,
    #[serde(default)]
    pub sentence_tokens: Vec<String>,
}

impl EventRecord {
    pub fn new(doc_id: &str, sent_index: usize, triple: Triple, sentence: &str) -> Self {
        EventRecord {
            doc_id: doc_id.to_string(),
            sent_index,
            triple,
            sentence_tokens: split_tokens(sentence),
        }
    }

    pub fn to_tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.doc_id,
            self.sent_index,
            self.triple.subject.join(" "),
            self.triple.predicate.join(" "),
            self.triple.object.join(" "),
            self.sentence_tokens.join(" ")
        )
    }
}

/// A malformed line reported by `parse_triples`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedTriples {
    pub records: Vec<EventRecord>,
    pub errors: Vec<LineError>,
}

const COLUMNS: usize = 6;

fn parse_line(line: &str) -> std::result::Result<EventRecord, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != COLUMNS {
        return Err(format!("expected {COLUMNS} columns, found {}", cols.len()));
    }
    let doc_id = cols[0].trim();
    if doc_id.is_empty() {
        return Err("empty doc_id column".into());
    }
    let sent_index = cols[1]
        .trim()
        .parse::<usize>()
        .map_err(|_| format!("sent_index `{}` is not a non-negative integer", cols[1].trim()))?;
    let triple = Triple::new(cols[2], cols[3], cols[4]);
    if triple.predicate.is_empty() {
        return Err("empty predicate column".into());
    }
    Ok(EventRecord {
        doc_id: doc_id.to_string(),
        sent_index,
        triple,
        sentence_tokens: split_tokens(cols[5]),
    })
}

/// Parse triple-file text. Malformed lines are collected, not dropped silently.
pub fn parse_triples_str(text: &str) -> ParsedTriples {
    let mut out = ParsedTriples::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        match parse_line(line) {
            Ok(r) => out.records.push(r),
            Err(message) => out.errors.push(LineError {
                line: i + 1,
                message,
            }),
        }
    }
    out
}

pub fn parse_triples(path: impl AsRef<Path>) -> Result<ParsedTriples> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_triples_str(&text))
}

pub fn serialize_triples(records: &[EventRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(out, "{}", r.to_tsv_line());
    }
    out
}

/// Events grouped by document. Documents keep first-appearance order;
/// events inside a document are stably sorted by `sent_index`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    events: Vec<EventRecord>,
    documents: Vec<(String, Range<usize>)>,
}

impl Corpus {
    pub fn from_records(records: Vec<EventRecord>) -> Self {
        let mut order: Vec<String> = Vec::new();
        let mut groups: std::collections::HashMap<String, Vec<EventRecord>> =
            std::collections::HashMap::new();
        for r in records {
            if !groups.contains_key(&r.doc_id) {
                order.push(r.doc_id.clone());
            }
            groups.entry(r.doc_id.clone()).or_default().push(r);
        }
        let mut events = Vec::new();
        let mut documents = Vec::with_capacity(order.len());
        for id in order {
            let mut doc = groups.remove(&id).unwrap_or_default();
            doc.sort_by_key(|r| r.sent_index);
            let start = events.len();
            events.extend(doc);
            documents.push((id, start..events.len()));
        }
        Corpus { events, documents }
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn num_documents(&self) -> usize {
        self.documents.len()
    }

    /// `(doc_id, range into events())` per document.
    pub fn documents(&self) -> &[(String, Range<usize>)] {
        &self.documents
    }

    pub fn document(&self, i: usize) -> &[EventRecord] {
        &self.events[self.documents[i].1.clone()]
    }

    /// Index of the document holding event `event`.
    pub fn document_of(&self, event: usize) -> usize {
        self.documents
            .partition_point(|(_, r)| r.end <= event)
    }
}

/// Set of predicate head lemmas excluded as stop events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopEventList {
    predicates: HashSet<String>,
}

/// Light verbs and their common inflections.
const DEFAULT_STOP_EVENTS: &[&str] = &[
    "say", "says", "said", "be", "is", "are", "was", "were", "been", "being", "do", "does",
    "did", "done", "have", "has", "had", "go", "goes", "went", "get", "gets", "got", "make",
    "makes", "made", "take", "takes", "took", "come", "came", "give", "gave", "tell", "told",
    "see", "saw", "know", "knew", "think", "thought",
];

impl Default for StopEventList {
    fn default() -> Self {
        StopEventList::new(DEFAULT_STOP_EVENTS.iter().copied())
    }
}

impl StopEventList {
    pub fn new<I, S>(predicates: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopEventList {
            predicates: predicates
                .into_iter()
                .map(|p| p.as_ref().trim().to_lowercase())
                .filter(|p| !p.is_empty())
                .collect(),
        }
    }

    pub fn empty() -> Self {
        StopEventList {
            predicates: HashSet::new(),
        }
    }

    /// One lemma per line; `#` comments allowed.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(StopEventList::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        ))
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.predicates.contains(&lemma.to_lowercase())
    }

    pub fn is_stop(&self, triple: &Triple) -> bool {
        triple.head_lemma().is_some_and(|h| self.predicates.contains(&h))
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }
}

pub fn filter_stop_events(records: Vec<EventRecord>, stoplist: &StopEventList) -> Vec<EventRecord> {
    let before = records.len();
    let kept: Vec<EventRecord> = records
        .into_iter()
        .filter(|r| !stoplist.is_stop(&r.triple))
        .collect();
    if before > 0 && kept.is_empty() {
        log::warn!("stop-event filter removed all {before} records");
    }
    kept
}

/// Event-prediction instance: indices into `Corpus::events`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventPair {
    pub input: usize,
    pub target: usize,
    pub negative: usize,
}

/// For every event with at least one successor within `window` positions in
/// its document, draw one target uniformly among those successors and one
/// negative uniformly over the whole corpus.
pub fn make_event_pairs<R: Rng>(corpus: &Corpus, window: usize, rng: &mut R) -> Vec<EventPair> {
    let total = corpus.len();
    let mut pairs = Vec::new();
    if window == 0 || total == 0 {
        return pairs;
    }
    for (_, range) in corpus.documents() {
        for input in range.clone() {
            let last = (input + window).min(range.end - 1);
            if last <= input {
                continue;
            }
            let target = rng.random_range(input + 1..=last);
            let negative = rng.random_range(0..total);
            pairs.push(EventPair {
                input,
                target,
                negative,
            });
        }
    }
    pairs
}

/// Word-prediction instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordContext {
    pub event: usize,
    pub word: usize,
}

/// Output classes of the word softmax: the first `min(cap, |V|)` table
/// tokens, plus one UNK class at index `classes - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordClasses {
    pub known: usize,
}

impl WordClasses {
    pub fn new(table: &EmbeddingTable, cap: usize) -> Self {
        WordClasses {
            known: table.len().min(cap),
        }
    }

    pub fn len(&self) -> usize {
        self.known + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn unk(&self) -> usize {
        self.known
    }

    pub fn class_of(&self, table: &EmbeddingTable, token: &str) -> usize {
        match table.lookup(token) {
            Some(i) if i < self.known => i,
            _ => self.unk(),
        }
    }
}

/// One `(event, context word)` pair per sentence token.
pub fn make_word_contexts(
    corpus: &Corpus,
    table: &EmbeddingTable,
    classes: WordClasses,
) -> Vec<WordContext> {
    corpus
        .events()
        .iter()
        .enumerate()
        .flat_map(|(event, r)| {
            r.sentence_tokens.iter().map(move |tok| WordContext {
                event,
                word: classes.class_of(table, tok),
            })
        })
        .collect()
}
