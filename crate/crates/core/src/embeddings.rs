//! Vocabulary-indexed word vectors: pretrained text loading, phrase
//! reduction and trainable rows.
//!
//! The table always carries one extra row after the known tokens, the UNK
//! vector, initialised to the centroid of the loaded vectors.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::rng;

/// What `embed_phrase` does with out-of-vocabulary tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnkPolicy {
    /// Average the known tokens; use the UNK row if none is known.
    #[default]
    AverageKnown,
    /// Every unknown token contributes the UNK row to the average.
    UnkVector,
    /// Average the known tokens; the zero vector if none is known.
    Zero,
}

impl UnkPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            UnkPolicy::AverageKnown => "average_known",
            UnkPolicy::UnkVector => "unk_vector",
            UnkPolicy::Zero => "zero",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "average_known" => Ok(UnkPolicy::AverageKnown),
            "unk_vector" => Ok(UnkPolicy::UnkVector),
            "zero" => Ok(UnkPolicy::Zero),
            other => Err(Error::Config(format!("unknown unk_policy `{other}`"))),
        }
    }
}

/// Lowercase and trim a raw token.
pub fn normalize_token(token: &str) -> String {
    token.trim().to_lowercase()
}

/// Rows averaged to form a phrase vector. An empty row list means the
/// zero vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseRows {
    pub rows: Vec<usize>,
}

impl PhraseRows {
    pub fn weight(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            1.0 / self.rows.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    /// `(tokens.len() + 1) x dim`, row-major; the last row is UNK.
    data: Vec<f64>,
    dim: usize,
    unk_policy: UnkPolicy,
}

impl EmbeddingTable {
    /// Build from explicit vectors. The UNK row is the centroid.
    pub fn from_vectors(tokens: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if tokens.len() != vectors.len() {
            return Err(Error::Invalid(format!(
                "{} tokens but {} vectors",
                tokens.len(),
                vectors.len()
            )));
        }
        let dim = vectors
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Empty("embedding table needs at least one token".into()))?;
        if dim == 0 {
            return Err(Error::Invalid("embedding dim must be positive".into()));
        }
        let mut table = EmbeddingTable {
            tokens: Vec::with_capacity(tokens.len()),
            index: HashMap::with_capacity(tokens.len()),
            data: Vec::with_capacity((tokens.len() + 1) * dim),
            dim,
            unk_policy: UnkPolicy::default(),
        };
        for (tok, v) in tokens.into_iter().zip(vectors) {
            if v.len() != dim {
                return Err(Error::shape(
                    "embedding table",
                    format!("token `{tok}` has dim {} (expected {dim})", v.len()),
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid(format!("token `{tok}` has non-finite entries")));
            }
            table.push_token(&tok, &v)?;
        }
        table.append_centroid_unk();
        Ok(table)
    }

    /// Gaussian-initialised table (std `1/sqrt(dim)`) for training without
    /// pretrained vectors.
    pub fn random(tokens: Vec<String>, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::substream(seed, rng::stream::EMBEDDING_INIT);
        let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt())
            .map_err(|e| Error::Invalid(e.to_string()))?;
        let vectors = tokens
            .iter()
            .map(|_| (0..dim).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        Self::from_vectors(tokens, vectors)
    }

    fn push_token(&mut self, raw: &str, v: &[f64]) -> Result<bool> {
        let tok = normalize_token(raw);
        if tok.is_empty() {
            return Err(Error::Invalid("empty token".into()));
        }
        if self.index.contains_key(&tok) {
            log::warn!("duplicate token `{tok}` ignored");
            return Ok(false);
        }
        self.index.insert(tok.clone(), self.tokens.len());
        self.tokens.push(tok);
        self.data.extend_from_slice(v);
        Ok(true)
    }

    fn append_centroid_unk(&mut self) {
        let n = self.tokens.len();
        let mut centroid = vec![0.0; self.dim];
        for row in self.data.chunks_exact(self.dim) {
            for (c, x) in centroid.iter_mut().zip(row) {
                *c += x;
            }
        }
        if n > 0 {
            centroid.iter_mut().for_each(|c| *c /= n as f64);
        }
        self.data.extend_from_slice(&centroid);
    }

    /// Load a whitespace-separated `token v_1 ... v_d` file. Keeps the first
    /// `max_vocab` distinct tokens in file order.
    pub fn load_pretrained(path: impl AsRef<Path>, max_vocab: Option<usize>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, &path.display().to_string(), max_vocab)
    }

    pub fn from_reader<R: Read>(reader: R, name: &str, max_vocab: Option<usize>) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        let reader = BufReader::new(reader);
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.map_err(|e| Error::io(name, e))?;
            if line.trim().is_empty() {
                continue;
            }
            if let (Some(cap), Some(t)) = (max_vocab, table.as_ref()) {
                if t.tokens.len() >= cap {
                    break;
                }
            }
            let mut fields = line.split_whitespace();
            let token = fields.next().unwrap_or_default();
            let values = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Parse {
                        path: name.to_string(),
                        line: lineno,
                        message: format!("non-numeric field `{f}`"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.is_empty() {
                return Err(Error::Parse {
                    path: name.to_string(),
                    line: lineno,
                    message: "token without vector".into(),
                });
            }
            if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
                return Err(Error::Parse {
                    path: name.to_string(),
                    line: lineno,
                    message: format!("non-finite value in field {}", pos + 2),
                });
            }
            let t = table.get_or_insert_with(|| EmbeddingTable {
                tokens: Vec::new(),
                index: HashMap::new(),
                data: Vec::new(),
                dim: values.len(),
                unk_policy: UnkPolicy::default(),
            });
            if values.len() != t.dim {
                return Err(Error::Parse {
                    path: name.to_string(),
                    line: lineno,
                    message: format!("dimension {} differs from {}", values.len(), t.dim),
                });
            }
            t.push_token(token, &values).map_err(|e| Error::Parse {
                path: name.to_string(),
                line: lineno,
                message: e.to_string(),
            })?;
        }
        let mut table =
            table.ok_or_else(|| Error::Empty(format!("no vectors in {name}")))?;
        table.append_centroid_unk();
        Ok(table)
    }

    /// Serialize known tokens (not UNK) in the pretrained text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, tok) in self.tokens.iter().enumerate() {
            out.push_str(tok);
            for x in self.row(i) {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_pretrained(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Reassemble a table from raw parts (checkpoint loading).
    pub(crate) fn from_parts(
        tokens: Vec<String>,
        data: Vec<f64>,
        dim: usize,
        unk_policy: UnkPolicy,
    ) -> Result<Self> {
        if dim == 0 || data.len() != (tokens.len() + 1) * dim {
            return Err(Error::shape(
                "embedding table",
                format!("{} values for {} rows of dim {dim}", data.len(), tokens.len() + 1),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate token `{t}`")));
            }
        }
        Ok(EmbeddingTable {
            tokens,
            index,
            data,
            dim,
            unk_policy,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of known tokens (UNK excluded).
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Known tokens plus the UNK row.
    pub fn num_rows(&self) -> usize {
        self.tokens.len() + 1
    }

    pub fn unk_index(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn unk_policy(&self) -> UnkPolicy {
        self.unk_policy
    }

    pub fn set_unk_policy(&mut self, policy: UnkPolicy) {
        self.unk_policy = policy;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.index.get(&normalize_token(token)).copied()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn row_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn vector(&self, token: &str) -> Option<Vector> {
        self.lookup(token).map(|i| Vector::from(self.row(i).to_vec()))
    }

    /// Rows whose mean forms the phrase vector, after the UNK policy.
    pub fn phrase_rows<S: AsRef<str>>(&self, tokens: &[S]) -> Result<PhraseRows> {
        let normalized: Vec<String> = tokens
            .iter()
            .map(|t| normalize_token(t.as_ref()))
            .filter(|t| !t.is_empty())
            .collect();
        if normalized.is_empty() {
            return Err(Error::Empty("phrase has no tokens".into()));
        }
        let mut rows = Vec::with_capacity(normalized.len());
        let mut unknown = 0usize;
        for tok in &normalized {
            match self.index.get(tok) {
                Some(&i) => rows.push(i),
                None => unknown += 1,
            }
        }
        match self.unk_policy {
            UnkPolicy::UnkVector => rows.extend(std::iter::repeat_n(self.unk_index(), unknown)),
            UnkPolicy::AverageKnown if rows.is_empty() => rows.push(self.unk_index()),
            UnkPolicy::AverageKnown | UnkPolicy::Zero => {}
        }
        Ok(PhraseRows { rows })
    }

    pub fn mean_rows(&self, rows: &PhraseRows) -> Vector {
        let mut out = vec![0.0; self.dim];
        for &r in &rows.rows {
            for (o, x) in out.iter_mut().zip(self.row(r)) {
                *o += x;
            }
        }
        let w = rows.weight();
        out.iter_mut().for_each(|o| *o *= w);
        Vector::from(out)
    }

    /// Mean of the in-vocabulary token vectors, with the UNK policy applied
    /// to unknown tokens.
    pub fn embed_phrase<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vector> {
        let rows = self.phrase_rows(tokens)?;
        Ok(self.mean_rows(&rows))
    }
}
