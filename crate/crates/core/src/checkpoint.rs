//! Binary checkpoints.
//!
//! All integers are little-endian. Layout:
//!
//! ```text
//! "EVT1"  u32 version  u8 precision (0 = f32, 1 = f64)
//! u8 model kind  u8 has_bias  u64 input  u64 hidden  u64 output
//! u32 n_blocks, then per block: u64 len, len floats
//! u8 unk policy  u64 dim  u64 n_tokens, per token: u32 len, utf-8 bytes
//! u64 len, table floats (tokens plus trailing UNK row)
//! u8 has_head [u64 classes  u64 event_dim  u64 len floats  u64 len floats]
//! u32 len, config text (utf-8)
//! 32-byte SHA-256 of everything above
//! ```
//!
//! Serialization is canonical: loading a file and saving it again with the
//! same precision reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::embeddings::{EmbeddingTable, UnkPolicy};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Tensor3, Vector};
use crate::models::{
    CompositionModel, FeedForwardParams, FeedForwardVariant, ModelKind, ModelParams,
    PredicateTensorParams, RoleFactorParams,
};
use crate::training::{SoftmaxHead, TrainConfig};

pub const MAGIC: &[u8; 4] = b"EVT1";
pub const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    Single,
    Double,
}

impl Precision {
    fn code(self) -> u8 {
        match self {
            Precision::Single => 0,
            Precision::Double => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Precision::Single => "f32",
            Precision::Double => "f64",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: CompositionModel,
    pub table: EmbeddingTable,
    pub head: Option<SoftmaxHead>,
    pub config: TrainConfig,
}

fn policy_code(p: UnkPolicy) -> u8 {
    match p {
        UnkPolicy::AverageKnown => 0,
        UnkPolicy::UnkVector => 1,
        UnkPolicy::Zero => 2,
    }
}

fn policy_from_code(c: u8) -> Option<UnkPolicy> {
    match c {
        0 => Some(UnkPolicy::AverageKnown),
        1 => Some(UnkPolicy::UnkVector),
        2 => Some(UnkPolicy::Zero),
        _ => None,
    }
}

struct Writer {
    buf: Vec<u8>,
    precision: Precision,
}

impl Writer {
    fn u8(&mut self, x: u8) {
        self.buf.push(x);
    }

    fn u32(&mut self, x: u32) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    fn u64(&mut self, x: usize) {
        self.buf.extend_from_slice(&(x as u64).to_le_bytes());
    }

    fn floats(&mut self, xs: &[f64]) {
        self.u64(xs.len());
        for &x in xs {
            match self.precision {
                Precision::Single => self.buf.extend_from_slice(&(x as f32).to_le_bytes()),
                Precision::Double => self.buf.extend_from_slice(&x.to_le_bytes()),
            }
        }
    }

    fn bytes32(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.buf.extend_from_slice(b);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    precision: Precision,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Checkpoint {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(format!(
                "truncated while reading {what}: need {n} bytes, {} left",
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<usize> {
        let start = self.pos;
        let v = u64::from_le_bytes(self.take(8, what)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Checkpoint {
            offset: start,
            message: format!("{what} value {v} does not fit in memory"),
        })
    }

    fn floats(&mut self, what: &str) -> Result<Vec<f64>> {
        let n = self.u64(what)?;
        let width = match self.precision {
            Precision::Single => 4,
            Precision::Double => 8,
        };
        let bytes = self.take(n.checked_mul(width).ok_or_else(|| self.err("length overflow"))?, what)?;
        Ok(match self.precision {
            Precision::Single => bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            Precision::Double => bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        })
    }

    fn floats_exact(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let start = self.pos;
        let v = self.floats(what)?;
        if v.len() != n {
            return Err(Error::Checkpoint {
                offset: start,
                message: format!("{what}: expected {n} values, found {}", v.len()),
            });
        }
        Ok(v)
    }

    fn string32(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)? as usize;
        let start = self.pos;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::Checkpoint {
            offset: start,
            message: format!("{what} is not valid utf-8"),
        })
    }
}

impl Checkpoint {
    pub fn to_bytes(&self, precision: Precision) -> Vec<u8> {
        let mut w = Writer {
            buf: Vec::new(),
            precision,
        };
        w.buf.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.u8(precision.code());
        w.u8(self.model.kind().code());
        w.u8(u8::from(self.model.has_bias()));
        let dims = self.model.dims();
        w.u64(dims.input);
        w.u64(dims.hidden);
        w.u64(dims.output);
        let blocks = self.model.param_blocks();
        w.u32(blocks.len() as u32);
        for b in blocks {
            w.floats(b);
        }

        w.u8(policy_code(self.table.unk_policy()));
        w.u64(self.table.dim());
        w.u64(self.table.len());
        for t in self.table.tokens() {
            w.bytes32(t.as_bytes());
        }
        w.floats(self.table.data());

        match &self.head {
            Some(h) => {
                w.u8(1);
                w.u64(h.classes());
                w.u64(h.event_dim());
                w.floats(h.projection.data());
                w.floats(&h.bias);
            }
            None => w.u8(0),
        }
        w.bytes32(self.config.to_text().as_bytes());

        let digest = Sha256::digest(&w.buf);
        w.buf.extend_from_slice(&digest);
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, Precision)> {
        let mut r = Reader {
            buf: bytes,
            pos: 0,
            precision: Precision::Single,
        };
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::Checkpoint {
                offset: 0,
                message: "bad magic, not an EVT1 checkpoint".into(),
            });
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::Checkpoint {
                offset: 4,
                message: format!("unsupported version {version}, expected {VERSION}"),
            });
        }
        r.precision = match r.u8("precision")? {
            0 => Precision::Single,
            1 => Precision::Double,
            c => return Err(Error::Checkpoint {
                offset: 8,
                message: format!("unknown precision flag {c}"),
            }),
        };
        let kind_code = r.u8("model kind")?;
        let kind = ModelKind::from_code(kind_code).ok_or_else(|| Error::Checkpoint {
            offset: 9,
            message: format!("unknown model kind {kind_code}"),
        })?;
        let has_bias = match r.u8("bias flag")? {
            0 => false,
            1 => true,
            c => return Err(Error::Checkpoint {
                offset: 10,
                message: format!("bad bias flag {c}"),
            }),
        };
        let d = r.u64("input dim")?;
        let h = r.u64("hidden dim")?;
        let o = r.u64("output dim")?;
        let blocks_at = r.pos;
        let n_blocks = r.u32("block count")? as usize;
        let expected = match kind {
            ModelKind::PredicateTensor => 2,
            ModelKind::RoleFactor => 3,
            ModelKind::NeuralNet | ModelKind::ElementwiseMult => 2,
            ModelKind::Averaging => 0,
        } + usize::from(has_bias);
        if n_blocks != expected {
            return Err(Error::Checkpoint {
                offset: blocks_at,
                message: format!("{kind} expects {expected} parameter blocks, found {n_blocks}"),
            });
        }
        let shape_err = |offset: usize, e: Error| Error::Checkpoint {
            offset,
            message: e.to_string(),
        };
        let at = r.pos;
        let params = match kind {
            ModelKind::PredicateTensor => {
                let w = r.floats_exact(d * d * d, "W")?;
                let u = r.floats_exact(d * d * d, "U")?;
                ModelParams::PredicateTensor(PredicateTensorParams {
                    w: Tensor3::from_vec((d, d, d), w).map_err(|e| shape_err(at, e))?,
                    u: Tensor3::from_vec((d, d, d), u).map_err(|e| shape_err(at, e))?,
                })
            }
            ModelKind::RoleFactor => {
                let t = r.floats_exact(h * d * d, "T")?;
                let ws = r.floats_exact(o * h, "W_s")?;
                let wo = r.floats_exact(o * h, "W_o")?;
                ModelParams::RoleFactor(RoleFactorParams {
                    t: Tensor3::from_vec((h, d, d), t).map_err(|e| shape_err(at, e))?,
                    w_s: Matrix::from_vec(o, h, ws).map_err(|e| shape_err(at, e))?,
                    w_o: Matrix::from_vec(o, h, wo).map_err(|e| shape_err(at, e))?,
                })
            }
            ModelKind::NeuralNet | ModelKind::ElementwiseMult => {
                let variant = if kind == ModelKind::NeuralNet {
                    FeedForwardVariant::Concat
                } else {
                    FeedForwardVariant::ConcatMult
                };
                let m = variant.width_factor() * d;
                let hm = r.floats_exact(h * m, "H")?;
                let wm = r.floats_exact(o * h, "W")?;
                ModelParams::FeedForward(FeedForwardParams {
                    h: Matrix::from_vec(h, m, hm).map_err(|e| shape_err(at, e))?,
                    w: Matrix::from_vec(o, h, wm).map_err(|e| shape_err(at, e))?,
                    variant,
                })
            }
            ModelKind::Averaging => ModelParams::Averaging,
        };
        let bias = if has_bias {
            Some(Vector::from(r.floats_exact(o, "bias")?))
        } else {
            None
        };
        let model = CompositionModel::from_params(params, d, bias).map_err(|e| shape_err(at, e))?;

        let policy_at = r.pos;
        let policy_c = r.u8("unk policy")?;
        let policy = policy_from_code(policy_c).ok_or_else(|| Error::Checkpoint {
            offset: policy_at,
            message: format!("unknown unk policy {policy_c}"),
        })?;
        let dim = r.u64("table dim")?;
        let n_tokens = r.u64("token count")?;
        let mut tokens = Vec::with_capacity(n_tokens.min(1 << 20));
        for _ in 0..n_tokens {
            tokens.push(r.string32("token")?);
        }
        let table_at = r.pos;
        let data = r.floats_exact((n_tokens + 1) * dim, "embedding table")?;
        let table = EmbeddingTable::from_parts(tokens, data, dim, policy)
            .map_err(|e| shape_err(table_at, e))?;

        let head_at = r.pos;
        let head = match r.u8("head flag")? {
            0 => None,
            1 => {
                let classes = r.u64("head classes")?;
                let edim = r.u64("head event dim")?;
                let proj = r.floats_exact(classes * edim, "head projection")?;
                let hb = r.floats_exact(classes, "head bias")?;
                Some(SoftmaxHead {
                    projection: Matrix::from_vec(classes, edim, proj)
                        .map_err(|e| shape_err(head_at, e))?,
                    bias: Vector::from(hb),
                })
            }
            c => return Err(Error::Checkpoint {
                offset: head_at,
                message: format!("bad head flag {c}"),
            }),
        };
        let config_at = r.pos;
        let config = TrainConfig::parse(&r.string32("config")?).map_err(|e| shape_err(config_at, e))?;

        let body_end = r.pos;
        let stored = r.take(DIGEST_LEN, "fingerprint")?;
        if Sha256::digest(&bytes[..body_end]).as_slice() != stored {
            return Err(Error::Checkpoint {
                offset: body_end,
                message: "fingerprint mismatch, file is corrupted".into(),
            });
        }
        if r.pos != bytes.len() {
            return Err(r.err(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok((
            Checkpoint {
                model,
                table,
                head,
                config,
            },
            r.precision,
        ))
    }

    /// Write the binary checkpoint and a `<path>.txt` summary next to it.
    pub fn save(&self, path: impl AsRef<Path>, precision: Precision) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes(precision)).map_err(|e| Error::io(path, e))?;
        let mut summary = path.as_os_str().to_owned();
        summary.push(".txt");
        std::fs::write(&summary, self.summary(precision)).map_err(|e| Error::io(&summary, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Precision)> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Human-readable header.
    pub fn summary(&self, precision: Precision) -> String {
        let mut s = String::new();
        let dims = self.model.dims();
        let _ = writeln!(s, "format = EVT1 v{VERSION}");
        let _ = writeln!(s, "precision = {}", precision.as_str());
        let _ = writeln!(s, "model = {}", self.model.kind());
        let _ = writeln!(s, "dims = d:{} h:{} d':{}", dims.input, dims.hidden, dims.output);
        let _ = writeln!(s, "bias = {}", self.model.has_bias());
        for (name, b) in self.model.block_names().iter().zip(self.model.param_blocks()) {
            let _ = writeln!(s, "block {name} = {} values", b.len());
        }
        let _ = writeln!(s, "vocabulary = {} tokens + UNK", self.table.len());
        let _ = writeln!(s, "unk_policy = {}", self.table.unk_policy().as_str());
        match &self.head {
            Some(h) => {
                let _ = writeln!(s, "softmax_head = {} classes", h.classes());
            }
            None => {
                let _ = writeln!(s, "softmax_head = none");
            }
        }
        let _ = writeln!(s, "model_fingerprint = {}", self.model.fingerprint());
        s.push_str("[config]\n");
        s.push_str(&self.config.to_text());
        s
    }
}
