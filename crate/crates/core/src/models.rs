//! Event composition models mapping `(subject, predicate, object)` word
//! vectors to one event vector.
//!
//! | kind               | event vector                                   |
//! |--------------------|------------------------------------------------|
//! | `predicate_tensor` | `e_i = Σ_{a,j,k} p_a s_j o_k W[i,j,k] U[a,j,k]`  |
//! | `role_factor`      | `e = W_s T(s,p) + W_o T(o,p)`                  |
//! | `neural_net`       | `e = W tanh(H [s;p;o])`                        |
//! | `elementwise_mult` | `e = W tanh(H [s;p;o;p⊙s;p⊙o])`                |
//! | `averaging`        | `e = (s + p + o) / 3`                          |
//!
//! Every model exposes its parameters as an ordered list of flat blocks so
//! the optimizer, regularizer and checkpoint code can treat them uniformly.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::linalg::{self, contract3, contract3_grads, dot, Matrix, Tensor3, Vector};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PredicateTensor,
    RoleFactor,
    NeuralNet,
    ElementwiseMult,
    Averaging,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::PredicateTensor,
        ModelKind::RoleFactor,
        ModelKind::NeuralNet,
        ModelKind::ElementwiseMult,
        ModelKind::Averaging,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::PredicateTensor => "predicate_tensor",
            ModelKind::RoleFactor => "role_factor",
            ModelKind::NeuralNet => "neural_net",
            ModelKind::ElementwiseMult => "elementwise_mult",
            ModelKind::Averaging => "averaging",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind `{s}`")))
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ModelKind::PredicateTensor => 0,
            ModelKind::RoleFactor => 1,
            ModelKind::NeuralNet => 2,
            ModelKind::ElementwiseMult => 3,
            ModelKind::Averaging => 4,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        ModelKind::ALL.into_iter().find(|k| k.code() == code)
    }

    /// Coherence threshold used by schema generation for this model family.
    pub fn default_gamma(self) -> f64 {
        match self {
            ModelKind::NeuralNet | ModelKind::ElementwiseMult => 0.3,
            _ => 0.2,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `d` = word dim, `h` = hidden/tensor dim, `d'` = event dim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl ModelDims {
    pub fn new(input: usize, hidden: usize, output: usize) -> Self {
        ModelDims {
            input,
            hidden,
            output,
        }
    }

    /// `h = d' = 100` defaults at word dim `d`.
    pub fn with_defaults(input: usize) -> Self {
        ModelDims::new(input, 100, 100)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredicateTensorParams {
    pub w: Tensor3,
    pub u: Tensor3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoleFactorParams {
    pub t: Tensor3,
    pub w_s: Matrix,
    pub w_o: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedForwardVariant {
    /// `[s; p; o]`
    Concat,
    /// `[s; p; o; p⊙s; p⊙o]`
    ConcatMult,
}

impl FeedForwardVariant {
    pub fn width_factor(self) -> usize {
        match self {
            FeedForwardVariant::Concat => 3,
            FeedForwardVariant::ConcatMult => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardParams {
    pub h: Matrix,
    pub w: Matrix,
    pub variant: FeedForwardVariant,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    PredicateTensor(PredicateTensorParams),
    RoleFactor(RoleFactorParams),
    FeedForward(FeedForwardParams),
    Averaging,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositionModel {
    params: ModelParams,
    input_dim: usize,
    /// Optional output bias; off unless requested.
    bias: Option<Vector>,
}

/// Gradients of `g · compose(s, p, o)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposeGrads {
    /// One entry per parameter block, in `param_blocks` order.
    pub params: Vec<Vec<f64>>,
    pub ds: Vector,
    pub dp: Vector,
    pub d_o: Vector,
}

fn init_tensor<R: Rng>(rng: &mut R, ni: usize, nj: usize, nk: usize) -> Tensor3 {
    let r = (6.0 / (nj + nk) as f64).sqrt();
    let mut t = Tensor3::zeros(ni, nj, nk);
    for x in t.data_mut() {
        *x = rng::uniform_symmetric(rng, r);
    }
    t
}

fn init_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    let r = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = Matrix::zeros(rows, cols);
    for x in m.data_mut() {
        *x = rng::uniform_symmetric(rng, r);
    }
    m
}

/// `P[i,j,k] = W[i,j,k] · Σ_a p_a U[a,j,k]`.
pub fn materialize_predicate_tensor(params: &PredicateTensorParams, p: &[f64]) -> Result<Tensor3> {
    let (d, _, _) = params.w.dims();
    if p.len() != d {
        return Err(Error::shape(
            "materialize_predicate_tensor",
            format!("predicate dim {} vs tensor dim {d}", p.len()),
        ));
    }
    let q = predicate_scales(&params.u, p);
    let mut out = params.w.clone();
    for slice in out.data_mut().chunks_exact_mut(d * d) {
        for (x, s) in slice.iter_mut().zip(&q) {
            *x *= s;
        }
    }
    Ok(out)
}

/// `q_jk = Σ_a p_a U[a,j,k]`, flattened row-major.
fn predicate_scales(u: &Tensor3, p: &[f64]) -> Vec<f64> {
    let (_, nj, nk) = u.dims();
    let mut q = vec![0.0; nj * nk];
    for (a, &pa) in p.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        for (qq, uu) in q.iter_mut().zip(u.slice(a)) {
            *qq += pa * uu;
        }
    }
    q
}

impl CompositionModel {
    /// Randomly initialised model; every weight is uniform in
    /// `[-r, r]`, `r = sqrt(6 / (fan_in + fan_out))` per matrix or tensor slice.
    pub fn new(kind: ModelKind, dims: ModelDims, with_bias: bool, seed: u64) -> Result<Self> {
        let d = dims.input;
        if d == 0 {
            return Err(Error::Invalid("input dim must be positive".into()));
        }
        let mut rng = rng::substream(seed, rng::stream::MODEL_INIT);
        let needs_hidden = matches!(
            kind,
            ModelKind::RoleFactor | ModelKind::NeuralNet | ModelKind::ElementwiseMult
        );
        if needs_hidden && (dims.hidden == 0 || dims.output == 0) {
            return Err(Error::Invalid(format!("{kind} needs positive h and d'")));
        }
        let params = match kind {
            ModelKind::PredicateTensor => ModelParams::PredicateTensor(PredicateTensorParams {
                w: init_tensor(&mut rng, d, d, d),
                u: init_tensor(&mut rng, d, d, d),
            }),
            ModelKind::RoleFactor => ModelParams::RoleFactor(RoleFactorParams {
                t: init_tensor(&mut rng, dims.hidden, d, d),
                w_s: init_matrix(&mut rng, dims.output, dims.hidden),
                w_o: init_matrix(&mut rng, dims.output, dims.hidden),
            }),
            ModelKind::NeuralNet | ModelKind::ElementwiseMult => {
                let variant = if kind == ModelKind::NeuralNet {
                    FeedForwardVariant::Concat
                } else {
                    FeedForwardVariant::ConcatMult
                };
                ModelParams::FeedForward(FeedForwardParams {
                    h: init_matrix(&mut rng, dims.hidden, variant.width_factor() * d),
                    w: init_matrix(&mut rng, dims.output, dims.hidden),
                    variant,
                })
            }
            ModelKind::Averaging => ModelParams::Averaging,
        };
        let mut model = CompositionModel::from_params(params, d, None)?;
        if with_bias && kind != ModelKind::Averaging {
            model.bias = Some(Vector::zeros(model.output_dim()));
        }
        let expected = match kind {
            ModelKind::PredicateTensor => 2 * d * d * d,
            ModelKind::RoleFactor => dims.hidden * d * d + 2 * dims.output * dims.hidden,
            ModelKind::NeuralNet => dims.hidden * 3 * d + dims.output * dims.hidden,
            ModelKind::ElementwiseMult => dims.hidden * 5 * d + dims.output * dims.hidden,
            ModelKind::Averaging => 0,
        };
        let bias_len = model.bias.as_ref().map_or(0, |b| b.dim());
        assert_eq!(model.param_count(), expected + bias_len, "{kind}: parameter count");
        Ok(model)
    }

    /// Wrap explicit parameters, validating their shapes.
    pub fn from_params(params: ModelParams, input_dim: usize, bias: Option<Vector>) -> Result<Self> {
        let d = input_dim;
        let bad = |detail: String| Err(Error::shape("composition model", detail));
        match &params {
            ModelParams::PredicateTensor(p) => {
                if p.w.dims() != (d, d, d) || p.u.dims() != (d, d, d) {
                    return bad(format!(
                        "W {:?} and U {:?} must both be ({d},{d},{d})",
                        p.w.dims(),
                        p.u.dims()
                    ));
                }
            }
            ModelParams::RoleFactor(p) => {
                let (h, nj, nk) = p.t.dims();
                if nj != d || nk != d {
                    return bad(format!("T {:?} must be (h,{d},{d})", p.t.dims()));
                }
                if p.w_s.cols() != h
                    || p.w_o.cols() != h
                    || p.w_s.rows() != p.w_o.rows()
                {
                    return bad(format!(
                        "W_s {}x{} and W_o {}x{} must both be d'x{h}",
                        p.w_s.rows(),
                        p.w_s.cols(),
                        p.w_o.rows(),
                        p.w_o.cols()
                    ));
                }
            }
            ModelParams::FeedForward(p) => {
                let m = p.variant.width_factor() * d;
                if p.h.cols() != m || p.w.cols() != p.h.rows() {
                    return bad(format!(
                        "H {}x{} must be hx{m}, W {}x{} must be d'xh",
                        p.h.rows(),
                        p.h.cols(),
                        p.w.rows(),
                        p.w.cols()
                    ));
                }
            }
            ModelParams::Averaging => {}
        }
        let model = CompositionModel {
            params,
            input_dim,
            bias: None,
        };
        if let Some(b) = &bias {
            if b.dim() != model.output_dim() {
                return bad(format!("bias dim {} vs output {}", b.dim(), model.output_dim()));
            }
        }
        Ok(CompositionModel { bias, ..model })
    }

    pub fn kind(&self) -> ModelKind {
        match &self.params {
            ModelParams::PredicateTensor(_) => ModelKind::PredicateTensor,
            ModelParams::RoleFactor(_) => ModelKind::RoleFactor,
            ModelParams::FeedForward(p) => match p.variant {
                FeedForwardVariant::Concat => ModelKind::NeuralNet,
                FeedForwardVariant::ConcatMult => ModelKind::ElementwiseMult,
            },
            ModelParams::Averaging => ModelKind::Averaging,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn has_bias(&self) -> bool {
        self.bias.is_some()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        match &self.params {
            ModelParams::PredicateTensor(_) | ModelParams::Averaging => self.input_dim,
            ModelParams::RoleFactor(p) => p.w_s.rows(),
            ModelParams::FeedForward(p) => p.w.rows(),
        }
    }

    pub fn dims(&self) -> ModelDims {
        let hidden = match &self.params {
            ModelParams::RoleFactor(p) => p.t.dims().0,
            ModelParams::FeedForward(p) => p.h.rows(),
            _ => 0,
        };
        ModelDims::new(self.input_dim, hidden, self.output_dim())
    }

    /// Flat parameter blocks in declared order (bias last).
    pub fn param_blocks(&self) -> Vec<&[f64]> {
        let mut blocks: Vec<&[f64]> = match &self.params {
            ModelParams::PredicateTensor(p) => vec![p.w.data(), p.u.data()],
            ModelParams::RoleFactor(p) => vec![p.t.data(), p.w_s.data(), p.w_o.data()],
            ModelParams::FeedForward(p) => vec![p.h.data(), p.w.data()],
            ModelParams::Averaging => vec![],
        };
        if let Some(b) = &self.bias {
            blocks.push(b.as_slice());
        }
        blocks
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut blocks: Vec<&mut [f64]> = match &mut self.params {
            ModelParams::PredicateTensor(p) => vec![p.w.data_mut(), p.u.data_mut()],
            ModelParams::RoleFactor(p) => {
                vec![p.t.data_mut(), p.w_s.data_mut(), p.w_o.data_mut()]
            }
            ModelParams::FeedForward(p) => vec![p.h.data_mut(), p.w.data_mut()],
            ModelParams::Averaging => vec![],
        };
        if let Some(b) = &mut self.bias {
            blocks.push(&mut b[..]);
        }
        blocks
    }

    pub fn block_names(&self) -> Vec<&'static str> {
        let mut names = match &self.params {
            ModelParams::PredicateTensor(_) => vec!["W", "U"],
            ModelParams::RoleFactor(_) => vec!["T", "W_s", "W_o"],
            ModelParams::FeedForward(_) => vec!["H", "W"],
            ModelParams::Averaging => vec![],
        };
        if self.bias.is_some() {
            names.push("bias");
        }
        names
    }

    pub fn param_count(&self) -> usize {
        self.param_blocks().iter().map(|b| b.len()).sum()
    }

    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.param_blocks().iter().map(|b| vec![0.0; b.len()]).collect()
    }

    /// SHA-256 over kind, dims and parameter bytes, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.kind().as_str().as_bytes());
        let dims = self.dims();
        for x in [dims.input, dims.hidden, dims.output] {
            h.update((x as u64).to_le_bytes());
        }
        for block in self.param_blocks() {
            h.update((block.len() as u64).to_le_bytes());
            for x in block {
                h.update(x.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    fn check_inputs(&self, s: &[f64], p: &[f64], o: &[f64]) -> Result<()> {
        for (slot, v) in [("subject", s), ("predicate", p), ("object", o)] {
            if v.len() != self.input_dim {
                return Err(Error::shape(
                    "compose",
                    format!("{slot} has dim {}, model expects {}", v.len(), self.input_dim),
                ));
            }
        }
        Ok(())
    }

    pub fn compose(&self, s: &[f64], p: &[f64], o: &[f64]) -> Result<Vector> {
        self.check_inputs(s, p, o)?;
        let mut e = match &self.params {
            ModelParams::PredicateTensor(params) => {
                let d = self.input_dim;
                let q = predicate_scales(&params.u, p);
                let mut r = q;
                for j in 0..d {
                    for k in 0..d {
                        r[j * d + k] *= s[j] * o[k];
                    }
                }
                Vector::from(
                    params
                        .w
                        .data()
                        .chunks_exact(d * d)
                        .map(|slice| dot(slice, &r))
                        .collect::<Vec<_>>(),
                )
            }
            ModelParams::RoleFactor(params) => {
                let vs = contract3(&params.t, s, p)?;
                let vo = contract3(&params.t, o, p)?;
                let mut e = params.w_s.matvec(&vs)?;
                e.axpy(1.0, &params.w_o.matvec(&vo)?);
                e
            }
            ModelParams::FeedForward(params) => {
                let x = feed_forward_input(params.variant, s, p, o);
                let a: Vec<f64> = params.h.matvec(&x)?.iter().map(|z| z.tanh()).collect();
                params.w.matvec(&a)?
            }
            ModelParams::Averaging => {
                Vector::from(
                    s.iter()
                        .zip(p)
                        .zip(o)
                        .map(|((a, b), c)| (a + b + c) / 3.0)
                        .collect::<Vec<_>>(),
                )
            }
        };
        if let Some(b) = &self.bias {
            e.axpy(1.0, b);
        }
        Ok(e)
    }

    /// Reverse pass for `g · compose(s, p, o)`.
    pub fn compose_with_grads(
        &self,
        s: &[f64],
        p: &[f64],
        o: &[f64],
        g: &[f64],
    ) -> Result<ComposeGrads> {
        self.check_inputs(s, p, o)?;
        if g.len() != self.output_dim() {
            return Err(Error::shape(
                "compose_with_grads",
                format!("upstream dim {} vs output {}", g.len(), self.output_dim()),
            ));
        }
        let d = self.input_dim;
        let mut grads = match &self.params {
            ModelParams::PredicateTensor(params) => {
                let q = predicate_scales(&params.u, p);
                // G_jk = Σ_i g_i W[i,j,k]
                let mut big_g = vec![0.0; d * d];
                let mut dw = vec![0.0; d * d * d];
                for (i, &gi) in g.iter().enumerate() {
                    if gi == 0.0 {
                        continue;
                    }
                    for (acc, w) in big_g.iter_mut().zip(params.w.slice(i)) {
                        *acc += gi * w;
                    }
                    let dslice = &mut dw[i * d * d..(i + 1) * d * d];
                    for j in 0..d {
                        for k in 0..d {
                            dslice[j * d + k] = gi * q[j * d + k] * s[j] * o[k];
                        }
                    }
                }
                // H_jk = G_jk s_j o_k
                let mut hjk = vec![0.0; d * d];
                let mut ds = vec![0.0; d];
                let mut d_o = vec![0.0; d];
                for j in 0..d {
                    for k in 0..d {
                        let gq = big_g[j * d + k] * q[j * d + k];
                        ds[j] += gq * o[k];
                        d_o[k] += gq * s[j];
                        hjk[j * d + k] = big_g[j * d + k] * s[j] * o[k];
                    }
                }
                let mut du = vec![0.0; d * d * d];
                let mut dp = vec![0.0; d];
                for a in 0..d {
                    dp[a] = dot(params.u.slice(a), &hjk);
                    let pa = p[a];
                    if pa != 0.0 {
                        for (x, h) in du[a * d * d..(a + 1) * d * d].iter_mut().zip(&hjk) {
                            *x = pa * h;
                        }
                    }
                }
                ComposeGrads {
                    params: vec![dw, du],
                    ds: ds.into(),
                    dp: dp.into(),
                    d_o: d_o.into(),
                }
            }
            ModelParams::RoleFactor(params) => {
                let vs = contract3(&params.t, s, p)?;
                let vo = contract3(&params.t, o, p)?;
                let g_vs = params.w_s.matvec_t(g)?;
                let g_vo = params.w_o.matvec_t(g)?;
                let (dt_s, ds, mut dp) = contract3_grads(&params.t, s, p, &g_vs)?;
                let (dt_o, d_o, dp_o) = contract3_grads(&params.t, o, p, &g_vo)?;
                dp.axpy(1.0, &dp_o);
                let mut dt = dt_s.data().to_vec();
                for (x, y) in dt.iter_mut().zip(dt_o.data()) {
                    *x += y;
                }
                ComposeGrads {
                    params: vec![
                        dt,
                        Matrix::outer(g, &vs).data().to_vec(),
                        Matrix::outer(g, &vo).data().to_vec(),
                    ],
                    ds,
                    dp,
                    d_o,
                }
            }
            ModelParams::FeedForward(params) => {
                let x = feed_forward_input(params.variant, s, p, o);
                let a: Vec<f64> = params.h.matvec(&x)?.iter().map(|z| z.tanh()).collect();
                let dw = Matrix::outer(g, &a);
                let ga = params.w.matvec_t(g)?;
                let gz: Vec<f64> = ga.iter().zip(&a).map(|(g, a)| g * (1.0 - a * a)).collect();
                let dh = Matrix::outer(&gz, &x);
                let dx = params.h.matvec_t(&gz)?;
                let (mut ds, mut dp, mut d_o) =
                    (dx[..d].to_vec(), dx[d..2 * d].to_vec(), dx[2 * d..3 * d].to_vec());
                if params.variant == FeedForwardVariant::ConcatMult {
                    let dps = &dx[3 * d..4 * d];
                    let dpo = &dx[4 * d..5 * d];
                    for j in 0..d {
                        ds[j] += dps[j] * p[j];
                        dp[j] += dps[j] * s[j] + dpo[j] * o[j];
                        d_o[j] += dpo[j] * p[j];
                    }
                }
                ComposeGrads {
                    params: vec![dh.data().to_vec(), dw.data().to_vec()],
                    ds: ds.into(),
                    dp: dp.into(),
                    d_o: d_o.into(),
                }
            }
            ModelParams::Averaging => {
                let third = Vector::from(g.iter().map(|x| x / 3.0).collect::<Vec<_>>());
                ComposeGrads {
                    params: vec![],
                    ds: third.clone(),
                    dp: third.clone(),
                    d_o: third,
                }
            }
        };
        if self.bias.is_some() {
            grads.params.push(g.to_vec());
        }
        Ok(grads)
    }
}

fn feed_forward_input(variant: FeedForwardVariant, s: &[f64], p: &[f64], o: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(variant.width_factor() * s.len());
    x.extend_from_slice(s);
    x.extend_from_slice(p);
    x.extend_from_slice(o);
    if variant == FeedForwardVariant::ConcatMult {
        x.extend(p.iter().zip(s).map(|(a, b)| a * b));
        x.extend(p.iter().zip(o).map(|(a, b)| a * b));
    }
    x
}

/// Result of probing one slice of a role-factor tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub row: usize,
    /// `P_i[j] = Σ_k T[i,j,k] p_k`
    pub column: Vector,
    /// Tokens ranked by cosine to the column, best first.
    pub neighbors: Vec<(String, f64)>,
    /// Set when the column has zero norm; `neighbors` is then empty.
    pub zero_norm: bool,
}

/// Partially apply the role tensor to a predicate vector and list the
/// vocabulary tokens closest to column `row` of the resulting matrix.
pub fn predicate_context_probe(
    params: &RoleFactorParams,
    p: &[f64],
    row: usize,
    table: &EmbeddingTable,
    k: usize,
) -> Result<ProbeResult> {
    let (h, nj, nk) = params.t.dims();
    if row >= h {
        return Err(Error::Invalid(format!("probe row {row} out of range (h = {h})")));
    }
    if k == 0 {
        return Err(Error::Invalid("probe needs k >= 1".into()));
    }
    if p.len() != nk {
        return Err(Error::shape(
            "predicate_context_probe",
            format!("predicate dim {} vs tensor axis k {nk}", p.len()),
        ));
    }
    if table.dim() != nj {
        return Err(Error::shape(
            "predicate_context_probe",
            format!("embedding dim {} vs tensor axis j {nj}", table.dim()),
        ));
    }
    let column = Vector::from(
        params
            .t
            .slice(row)
            .chunks_exact(nk)
            .map(|r| dot(r, p))
            .collect::<Vec<_>>(),
    );
    if column.norm() == 0.0 {
        log::warn!("probe column {row} has zero norm");
        return Ok(ProbeResult {
            row,
            column,
            neighbors: vec![],
            zero_norm: true,
        });
    }
    let mut scored: Vec<(usize, f64)> = (0..table.len())
        .map(|i| (i, linalg::cosine(&column, table.row(i)).value))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let neighbors = scored
        .into_iter()
        .take(k)
        .map(|(i, c)| (table.tokens()[i].clone(), c))
        .collect();
    Ok(ProbeResult {
        row,
        column,
        neighbors,
        zero_norm: false,
    })
}
