//! Dense vectors, matrices and order-3 tensors, plus the bilinear
//! contraction kernel shared by every composition model.
//!
//! Storage is dense: matrices are row-major and tensors are laid out in
//! lexicographic `(i, j, k)` order, so `T[i, j, k]` lives at
//! `(i * n_j + j) * n_k + k`.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Checked constructor: rejects empty or non-finite data.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("vector must have dim >= 1".into()));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!("non-finite vector entry at {pos}")));
        }
        Ok(Vector(data))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|x| x * factor).collect())
    }

    /// `self += factor * other`
    pub fn axpy(&mut self, factor: f64, other: &[f64]) {
        assert_eq!(self.0.len(), other.len(), "axpy: dim mismatch");
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += factor * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector(data)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Elementwise mean of equally sized vectors.
pub fn mean_of<'a, I>(vectors: I, dim: usize) -> Vector
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc = vec![0.0; dim];
    let mut n = 0usize;
    for v in vectors {
        assert_eq!(v.len(), dim, "mean_of: dim mismatch");
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
        n += 1;
    }
    if n > 0 {
        let inv = 1.0 / n as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
    }
    Vector(acc)
}

/// Cosine similarity together with a flag marking the zero-norm fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cosine {
    pub value: f64,
    /// True when either operand had zero norm; `value` is then 0.
    pub degenerate: bool,
}

/// Cosine similarity. A zero-norm operand yields `0.0` with the
/// `degenerate` flag set instead of an error.
pub fn cosine(a: &[f64], b: &[f64]) -> Cosine {
    assert_eq!(a.len(), b.len(), "cosine: dim mismatch");
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        log::debug!("cosine with zero-norm operand; returning 0");
        return Cosine {
            value: 0.0,
            degenerate: true,
        };
    }
    let value = (dot(a, b) / (na * nb)).clamp(-1.0, 1.0);
    Cosine {
        value,
        degenerate: false,
    }
}

/// Cosine distance, `1 - cosine`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    1.0 - cosine(a, b).value
}

/// Gradients of `cos(a, b)` with respect to `a` and `b`.
/// Both are zero when either operand has zero norm.
pub fn cosine_grads(a: &[f64], b: &[f64]) -> (f64, Vector, Vector) {
    assert_eq!(a.len(), b.len(), "cosine_grads: dim mismatch");
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return (0.0, Vector::zeros(a.len()), Vector::zeros(b.len()));
    }
    let inv = 1.0 / (na * nb);
    let c = dot(a, b) * inv;
    let da = a
        .iter()
        .zip(b)
        .map(|(x, y)| y * inv - c * x / (na * na))
        .collect::<Vec<_>>();
    let db = a
        .iter()
        .zip(b)
        .map(|(x, y)| x * inv - c * y / (nb * nb))
        .collect::<Vec<_>>();
    (c, Vector(da), Vector(db))
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape("matrix", "rows and cols must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::shape(
                "matrix",
                format!("data length {} != {rows}x{cols}", data.len()),
            ));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("non-finite matrix entry".into()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `M x`
    pub fn matvec(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.cols {
            return Err(Error::shape(
                "matvec",
                format!("matrix cols {} vs vector dim {}", self.cols, x.len()),
            ));
        }
        Ok(Vector(
            self.data.chunks_exact(self.cols).map(|row| dot(row, x)).collect(),
        ))
    }

    /// `Mᵀ y`
    pub fn matvec_t(&self, y: &[f64]) -> Result<Vector> {
        if y.len() != self.rows {
            return Err(Error::shape(
                "matvec_t",
                format!("matrix rows {} vs vector dim {}", self.rows, y.len()),
            ));
        }
        let mut out = vec![0.0; self.cols];
        for (row, &yr) in self.data.chunks_exact(self.cols).zip(y) {
            if yr == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(row) {
                *o += yr * m;
            }
        }
        Ok(Vector(out))
    }

    /// Outer product `u vᵀ`.
    pub fn outer(u: &[f64], v: &[f64]) -> Matrix {
        let mut data = Vec::with_capacity(u.len() * v.len());
        for &a in u {
            data.extend(v.iter().map(|b| a * b));
        }
        Matrix {
            rows: u.len(),
            cols: v.len(),
            data,
        }
    }
}

/// Order-3 dense tensor with dims `(n_i, n_j, n_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(ni: usize, nj: usize, nk: usize) -> Self {
        Tensor3 {
            dims: (ni, nj, nk),
            data: vec![0.0; ni * nj * nk],
        }
    }

    pub fn from_vec(dims: (usize, usize, usize), data: Vec<f64>) -> Result<Self> {
        let (ni, nj, nk) = dims;
        if ni == 0 || nj == 0 || nk == 0 {
            return Err(Error::shape("tensor3", "all dims must be positive"));
        }
        if data.len() != ni * nj * nk {
            return Err(Error::shape(
                "tensor3",
                format!("data length {} != {ni}x{nj}x{nk}", data.len()),
            ));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("non-finite tensor entry".into()));
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims.1 + j) * self.dims.2 + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let off = self.offset(i, j, k);
        self.data[off] = value;
    }

    /// Slice `T_i` as a row-major `n_j x n_k` block.
    pub fn slice(&self, i: usize) -> &[f64] {
        let len = self.dims.1 * self.dims.2;
        &self.data[i * len..(i + 1) * len]
    }
}

fn check_contract(op: &'static str, t: &Tensor3, a: &[f64], b: &[f64]) -> Result<()> {
    let (_, nj, nk) = t.dims;
    if a.len() != nj {
        return Err(Error::shape(
            op,
            format!("axis j: tensor has {nj}, first operand has {}", a.len()),
        ));
    }
    if b.len() != nk {
        return Err(Error::shape(
            op,
            format!("axis k: tensor has {nk}, second operand has {}", b.len()),
        ));
    }
    Ok(())
}

/// Bilinear contraction `v_i = Σ_{j,k} T[i,j,k] a_j b_k`.
pub fn contract3(t: &Tensor3, a: &[f64], b: &[f64]) -> Result<Vector> {
    check_contract("contract3", t, a, b)?;
    let (ni, nj, nk) = t.dims;
    let mut out = Vec::with_capacity(ni);
    for slice in t.data.chunks_exact(nj * nk) {
        let mut acc = 0.0;
        for (row, &aj) in slice.chunks_exact(nk).zip(a) {
            if aj != 0.0 {
                acc += aj * dot(row, b);
            }
        }
        out.push(acc);
    }
    Ok(Vector(out))
}

/// Reverse-mode gradients of `g · contract3(T, a, b)` with respect to
/// `T`, `a` and `b`.
pub fn contract3_grads(
    t: &Tensor3,
    a: &[f64],
    b: &[f64],
    g: &[f64],
) -> Result<(Tensor3, Vector, Vector)> {
    check_contract("contract3_grads", t, a, b)?;
    let (ni, nj, nk) = t.dims;
    if g.len() != ni {
        return Err(Error::shape(
            "contract3_grads",
            format!("axis i: tensor has {ni}, upstream gradient has {}", g.len()),
        ));
    }
    let mut dt = Tensor3::zeros(ni, nj, nk);
    let mut da = vec![0.0; nj];
    let mut db = vec![0.0; nk];
    for (i, &gi) in g.iter().enumerate() {
        if gi == 0.0 {
            continue;
        }
        let slice = t.slice(i);
        let dslice = &mut dt.data[i * nj * nk..(i + 1) * nj * nk];
        for j in 0..nj {
            let row = &slice[j * nk..(j + 1) * nk];
            let drow = &mut dslice[j * nk..(j + 1) * nk];
            let gaj = gi * a[j];
            for k in 0..nk {
                drow[k] = gaj * b[k];
                db[k] += gaj * row[k];
            }
            da[j] += gi * dot(row, b);
        }
    }
    Ok((dt, Vector(da), Vector(db)))
}
