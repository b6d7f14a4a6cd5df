//! Independent reference implementations used by the integration tests.
//! Everything here is written with plain loops and does not call the
//! library's own linear algebra.
#![allow(dead_code, clippy::needless_range_loop)]

pub mod gradcheck;

use event_tensors::corpus::{EventRecord, Triple};
use event_tensors::embeddings::EmbeddingTable;
use event_tensors::linalg::Tensor3;
use event_tensors::models::{CompositionModel, FeedForwardVariant, ModelParams};
use event_tensors::schema::{Schema, SchemaParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn rand_tensor<R: Rng>(rng: &mut R, dims: (usize, usize, usize)) -> Tensor3 {
    Tensor3::from_vec(dims, rand_vec(rng, dims.0 * dims.1 * dims.2)).unwrap()
}

fn at(t: &Tensor3, i: usize, j: usize, k: usize) -> f64 {
    let (_, nj, nk) = t.dims();
    t.data()[(i * nj + j) * nk + k]
}

/// `v_i = Σ_j Σ_k T[i,j,k] a_j b_k`
pub fn contract3_loops(t: &Tensor3, a: &[f64], b: &[f64]) -> Vec<f64> {
    let (ni, nj, nk) = t.dims();
    let mut v = vec![0.0; ni];
    for (i, vi) in v.iter_mut().enumerate() {
        for j in 0..nj {
            for k in 0..nk {
                *vi += at(t, i, j, k) * a[j] * b[k];
            }
        }
    }
    v
}

/// `P[i,j,k] = W[i,j,k] Σ_a p_a U[a,j,k]`
pub fn materialize_loops(w: &Tensor3, u: &Tensor3, p: &[f64]) -> Tensor3 {
    let (d, _, _) = w.dims();
    let mut out = vec![0.0; d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut s = 0.0;
                for (a, pa) in p.iter().enumerate() {
                    s += pa * at(u, a, j, k);
                }
                out[(i * d + j) * d + k] = at(w, i, j, k) * s;
            }
        }
    }
    Tensor3::from_vec((d, d, d), out).unwrap()
}

fn matvec_loops(m: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|r| (0..cols).map(|c| m[r * cols + c] * x[c]).sum())
        .collect()
}

/// Reference forward pass for every model kind.
pub fn compose_oracle(model: &CompositionModel, s: &[f64], p: &[f64], o: &[f64]) -> Vec<f64> {
    let mut e = match model.params() {
        ModelParams::PredicateTensor(pt) => contract3_loops(&materialize_loops(&pt.w, &pt.u, p), s, o),
        ModelParams::RoleFactor(rf) => {
            let (h, _, _) = rf.t.dims();
            let vs = contract3_loops(&rf.t, s, p);
            let vo = contract3_loops(&rf.t, o, p);
            let a = matvec_loops(rf.w_s.data(), rf.w_s.rows(), h, &vs);
            let b = matvec_loops(rf.w_o.data(), rf.w_o.rows(), h, &vo);
            a.iter().zip(&b).map(|(x, y)| x + y).collect()
        }
        ModelParams::FeedForward(ff) => {
            let mut x: Vec<f64> = [s, p, o].concat();
            if ff.variant == FeedForwardVariant::ConcatMult {
                for j in 0..s.len() {
                    x.push(p[j] * s[j]);
                }
                for j in 0..o.len() {
                    x.push(p[j] * o[j]);
                }
            }
            let hidden: Vec<f64> = matvec_loops(ff.h.data(), ff.h.rows(), ff.h.cols(), &x)
                .into_iter()
                .map(f64::tanh)
                .collect();
            matvec_loops(ff.w.data(), ff.w.rows(), ff.w.cols(), &hidden)
        }
        ModelParams::Averaging => (0..s.len()).map(|j| (s[j] + p[j] + o[j]) / 3.0).collect(),
    };
    if model.has_bias() {
        let bias = model.param_blocks().last().unwrap().to_vec();
        for (x, b) in e.iter_mut().zip(bias) {
            *x += b;
        }
    }
    e
}

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

pub fn cos_dist(a: &[f64], b: &[f64]) -> f64 {
    1.0 - cos(a, b)
}

/// Largest elementwise difference relative to the reference's largest
/// magnitude.
pub fn rel_err_vec(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let scale = want.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    got.iter()
        .zip(want)
        .fold(0.0f64, |m, (g, w)| m.max((g - w).abs()))
        / scale
}

/// Relative error of a single gradient entry. Entries whose magnitudes
/// are both below `floor` are compared on that absolute scale instead.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Central difference of `f` along coordinate `i` of `x`.
pub fn central_diff(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += h;
    xm[i] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Spearman from the closed form `1 - 6 Σ d² / (n (n² - 1))`; valid only
/// without ties.
pub fn spearman_closed_form(xs: &[f64], ys: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in order.iter().enumerate() {
            r[i] = (pos + 1) as f64;
        }
        r
    };
    let (rx, ry) = (rank(xs), rank(ys));
    let n = xs.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn phrase(table: &EmbeddingTable, tokens: &[String]) -> Vec<f64> {
    let dim = table.dim();
    let known: Vec<usize> = tokens.iter().filter_map(|t| table.lookup(t)).collect();
    let rows = if known.is_empty() { vec![table.unk_index()] } else { known };
    let mut v = vec![0.0; dim];
    for r in &rows {
        for (x, y) in v.iter_mut().zip(table.row(*r)) {
            *x += y / rows.len() as f64;
        }
    }
    v
}

/// Event vector computed from the reference forward pass. Empty slots use
/// the UNK row, as in the library's encoder.
pub fn embed_oracle(model: &CompositionModel, table: &EmbeddingTable, t: &Triple) -> Vec<f64> {
    compose_oracle(
        model,
        &phrase(table, &t.subject),
        &phrase(table, &t.predicate),
        &phrase(table, &t.object),
    )
}

/// Re-check an emitted schema against the acceptance gates. Returns one
/// message per violation.
pub fn check_schema_gates(
    schema: &Schema,
    model: &CompositionModel,
    table: &EmbeddingTable,
    gate_table: &EmbeddingTable,
    params: &SchemaParams,
) -> Vec<String> {
    let mut bad = Vec::new();
    let events: Vec<&Triple> = schema.events.iter().map(|e| &e.event.triple).collect();
    if events.first().copied() != Some(&schema.seed.triple) {
        bad.push("first event is not the seed".to_string());
    }
    let preds: Vec<Vec<f64>> = events.iter().map(|t| phrase(gate_table, &t.predicate)).collect();
    for a in 0..preds.len() {
        for b in a + 1..preds.len() {
            let d = cos_dist(&preds[a], &preds[b]);
            if d <= params.alpha {
                bad.push(format!("predicates {a} and {b} at distance {d} <= alpha"));
            }
        }
    }
    let embs: Vec<Vec<f64>> = events.iter().map(|t| embed_oracle(model, table, t)).collect();
    for n in 1..events.len() {
        let mut seen: Vec<&Vec<String>> = Vec::new();
        for t in &events[..n] {
            for arg in [&t.subject, &t.object] {
                if !arg.is_empty() {
                    seen.push(arg);
                }
            }
        }
        let t = events[n];
        if ![&t.subject, &t.object].iter().any(|arg| !arg.is_empty() && seen.contains(arg)) {
            bad.push(format!("event {n} shares no argument with earlier events"));
        }
        let mean = embs[..n].iter().map(|e| cos_dist(&embs[n], e)).sum::<f64>() / n as f64;
        if mean >= params.gamma {
            bad.push(format!("event {n} mean distance {mean} >= gamma"));
        }
    }
    bad
}

#[derive(Debug, Default, PartialEq)]
pub struct OracleRun {
    pub accepted: Vec<Triple>,
    /// Rejections by the predicate, entity and coherence gates.
    pub rejected: [usize; 3],
}

/// Straight-line reading of the three gates.
pub fn gate_oracle(
    seed: &Triple,
    events: &[EventRecord],
    model: &CompositionModel,
    table: &EmbeddingTable,
    gate_table: &EmbeddingTable,
    p: &SchemaParams,
) -> OracleRun {
    let v = |t: &[String]| gate_table.embed_phrase(t).unwrap().to_vec();
    let seed_e = embed_oracle(model, table, seed);
    let mut order: Vec<(usize, f64)> = events
        .iter()
        .enumerate()
        .map(|(i, e)| (i, cos(&seed_e, &embed_oracle(model, table, &e.triple))))
        .collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    order.truncate(p.k);

    let mut preds = vec![v(&seed.predicate)];
    let mut entities: Vec<Vec<String>> = Vec::new();
    for arg in [&seed.subject, &seed.object] {
        if !arg.is_empty() && !entities.contains(arg) {
            entities.push(arg.clone());
        }
    }
    let mut embs = vec![seed_e];
    let mut run = OracleRun {
        accepted: vec![seed.clone()],
        ..OracleRun::default()
    };
    for (i, _) in order {
        if run.accepted.len() >= p.max_size {
            break;
        }
        let x = &events[i].triple;
        let px = v(&x.predicate);
        if !preds.iter().all(|q| cos_dist(&px, q) > p.alpha) {
            run.rejected[0] += 1;
            continue;
        }
        let mut grounded = x.clone();
        let mut matched = false;
        let mut best_subject: Option<(usize, f64)> = None;
        let mut best_object: Option<(usize, f64)> = None;
        for (slot, best) in [(&x.subject, &mut best_subject), (&x.object, &mut best_object)] {
            if slot.is_empty() {
                continue;
            }
            for (n, ent) in entities.iter().enumerate() {
                let d = cos_dist(&v(slot), &v(ent));
                if d < p.beta && best.is_none_or(|(_, bd)| d < bd) {
                    *best = Some((n, d));
                }
            }
        }
        if let (Some((a, da)), Some((b, db))) = (best_subject, best_object) {
            if a == b {
                if db < da {
                    best_subject = None;
                } else {
                    best_object = None;
                }
            }
        }
        if let Some((n, _)) = best_subject {
            grounded.subject = entities[n].clone();
            matched = true;
        }
        if let Some((n, _)) = best_object {
            grounded.object = entities[n].clone();
            matched = true;
        }
        if !matched {
            run.rejected[1] += 1;
            continue;
        }
        let e = embed_oracle(model, table, &grounded);
        let mean = embs.iter().map(|y| cos_dist(&e, y)).sum::<f64>() / embs.len() as f64;
        if mean >= p.gamma {
            run.rejected[2] += 1;
            continue;
        }
        for arg in [&grounded.subject, &grounded.object] {
            if !arg.is_empty() && !entities.contains(arg) {
                entities.push(arg.clone());
            }
        }
        preds.push(px);
        embs.push(e);
        run.accepted.push(grounded);
    }
    run
}
