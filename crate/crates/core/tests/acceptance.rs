//! Acceptance run. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::gradcheck::{margin_case, softmax_case};
use common::*;
use event_tensors::checkpoint::{Checkpoint, Precision};
use event_tensors::corpus::{Corpus, EventRecord, Triple};
use event_tensors::embeddings::EmbeddingTable;
use event_tensors::encoder::{EventEmbedder, EventEncoder};
use event_tensors::error::Result as LibResult;
use event_tensors::evaluation::{average_ranks, eval_hard, eval_mcnc, generate_mcnc, spearman, Aggregation};
use event_tensors::linalg::{contract3, Vector};
use event_tensors::models::{materialize_predicate_tensor, CompositionModel, ModelDims, ModelKind, ModelParams};
use event_tensors::rng;
use event_tensors::schema::{build_index, generate_schema, SchemaParams};
use event_tensors::synthetic::{self, ScenarioSpec};
use event_tensors::training::{train, Objective, TrainConfig};
use rand::Rng;
use rand_distr::{Distribution, Normal};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn within(start: Instant, budget_secs: u64) -> (bool, String) {
    let t = start.elapsed();
    (t < Duration::from_secs(budget_secs), format!("{:.1}s of {budget_secs}s", t.as_secs_f64()))
}

fn first_of(items: &[String]) -> String {
    items.first().map(|s| format!(", first: {s}")).unwrap_or_default()
}

// 1

fn contraction_oracle() -> Verdict {
    let start = Instant::now();
    let mut r = seeded(101);
    let mut worst = 0.0f64;
    for n in 0..100u64 {
        let dims = (r.random_range(1..=8), r.random_range(1..=8), r.random_range(1..=8));
        let t = rand_tensor(&mut r, dims);
        let a = rand_vec(&mut r, dims.1);
        let b = rand_vec(&mut r, dims.2);
        worst = worst.max(rel_err_vec(&contract3(&t, &a, &b).unwrap(), &contract3_loops(&t, &a, &b)));

        let d = r.random_range(1..=8);
        let m = CompositionModel::new(ModelKind::PredicateTensor, ModelDims::new(d, 0, d), false, n).unwrap();
        let ModelParams::PredicateTensor(pt) = m.params() else { unreachable!() };
        let p = rand_vec(&mut r, d);
        let got = materialize_predicate_tensor(pt, &p).unwrap();
        worst = worst.max(rel_err_vec(got.data(), materialize_loops(&pt.w, &pt.u, &p).data()));
    }
    let (fast, t) = within(start, 5);
    verdict(worst <= 1e-10 && fast, format!("max rel err {worst:.2e}, {t}"))
}

// 2

fn gradient_suite() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for kind in ModelKind::ALL {
        for seed in 0..100u64 {
            for (name, case) in [("margin", margin_case as fn(ModelKind, u64) -> f64), ("softmax", softmax_case)] {
                match catch_unwind(|| case(kind, seed)) {
                    Ok(e) => worst = worst.max(e),
                    Err(_) => failures.push(format!("{kind}/{name}/{seed}")),
                }
            }
        }
    }
    let (fast, t) = within(start, 60);
    verdict(
        failures.is_empty() && fast,
        format!("1000 cases, {} failed{}, max rel err {worst:.2e}, {t}", failures.len(), first_of(&failures)),
    )
}

// 3

fn compositionality_identity() -> Verdict {
    let mut r = seeded(103);
    let mut worst = 0.0f64;
    for n in 0..100u64 {
        let d = r.random_range(1..=8);
        let model = CompositionModel::new(ModelKind::PredicateTensor, ModelDims::new(d, 0, d), false, n).unwrap();
        let ModelParams::PredicateTensor(pt) = model.params() else { unreachable!() };
        let (s, p, o) = (rand_vec(&mut r, d), rand_vec(&mut r, d), rand_vec(&mut r, d));
        let e = model.compose(&s, &p, &o).unwrap();
        let via = contract3_loops(&materialize_loops(&pt.w, &pt.u, &p), &s, &o);
        worst = worst.max(rel_err_vec(&e, &via));
    }
    verdict(worst <= 1e-10, format!("max rel err {worst:.2e}"))
}

// 4

fn descent_check() -> Verdict {
    let start = Instant::now();
    // 2 scenarios x 20 documents x 5 events
    let (specs, shared) = synthetic::sports_and_terror(20, 5, 4);
    let records = synthetic::gen_records(&specs, &shared).unwrap();
    assert_eq!(records.len(), 200);
    let dim = 12;
    let pretrained = synthetic::gen_embeddings(synthetic::vocabulary(&specs, &shared), dim, 4).unwrap();
    let config = TrainConfig {
        objective: Objective::PredictEvents,
        margin: 0.5,
        learning_rate: 0.01,
        batch_size: 32,
        epochs: 20,
        seed: 4,
        ..TrainConfig::default()
    };
    let corpus = Corpus::from_records(records);
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in ModelKind::ALL.into_iter().filter(|k| *k != ModelKind::Averaging) {
        let model = CompositionModel::new(kind, ModelDims::new(dim, 8, 8), false, 4).unwrap();
        let out = train(&config, &corpus, pretrained.clone(), model).unwrap();
        let l = out.report.losses();
        let (first, last) = (l[0], l[l.len() - 1]);
        let drop = 1.0 - last / first;
        ok &= last < first && drop >= 0.05;
        parts.push(format!("{kind} {first:.4}->{last:.4} ({:.0}%)", 100.0 * drop));
    }
    let (fast, t) = within(start, 120);
    verdict(ok && fast, format!("{}; {t}", parts.join(", ")))
}

// 5 and 6 share one trained world

struct World {
    specs: Vec<ScenarioSpec>,
    shared: Vec<String>,
    records: Vec<EventRecord>,
    pretrained: EmbeddingTable,
    model: CompositionModel,
    table: EmbeddingTable,
    train_secs: f64,
}

const WORLD_DIM: usize = 16;

fn world() -> &'static World {
    static W: OnceLock<World> = OnceLock::new();
    W.get_or_init(|| {
        let start = Instant::now();
        let (specs, shared) = synthetic::sports_and_terror(30, 6, 5);
        let records = synthetic::gen_records(&specs, &shared).unwrap();
        let pretrained = synthetic::gen_embeddings(synthetic::vocabulary(&specs, &shared), WORLD_DIM, 5).unwrap();
        let model = CompositionModel::new(ModelKind::RoleFactor, ModelDims::new(WORLD_DIM, 16, 16), false, 5).unwrap();
        let config = TrainConfig {
            objective: Objective::PredictEvents,
            batch_size: 32,
            epochs: 30,
            seed: 5,
            ..TrainConfig::default()
        };
        let out = train(&config, &Corpus::from_records(records.clone()), pretrained.clone(), model).unwrap();
        World {
            specs,
            shared,
            records,
            pretrained,
            model: out.model,
            table: out.table,
            train_secs: start.elapsed().as_secs_f64(),
        }
    })
}

fn averaging_model() -> CompositionModel {
    CompositionModel::new(ModelKind::Averaging, ModelDims::new(WORLD_DIM, 0, WORLD_DIM), false, 0).unwrap()
}

fn scenario_of(doc_id: &str) -> &str {
    doc_id.split('-').next().unwrap()
}

fn probe_events(w: &World) -> Vec<(usize, Triple)> {
    (0..50)
        .map(|i| {
            let si = i % w.specs.len();
            let spec = &w.specs[si];
            let j = i / w.specs.len();
            let s = &spec.subjects[j % spec.subjects.len()];
            let o = &spec.objects[(j / spec.subjects.len() + j) % spec.objects.len()];
            (si, Triple::new(s, &w.shared[0], o))
        })
        .collect()
}

/// Mean over probes of (mean cosine to own-scenario events) minus (mean
/// cosine to the other scenario's events).
fn separation_margin(embedder: &dyn EventEmbedder, w: &World) -> f64 {
    let embedded: Vec<(&str, &Triple, Vector)> = w
        .records
        .iter()
        .map(|r| (scenario_of(&r.doc_id), &r.triple, embedder.embed_event(&r.triple).unwrap()))
        .collect();
    let probes = probe_events(w);
    let mut total = 0.0;
    for (si, probe) in &probes {
        let e = embedder.embed_event(probe).unwrap();
        let (mut same, mut ns, mut other, mut no) = (0.0, 0usize, 0.0, 0usize);
        for (scen, t, v) in &embedded {
            if *t == probe {
                continue;
            }
            let c = cos(&e, v);
            if *scen == w.specs[*si].name {
                same += c;
                ns += 1;
            } else {
                other += c;
                no += 1;
            }
        }
        total += same / ns as f64 - other / no as f64;
    }
    total / probes.len() as f64
}

fn scenario_separation() -> Verdict {
    let start = Instant::now();
    let w = world();
    let trained = separation_margin(&EventEncoder::new(&w.model, &w.table).unwrap(), w);
    let avg = averaging_model();
    let baseline = separation_margin(&EventEncoder::new(&avg, &w.pretrained).unwrap(), w);
    let (fast, t) = within(start, 300);
    verdict(
        trained > 0.0 && trained > baseline && fast,
        format!(
            "role_factor margin {trained:.4}, averaging margin {baseline:.4}, training {:.1}s, {t}",
            w.train_secs
        ),
    )
}

fn hard_similarity() -> Verdict {
    let w = world();
    let inst = synthetic::gen_hard_pairs(&w.specs, &w.shared, 40).unwrap();
    let rf = eval_hard(&EventEncoder::new(&w.model, &w.table).unwrap(), &inst).unwrap();
    let avg = averaging_model();
    let base = eval_hard(&EventEncoder::new(&avg, &w.pretrained).unwrap(), &inst).unwrap();
    verdict(
        inst.len() >= 20 && rf.accuracy >= base.accuracy && base.accuracy <= 0.5,
        format!("{} instances, role_factor {:.3}, averaging {:.3}", inst.len(), rf.accuracy, base.accuracy),
    )
}

// 7

fn cloze_calibration() -> Verdict {
    let mut records = Vec::new();
    for d in 0..250 {
        for i in 0..4 {
            records.push(EventRecord::new(
                &format!("doc{d}"),
                i,
                Triple::new(&format!("s{d}x{i}"), &format!("p{d}x{i}"), &format!("o{d}x{i}")),
                "",
            ));
        }
    }
    let corpus = Corpus::from_records(records);
    let mut r = rng::substream(107, rng::stream::CLOZE);
    let instances = generate_mcnc(&corpus, 5, &mut r, None).unwrap().instances;

    let dim = 48;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut er = seeded(7);
    let vectors: HashMap<Triple, Vector> = corpus
        .events()
        .iter()
        .map(|e| (e.triple.clone(), Vector::from((0..dim).map(|_| normal.sample(&mut er)).collect::<Vec<f64>>())))
        .collect();
    let random = |t: &Triple| -> LibResult<Vector> { Ok(vectors[t].clone()) };
    let chance = eval_mcnc(&random, &instances, Aggregation::Mean).unwrap();

    let mut oracle_correct = 0;
    for inst in &instances {
        let mut mean = vec![0.0; dim];
        for c in &inst.context {
            for (m, x) in mean.iter_mut().zip(vectors[&c.triple].iter()) {
                *m += x / inst.context.len() as f64;
            }
        }
        let held = inst.held_out.triple.clone();
        let oracle = |t: &Triple| -> LibResult<Vector> {
            Ok(if *t == held { Vector::from(mean.clone()) } else { vectors[t].clone() })
        };
        oracle_correct += eval_mcnc(&oracle, std::slice::from_ref(inst), Aggregation::Mean).unwrap().correct;
    }
    let oracle_acc = oracle_correct as f64 / instances.len() as f64;
    verdict(
        instances.len() >= 1000 && (chance.accuracy - 1.0 / 6.0).abs() <= 0.04 && oracle_acc == 1.0,
        format!("{} instances, random {:.4}, oracle {oracle_acc:.4}", instances.len(), chance.accuracy),
    )
}

// 8

fn spearman_correctness() -> Verdict {
    let mut r = seeded(108);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = r.random_range(3..40);
        let xs = rand_vec(&mut r, n);
        let ys = rand_vec(&mut r, n);
        worst = worst.max((spearman(&xs, &ys).unwrap() - spearman_closed_form(&xs, &ys)).abs());
    }
    let xs = [1.0, 2.0, 2.0, 3.0, 4.0, 4.0];
    let ys = [1.0, 3.0, 2.0, 4.0, 6.0, 5.0];
    let ranks_ok = average_ranks(&xs) == vec![1.0, 2.5, 2.5, 4.0, 5.5, 5.5];
    let tied = spearman(&xs, &ys).unwrap();
    let want = 16.5 / (16.5f64 * 17.5).sqrt();
    verdict(
        worst <= 1e-12 && ranks_ok && (tied - want).abs() <= 1e-12,
        format!("closed-form max diff {worst:.1e}, tied rho {tied:.6} vs {want:.6}"),
    )
}

// 9

fn schema_soundness() -> Verdict {
    let mut violations = Vec::new();
    let (mut schemas, mut grown, mut extra_events) = (0, 0, 0);
    for run in 0..20u64 {
        let kind = if run % 2 == 0 { ModelKind::RoleFactor } else { ModelKind::NeuralNet };
        let (specs, shared) = synthetic::sports_and_terror(10, 5, 200 + run);
        let records = synthetic::gen_records(&specs, &shared).unwrap();
        let pretrained = synthetic::gen_embeddings(synthetic::vocabulary(&specs, &shared), 12, run).unwrap();
        let model = CompositionModel::new(kind, ModelDims::new(12, 8, 8), false, run).unwrap();
        let config = TrainConfig {
            epochs: 5,
            batch_size: 16,
            seed: run,
            ..TrainConfig::default()
        };
        let out = train(&config, &Corpus::from_records(records.clone()), pretrained.clone(), model).unwrap();
        let enc = EventEncoder::new(&out.model, &out.table).unwrap();
        let index = build_index(&records, &enc).unwrap();
        let params = SchemaParams {
            gamma: kind.default_gamma(),
            ..SchemaParams::default()
        };
        for seed_ev in records.iter().step_by(10) {
            let s = generate_schema(seed_ev, &index, &enc, &pretrained, &params).unwrap();
            schemas += 1;
            if s.schema.len() > 1 {
                grown += 1;
                extra_events += s.schema.len() - 1;
            }
            for v in check_schema_gates(&s.schema, &out.model, &out.table, &pretrained, &params) {
                violations.push(format!("run {run} seed `{}`: {v}", seed_ev.triple));
            }
        }
    }
    verdict(
        violations.is_empty() && grown > 0,
        format!(
            "20 runs, {schemas} schemas, {grown} beyond the seed ({extra_events} accepted events), {} violations{}",
            violations.len(),
            first_of(&violations)
        ),
    )
}

// 10

fn evtensor(args: &[&str]) -> std::process::Output {
    let o = Command::new(env!("CARGO_BIN_EXE_evtensor"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn cli_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    evtensor(&["synth", "--out-dir", &p(""), "--docs", "10", "--events", "5", "--dim", "10", "--seed", "11"]);
    for out in ["a.evt", "b.evt"] {
        evtensor(&[
            "train", "--triples", &p("corpus.tsv"), "--embeddings", &p("embeddings.txt"), "--model", "role_factor",
            "--hidden", "6", "--output", "6", "--epochs", "3", "--seed", "11", "--out", &p(out),
        ]);
    }
    let same_ck = std::fs::read(p("a.evt")).unwrap() == std::fs::read(p("b.evt")).unwrap();
    for out in ["a.txt", "b.txt"] {
        evtensor(&[
            "schema", "--checkpoint", &p("a.evt"), "--triples", &p("corpus.tsv"), "--seed",
            "quarterback|throw|football", "--gamma", "0.4", "--out", &p(out),
        ]);
    }
    let (a, b) = (std::fs::read_to_string(p("a.txt")).unwrap(), std::fs::read_to_string(p("b.txt")).unwrap());
    verdict(
        same_ck && a == b && !a.is_empty(),
        format!("checkpoints identical: {same_ck}, schema documents identical: {}", a == b),
    )
}

// 11

fn save_twice(ck: &Checkpoint, dir: &Path, name: &str, precision: Precision) -> bool {
    let (a, b) = (dir.join(format!("{name}.a")), dir.join(format!("{name}.b")));
    ck.save(&a, precision).unwrap();
    let (loaded, got) = Checkpoint::load(&a).unwrap();
    loaded.save(&b, got).unwrap();
    got == precision && std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap()
}

fn checkpoint_round_trip() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let (specs, shared) = synthetic::sports_and_terror(3, 4, 12);
    let corpus = Corpus::from_records(synthetic::gen_records(&specs, &shared).unwrap());
    let pretrained = synthetic::gen_embeddings(synthetic::vocabulary(&specs, &shared), 6, 12).unwrap();
    let mut failed = Vec::new();
    for kind in ModelKind::ALL {
        for objective in [Objective::PredictEvents, Objective::PredictWords] {
            let config = TrainConfig {
                objective,
                epochs: 1,
                batch_size: 8,
                ..TrainConfig::default()
            };
            let model = CompositionModel::new(kind, ModelDims::new(6, 4, 5), true, 12).unwrap();
            let out = train(&config, &corpus, pretrained.clone(), model).unwrap();
            let ck = Checkpoint {
                model: out.model,
                table: out.table,
                head: out.head,
                config,
            };
            for precision in [Precision::Single, Precision::Double] {
                let name = format!("{kind}-{}-{}", objective.as_str(), precision.as_str());
                if !save_twice(&ck, dir.path(), &name, precision) {
                    failed.push(name);
                }
            }
        }
    }
    verdict(failed.is_empty(), format!("20 checkpoints, mismatched {failed:?}"))
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 11] = [
        ("contraction oracle", contraction_oracle),
        ("gradient suite", gradient_suite),
        ("compositionality identity", compositionality_identity),
        ("descent", descent_check),
        ("scenario separation", scenario_separation),
        ("hard similarity", hard_similarity),
        ("cloze calibration", cloze_calibration),
        ("spearman", spearman_correctness),
        ("schema gate soundness", schema_soundness),
        ("cli determinism", cli_determinism),
        ("checkpoint round trip", checkpoint_round_trip),
    ];
    // gradient checks report failures through panics; keep their output quiet
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!("criterion {:>2} {name}: {} ({})", n + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
