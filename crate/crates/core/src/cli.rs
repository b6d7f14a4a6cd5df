//! `evtensor` command line.
//!
//! Failures print one line to stderr, `error: kind=<kind> message=<text>`,
//! and exit with status 2 for usage errors and 1 for everything else.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::checkpoint::{Checkpoint, Precision};
use crate::corpus::{filter_stop_events, parse_triples, Corpus, EventRecord, StopEventList, Triple};
use crate::embeddings::EmbeddingTable;
use crate::encoder::EventEncoder;
use crate::error::{Error, Result};
use crate::evaluation::{
    curate_instances, eval_hard, eval_mcnc, eval_transitive, generate_mcnc, load_instances,
    parse_hard, parse_transitive, serialize_hard, write_instances, Aggregation, Curation,
};
use crate::models::{predicate_context_probe, CompositionModel, ModelDims, ModelKind, ModelParams};
use crate::rng;
use crate::schema::{build_index, generate_schema, SchemaParams};
use crate::synthetic;
use crate::training::{train, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "evtensor", version, about = "Event composition models: train, evaluate, build schemas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Task {
    Transitive,
    Hard,
    Mcnc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Agg {
    Mean,
    Max,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a composition model and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on an evaluation dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        dataset: PathBuf,
        /// Re-apply the coherence curation to cloze instances.
        #[arg(long)]
        curated: bool,
        /// Word vectors for curation; defaults to the checkpoint's table.
        #[arg(long)]
        gate_embeddings: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "mean")]
        aggregate: Agg,
        /// JSON report; defaults to `<dataset>.<task>.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Grow a schema around a seed event.
    Schema(SchemaArgs),
    /// List the words closest to one slice of a role-factor tensor applied
    /// to a predicate.
    Probe {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        predicate: String,
        #[arg(long, default_value_t = 0)]
        row: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Build multiple-choice cloze instances from a corpus (JSON Lines).
    Cloze {
        #[arg(long)]
        triples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        distractors: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Apply the coherence curation; requires --embeddings.
        #[arg(long)]
        curated: bool,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Write a two-scenario toy corpus, word vectors and hard pairs.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 20)]
        docs: usize,
        #[arg(long, default_value_t = 5)]
        events: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 20)]
        hard_pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Event triples file (6 tab-separated columns).
    #[arg(long)]
    triples: PathBuf,
    /// Pretrained word vectors, one `token v1 .. vd` per line.
    #[arg(long)]
    embeddings: PathBuf,
    /// predicate_tensor, role_factor, neural_net, elementwise_mult or averaging.
    #[arg(long)]
    model: String,
    /// `key = value` training config; defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "model.evt")]
    out: PathBuf,
    /// Per-epoch loss report; defaults to `<out>.loss.tsv`.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    hidden: usize,
    #[arg(long, default_value_t = 100)]
    output: usize,
    /// Add an output bias to the composition model.
    #[arg(long)]
    bias: bool,
    /// Store parameters as f64 instead of f32.
    #[arg(long)]
    double: bool,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config epoch count.
    #[arg(long)]
    epochs: Option<usize>,
    /// Keep only the first N pretrained vectors.
    #[arg(long)]
    max_vocab: Option<usize>,
    /// Drop stop events (light verbs) before training.
    #[arg(long)]
    filter_stop: bool,
}

#[derive(Debug, Args)]
struct SchemaArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Corpus to index.
    #[arg(long)]
    triples: PathBuf,
    /// Seed event as `subject|predicate|object`.
    #[arg(long)]
    seed: String,
    /// Word vectors for the gates; defaults to the checkpoint's table.
    #[arg(long)]
    gate_embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.25)]
    beta: f64,
    /// Defaults to 0.3 for feed-forward models and 0.2 otherwise.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 10)]
    max_size: usize,
    /// Schema text document; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Machine-readable schema record.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Index stop events too.
    #[arg(long)]
    keep_stop: bool,
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

type CliResult = std::result::Result<(), Failure>;

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Run the CLI with explicit arguments (program name first); returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let text = text.split("Usage:").next().unwrap_or("");
            eprintln!("error: kind=usage message={}", one_line(text.trim_start_matches("error: ")));
            return 2;
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval {
            checkpoint,
            task,
            dataset,
            curated,
            gate_embeddings,
            aggregate,
            report,
        } => cmd_eval(&checkpoint, task, &dataset, curated, gate_embeddings.as_deref(), aggregate, report),
        Command::Schema(a) => cmd_schema(a),
        Command::Probe {
            checkpoint,
            predicate,
            row,
            k,
        } => cmd_probe(&checkpoint, &predicate, row, k),
        Command::Cloze {
            triples,
            out,
            distractors,
            seed,
            curated,
            embeddings,
        } => cmd_cloze(&triples, &out, distractors, seed, curated, embeddings.as_deref()),
        Command::Synth {
            out_dir,
            docs,
            events,
            dim,
            hard_pairs,
            seed,
        } => cmd_synth(&out_dir, docs, events, dim, hard_pairs, seed),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: kind=usage message={}", one_line(&msg));
            2
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: kind={} message={}", e.kind(), one_line(&e.to_string()));
            1
        }
    }
}

fn require_file(path: &Path, what: &str) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{what} `{}` does not exist", path.display())))
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn load_corpus_records(path: &Path) -> Result<Vec<EventRecord>> {
    let parsed = parse_triples(path)?;
    for e in parsed.errors.iter().take(5) {
        log::warn!("{}:{}: {}", path.display(), e.line, e.message);
    }
    if parsed.errors.len() > 5 {
        log::warn!("{} more malformed lines skipped", parsed.errors.len() - 5);
    }
    if parsed.records.is_empty() {
        return Err(Error::Empty(format!("no events in {}", path.display())));
    }
    Ok(parsed.records)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_train(a: TrainArgs) -> CliResult {
    require_file(&a.triples, "triples file")?;
    require_file(&a.embeddings, "embeddings file")?;
    let kind = ModelKind::parse(&a.model).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut config = match &a.config {
        Some(p) => {
            require_file(p, "config file")?;
            TrainConfig::load(p)?
        }
        None => TrainConfig::default(),
    };
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(e) = a.epochs {
        config.epochs = e;
    }
    config.validate()?;

    let mut records = load_corpus_records(&a.triples)?;
    if a.filter_stop {
        records = filter_stop_events(records, &StopEventList::default());
    }
    let corpus = Corpus::from_records(records);
    let table = EmbeddingTable::load_pretrained(&a.embeddings, a.max_vocab)?;
    let dims = ModelDims::new(table.dim(), a.hidden, a.output);
    let model = CompositionModel::new(kind, dims, a.bias, config.seed)?;
    let outcome = train(&config, &corpus, table, model)?;

    let precision = if a.double { Precision::Double } else { Precision::Single };
    let ck = Checkpoint {
        model: outcome.model,
        table: outcome.table,
        head: outcome.head,
        config: config.clone(),
    };
    ck.save(&a.out, precision)?;
    let report_path = a.report.unwrap_or_else(|| with_suffix(&a.out, ".loss.tsv"));
    write_file(&report_path, &outcome.report.to_tsv())?;

    let losses = outcome.report.losses();
    let mut line = format!(
        "trained model={kind} events={} documents={} epochs={} steps={}",
        corpus.len(),
        corpus.num_documents(),
        config.epochs,
        outcome.report.steps
    );
    if let (Some(first), Some(last)) = (losses.first(), losses.last()) {
        let _ = write!(line, " first_loss={first:.6} final_loss={last:.6}");
    }
    let _ = write!(line, " checkpoint={}", a.out.display());
    println!("{line}");
    Ok(())
}

fn oov_count<'a>(table: &EmbeddingTable, triples: impl Iterator<Item = &'a Triple>) -> (usize, usize) {
    let (mut total, mut oov) = (0, 0);
    for t in triples {
        for tok in t.subject.iter().chain(&t.predicate).chain(&t.object) {
            total += 1;
            if table.lookup(tok).is_none() {
                oov += 1;
            }
        }
    }
    (oov, total)
}

#[derive(Serialize)]
struct EvalReport<T: Serialize> {
    task: &'static str,
    model: &'static str,
    dataset: String,
    oov_tokens: usize,
    total_tokens: usize,
    #[serde(flatten)]
    result: T,
}

fn emit_report<T: Serialize>(path: &Path, report: &EvalReport<T>) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(report)? + "\n"))
}

fn cmd_eval(
    checkpoint: &Path,
    task: Task,
    dataset: &Path,
    curated: bool,
    gate_embeddings: Option<&Path>,
    aggregate: Agg,
    report: Option<PathBuf>,
) -> CliResult {
    require_file(checkpoint, "checkpoint")?;
    require_file(dataset, "dataset")?;
    let (ck, _) = Checkpoint::load(checkpoint)?;
    let enc = EventEncoder::new(&ck.model, &ck.table)?;
    let name = dataset.display().to_string();
    let task_name = match task {
        Task::Transitive => "transitive",
        Task::Hard => "hard",
        Task::Mcnc => "mcnc",
    };
    let report_path = report.unwrap_or_else(|| with_suffix(dataset, &format!(".{task_name}.json")));
    let model = ck.model.kind().as_str();
    let mut out = std::io::stdout().lock();

    match task {
        Task::Transitive => {
            let text = std::fs::read_to_string(dataset).map_err(|e| Error::io(dataset, e))?;
            let pairs = parse_transitive(&text, &name)?;
            let (oov, total) = oov_count(&ck.table, pairs.iter().flat_map(|p| [&p.left, &p.right]));
            let r = eval_transitive(&enc, &pairs)?;
            let _ = writeln!(
                out,
                "task=transitive model={model} rho={:.6} pairs={} zero_norm={} oov_tokens={oov}/{total}",
                r.rho, r.pairs, r.zero_norm
            );
            emit_report(&report_path, &EvalReport { task: task_name, model, dataset: name, oov_tokens: oov, total_tokens: total, result: r })?;
        }
        Task::Hard => {
            let text = std::fs::read_to_string(dataset).map_err(|e| Error::io(dataset, e))?;
            let inst = parse_hard(&text, &name)?;
            let (oov, total) = oov_count(
                &ck.table,
                inst.iter().flat_map(|h| [&h.similar.left, &h.similar.right, &h.dissimilar.left, &h.dissimilar.right]),
            );
            let r = eval_hard(&enc, &inst)?;
            let _ = writeln!(
                out,
                "task=hard model={model} accuracy={:.6} correct={} total={} ties={} zero_norm={} oov_tokens={oov}/{total}",
                r.accuracy, r.correct, r.total, r.ties, r.zero_norm
            );
            emit_report(&report_path, &EvalReport { task: task_name, model, dataset: name, oov_tokens: oov, total_tokens: total, result: r })?;
        }
        Task::Mcnc => {
            let mut instances = load_instances(dataset)?;
            let before = instances.len();
            if curated {
                let gate = match gate_embeddings {
                    Some(p) => {
                        require_file(p, "gate embeddings")?;
                        Some(EmbeddingTable::load_pretrained(p, None)?)
                    }
                    None => None,
                };
                let stoplist = StopEventList::default();
                let (kept, stats) = curate_instances(
                    instances,
                    Curation {
                        stoplist: &stoplist,
                        table: gate.as_ref().unwrap_or(&ck.table),
                    },
                )?;
                let _ = writeln!(
                    out,
                    "curated instances={}/{before} discarded_stop={} discarded_no_overlap={} substitutions={}",
                    kept.len(),
                    stats.discarded_stop,
                    stats.discarded_no_overlap,
                    stats.substitutions
                );
                instances = kept;
            }
            let (oov, total) = oov_count(
                &ck.table,
                instances.iter().flat_map(|i| i.context.iter().chain(i.candidates()).map(|e| &e.triple)),
            );
            let agg = match aggregate {
                Agg::Mean => Aggregation::Mean,
                Agg::Max => Aggregation::Max,
            };
            let r = eval_mcnc(&enc, &instances, agg)?;
            let _ = writeln!(
                out,
                "task=mcnc model={model} accuracy={:.6} correct={} total={} ties={} oov_tokens={oov}/{total}",
                r.accuracy, r.correct, r.total, r.ties
            );
            emit_report(&report_path, &EvalReport { task: task_name, model, dataset: name, oov_tokens: oov, total_tokens: total, result: r })?;
        }
    }
    Ok(())
}

fn cmd_schema(a: SchemaArgs) -> CliResult {
    require_file(&a.checkpoint, "checkpoint")?;
    require_file(&a.triples, "triples file")?;
    let seed = Triple::parse_bar(&a.seed).map_err(|e| Failure::Usage(e.to_string()))?;
    if a.k == 0 {
        return Err(Failure::Usage("--k must be >= 1".into()));
    }
    let (ck, _) = Checkpoint::load(&a.checkpoint)?;
    let all_tokens = seed.subject.iter().chain(&seed.predicate).chain(&seed.object);
    if all_tokens.clone().all(|t| ck.table.lookup(t).is_none()) {
        return Err(Error::Invalid(format!("every token of seed `{seed}` is out of vocabulary")).into());
    }
    let gate = match &a.gate_embeddings {
        Some(p) => {
            require_file(p, "gate embeddings")?;
            Some(EmbeddingTable::load_pretrained(p, None)?)
        }
        None => None,
    };
    let gate_table = gate.as_ref().unwrap_or(&ck.table);

    let mut records = load_corpus_records(&a.triples)?;
    if !a.keep_stop {
        records = filter_stop_events(records, &StopEventList::default());
        if records.is_empty() {
            return Err(Error::Empty("every event is a stop event".into()).into());
        }
    }
    let enc = EventEncoder::new(&ck.model, &ck.table)?;
    let index = build_index(&records, &enc)?;
    let params = SchemaParams {
        k: a.k,
        alpha: a.alpha,
        beta: a.beta,
        gamma: a.gamma.unwrap_or_else(|| ck.model.kind().default_gamma()),
        max_size: a.max_size,
    };
    let seed_record = EventRecord::new("seed", 0, seed, "");
    let outcome = generate_schema(&seed_record, &index, &enc, gate_table, &params)?;
    let doc = outcome.schema.to_text(&outcome.stats);
    match &a.out {
        Some(p) => write_file(p, &doc)?,
        None => print!("{doc}"),
    }
    if let Some(p) = &a.json {
        let rec = outcome.schema.to_record(&outcome.stats, &params);
        write_file(p, &(serde_json::to_string_pretty(&rec).map_err(Error::from)? + "\n"))?;
    }
    let s = &outcome.stats;
    println!(
        "schema events={} candidates={} scanned={} rejected_predicate={} rejected_entity={} rejected_coherence={} accepted={}",
        outcome.schema.len(),
        s.candidates,
        s.scanned,
        s.rejected_predicate,
        s.rejected_entity,
        s.rejected_coherence,
        s.accepted
    );
    Ok(())
}

fn cmd_probe(checkpoint: &Path, predicate: &str, row: usize, k: usize) -> CliResult {
    require_file(checkpoint, "checkpoint")?;
    let (ck, _) = Checkpoint::load(checkpoint)?;
    let ModelParams::RoleFactor(params) = ck.model.params() else {
        return Err(Error::Invalid(format!(
            "probe needs a role_factor checkpoint, found {}",
            ck.model.kind()
        ))
        .into());
    };
    let tokens: Vec<&str> = predicate.split_whitespace().collect();
    let p = ck.table.embed_phrase(&tokens)?;
    let r = predicate_context_probe(params, &p, row, &ck.table, k)?;
    if r.zero_norm {
        println!("probe predicate={predicate} row={row} zero_norm=true");
        return Ok(());
    }
    println!("probe predicate={predicate} row={row}");
    for (tok, c) in &r.neighbors {
        println!("{tok}\t{c:.6}");
    }
    Ok(())
}

fn cmd_cloze(
    triples: &Path,
    out: &Path,
    distractors: usize,
    seed: u64,
    curated: bool,
    embeddings: Option<&Path>,
) -> CliResult {
    require_file(triples, "triples file")?;
    let corpus = Corpus::from_records(load_corpus_records(triples)?);
    let mut rng = rng::substream(seed, rng::stream::CLOZE);
    let stoplist = StopEventList::default();
    let table = match (curated, embeddings) {
        (true, None) => return Err(Failure::Usage("--curated needs --embeddings".into())),
        (true, Some(p)) => {
            require_file(p, "embeddings file")?;
            Some(EmbeddingTable::load_pretrained(p, None)?)
        }
        (false, _) => None,
    };
    let curation = table.as_ref().map(|t| Curation {
        stoplist: &stoplist,
        table: t,
    });
    let outcome = generate_mcnc(&corpus, distractors, &mut rng, curation)?;
    write_file(out, &write_instances(&outcome.instances)?)?;
    let s = &outcome.stats;
    println!(
        "cloze instances={} skipped_documents={} skipped_instances={} discarded_no_overlap={} substitutions={}",
        outcome.instances.len(),
        s.skipped_documents,
        s.skipped_instances,
        s.discarded_no_overlap,
        s.substitutions
    );
    Ok(())
}

fn cmd_synth(out_dir: &Path, docs: usize, events: usize, dim: usize, hard_pairs: usize, seed: u64) -> CliResult {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (specs, shared) = synthetic::sports_and_terror(docs, events, seed);
    let corpus = synthetic::gen_corpus(&specs, &shared)?;
    let table = synthetic::gen_embeddings(synthetic::vocabulary(&specs, &shared), dim, seed)?;
    let hard = synthetic::gen_hard_pairs(&specs, &shared, hard_pairs)?;
    write_file(&out_dir.join("corpus.tsv"), &corpus)?;
    write_file(&out_dir.join("embeddings.txt"), &table.to_text())?;
    write_file(&out_dir.join("hard.tsv"), &serialize_hard(&hard))?;
    println!(
        "synth events={} tokens={} hard_pairs={} dir={}",
        corpus.lines().count(),
        table.len(),
        hard.len(),
        out_dir.display()
    );
    Ok(())
}
