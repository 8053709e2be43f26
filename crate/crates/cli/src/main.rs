use std::collections::{BTreeMap, BTreeSet};
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value as Json};

use dqctx_core::context::{lift, load_system, quality_instance_with, ContextualSystem};
use dqctx_core::datalog::{parse_query, Query};
use dqctx_core::error::Error;
use dqctx_core::extsrc::{CallLog, Registry};
use dqctx_core::lci::{quality_answers_certain_with, LciSpec};
use dqctx_core::magic::{adorn, evaluate_magic, magic_rewrite, Adornment};
use dqctx_core::metrics::{qm2, render, MetricReport, Rational};
use dqctx_core::relmodel::{load_facts, Instance, Tuple, Value};
use dqctx_core::unfold::{answer_with_context, close_query, qua_rewrite};

#[derive(Parser)]
#[command(name = "dqctx", version, about = "Context-based data quality assessment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the quality instance and metrics; write a JSON report.
    Assess(AssessArgs),
    /// Quality answers to a query, one CSV row per answer.
    Answer(AnswerArgs),
    /// Print the quality rewriting of a query.
    Rewrite(RewriteArgs),
    /// Print the metrics section of the report.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct Input {
    /// System description (.dqx).
    #[arg(long)]
    system: PathBuf,
    /// Directory holding one CSV file per relation.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct AssessArgs {
    #[command(flatten)]
    input: Input,
    /// Also answer this query and include the answers.
    #[arg(long)]
    query: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include per-phase timings (makes the report non-reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct AnswerArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long)]
    query: PathBuf,
    /// Certain answers over the legal contextual instances.
    #[arg(long, conflicts_with = "magic")]
    certain: bool,
    /// Evaluate through the magic-sets rewriting.
    #[arg(long)]
    magic: bool,
    /// Write a JSON report with the answers and the call log.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RewriteArgs {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    query: PathBuf,
    /// Print the adorned and magic programs instead.
    #[arg(long)]
    magic: bool,
    /// Binding patterns overriding the declared ones, e.g. `#C=bf,#D=bff`.
    #[arg(long, value_parser = parse_bindings)]
    bindings: Option<BTreeMap<String, Adornment>>,
    /// Also unfold quality predicates and context views.
    #[arg(long)]
    unfold_cqps: bool,
    /// Print every rewriting stage.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct MetricsArgs {
    #[command(flatten)]
    input: Input,
    /// Directory with a given quality instance to compare against.
    #[arg(long)]
    quality: Option<PathBuf>,
}

fn parse_bindings(text: &str) -> std::result::Result<BTreeMap<String, Adornment>, String> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|entry| {
            let (name, pattern) = entry
                .split_once('=')
                .ok_or_else(|| format!("`{entry}` is not of the form NAME=PATTERN"))?;
            let ad = pattern.trim().parse::<Adornment>().map_err(|e| e.to_string())?;
            Ok((name.trim().to_string(), ad))
        })
        .collect()
}

fn read_query(path: &Path) -> Result<Query> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_query(&text)?)
}

fn load(input: &Input) -> Result<(ContextualSystem, Instance)> {
    let mut system = load_system(&input.system)?;
    let d = system.load_data(&input.data)?;
    Ok((system, d))
}

fn cell(v: &Value) -> Json {
    match v {
        Value::Null => Json::Null,
        v => Json::String(v.to_cell()),
    }
}

fn row(t: &Tuple) -> Json {
    Json::Array(t.iter().map(cell).collect())
}

fn rows(ts: &BTreeSet<Tuple>) -> Json {
    Json::Array(ts.iter().map(row).collect())
}

fn instance_json(inst: &Instance) -> Json {
    Json::Object(
        inst.relation_names()
            .map(|n| (n.to_string(), rows(inst.tuples(n))))
            .collect(),
    )
}

fn ratio(r: &Rational) -> Json {
    json!({ "exact": format!("{}/{}", r.numer(), r.denom()), "decimal": render(r) })
}

fn metrics_json(m: &MetricReport) -> Json {
    let per: Map<String, Json> = m
        .per_relation
        .iter()
        .map(|(n, r)| {
            (
                n.clone(),
                json!({
                    "size": r.size,
                    "quality_size": r.quality_size,
                    "symmetric_difference": r.symmetric_difference,
                }),
            )
        })
        .collect();
    json!({
        "qm0": m.qm0,
        "qm1": ratio(&m.qm1),
        "jaccard_r": ratio(&m.jaccard_r),
        "qm2": ratio(&m.qm2),
        "per_relation": per,
    })
}

fn call_log_json(log: &CallLog) -> Json {
    Json::Array(
        log.entries
            .iter()
            .map(|e| {
                json!({
                    "seq": e.seq,
                    "source": e.source,
                    "inputs": e.inputs.iter().map(cell).collect::<Vec<_>>(),
                    "outputs": e.outputs.iter().map(row).collect::<Vec<_>>(),
                    "cached": e.cached,
                })
            })
            .collect(),
    )
}

fn digest(system: &ContextualSystem) -> Json {
    let names = |sigs: &[dqctx_core::relmodel::RelationSignature]| sigs.iter().map(|s| s.name.clone()).collect::<Vec<_>>();
    json!({
        "source": names(&system.source_schema),
        "contextual": names(&system.contextual_schema),
        "external": system.external_predicates.iter().map(|e| e.decl.name.clone()).collect::<Vec<_>>(),
        "rules": {
            "context_views": system.context_views.len(),
            "cqps": system.cqps().count(),
            "quality_views": system.quality_views().count(),
            "footprints": system.footprints().count(),
        },
    })
}

fn emit(report: &Json, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

struct Assessment {
    quality: Instance,
    metrics: MetricReport,
}

fn assess_instance(system: &ContextualSystem, d: &Instance, registry: &mut Registry, phases: &mut Vec<(&'static str, f64)>) -> Result<Assessment> {
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, phases: &mut Vec<(&'static str, f64)>| {
        phases.push((name, clock.elapsed().as_secs_f64() * 1000.0));
        clock = Instant::now();
    };
    let contextual = lift(system, d)?;
    lap("lift", phases);
    let quality = quality_instance_with(system, &contextual, registry)?;
    lap("quality_instance", phases);
    let q2 = qm2(d, &LciSpec::new(system.clone()), registry)?;
    let metrics = MetricReport::compute(d, &quality, &[], q2)?;
    lap("metrics", phases);
    Ok(Assessment { quality, metrics })
}

fn assess(args: &AssessArgs) -> Result<()> {
    let start = Instant::now();
    let (system, d) = load(&args.input)?;
    let mut phases = vec![("load", start.elapsed().as_secs_f64() * 1000.0)];
    let mut registry = system.registry()?;
    let a = assess_instance(&system, &d, &mut registry, &mut phases)?;
    let mut report = Map::new();
    report.insert("system".into(), digest(&system));
    report.insert("quality_instance".into(), instance_json(&a.quality));
    report.insert("metrics".into(), metrics_json(&a.metrics));
    if let Some(path) = &args.query {
        let clock = Instant::now();
        let q = read_query(path)?;
        let answers = answer_with_context(&q, &system, &d, &mut registry)?;
        phases.push(("answer", clock.elapsed().as_secs_f64() * 1000.0));
        report.insert("answers".into(), rows(&answers));
    }
    report.insert("call_log".into(), call_log_json(registry.log()));
    if args.timings {
        let t: Map<String, Json> = phases.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
        report.insert("timings_ms".into(), Json::Object(t));
    }
    emit(&Json::Object(report), args.out.as_deref())
}

fn magic_answers(q: &Query, system: &ContextualSystem, d: &Instance, registry: &mut Registry) -> Result<BTreeSet<Tuple>> {
    let (_, trace) = qua_rewrite(q, system, false)?;
    let closed = close_query(&trace.stages[0].1, system)?;
    let magic = magic_rewrite(&adorn(&closed, &system.bindings())?);
    let out = evaluate_magic(&magic, &lift(system, d)?, Some(registry))?;
    Ok(out.tuples(&q.answer).clone())
}

fn answer(args: &AnswerArgs) -> Result<()> {
    let (system, d) = load(&args.input)?;
    let q = read_query(&args.query)?;
    let mut registry = system.registry()?;
    let answers = if args.certain {
        quality_answers_certain_with(&q, &LciSpec::new(system.clone()), &d, &mut registry)?
    } else if args.magic {
        magic_answers(&q, &system, &d, &mut registry)?
    } else {
        answer_with_context(&q, &system, &d, &mut registry)?
    };
    let mut w = csv::WriterBuilder::new().from_writer(std::io::stdout().lock());
    for t in &answers {
        w.write_record(t.iter().map(Value::to_cell))?;
    }
    w.flush()?;
    if let Some(out) = &args.out {
        let report = json!({ "answers": rows(&answers), "call_log": call_log_json(registry.log()) });
        emit(&report, Some(out))?;
    }
    Ok(())
}

fn rewrite(args: &RewriteArgs) -> Result<()> {
    let system = load_system(&args.system)?;
    let q = read_query(&args.query)?;
    let (out, trace) = qua_rewrite(&q, &system, args.unfold_cqps)?;
    let mut stdout = std::io::stdout().lock();
    if args.trace {
        write!(stdout, "{trace}")?;
    }
    if args.magic {
        let mut bindings = system.bindings();
        bindings.extend(args.bindings.clone().unwrap_or_default());
        let closed = close_query(&trace.stages[0].1, &system)?;
        let adorned = adorn(&closed, &bindings)?;
        write!(stdout, "% adorned\n{adorned}% magic\n{}", magic_rewrite(&adorned))?;
    } else if !args.trace {
        write!(stdout, "{out}")?;
    }
    Ok(())
}

fn metrics(args: &MetricsArgs) -> Result<()> {
    let (system, d) = load(&args.input)?;
    let mut registry = system.registry()?;
    let metrics = match &args.quality {
        None => assess_instance(&system, &d, &mut registry, &mut Vec::new())?.metrics,
        Some(dir) => {
            let quality = load_facts(dir, &system.source_schema)?;
            let q2 = qm2(&d, &LciSpec::new(system.clone()), &mut registry)?;
            MetricReport::compute(&d, &quality, &[], q2)?
        }
    };
    emit(&metrics_json(&metrics), None)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Assess(a) => assess(a),
        Command::Answer(a) => answer(a),
        Command::Rewrite(a) => rewrite(a),
        Command::Metrics(a) => metrics(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::ResolverFailure { .. }) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let color = std::env::var("DQCTX_COLOR").map_or(true, |v| v != "0") && std::io::stderr().is_terminal();
            let label = if color { "\x1b[1;31merror\x1b[0m" } else { "error" };
            eprintln!("{label}: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
