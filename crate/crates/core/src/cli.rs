//! Command-line front end: `evaluate`, `check`, `synth` and `report`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{parse_gate, EvalConfig, GateMetric};
use crate::consistency::check_invoice;
use crate::corpus::{
    report_from_json, write_report, CorpusManifest, ManifestEntry, ManifestMeta, PredictionRef, ReportFormat,
};
use crate::evaluate::{evaluate_manifest_file, EvalOptions};
use crate::metrics::EvaluationReport;
use crate::schema::{invoice_to_string, parse_invoice};
use crate::synth::{expected_for, synth_corpus, ErrorSpec, GenConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_GATES: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "invoice-eval", version, about = "Score invoice extraction output against ground truth")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Md,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Md => ReportFormat::Markdown,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every (document, method) pair listed in a manifest.
    Evaluate(EvaluateArgs),
    /// Run the arithmetic consistency rules on one canonical invoice.
    Check(CheckArgs),
    /// Write a synthetic corpus with ground truth, predictions and ledgers.
    Synth(SynthArgs),
    /// Re-render a saved JSON report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Restrict to these methods (repeatable).
    #[arg(long = "method")]
    pub methods: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatArg,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Minimum metric value, e.g. `accuracy=0.9` (repeatable).
    #[arg(long = "gate", value_parser = parse_gate)]
    pub gates: Vec<(String, f64)>,
    /// Use measured wall-clock time instead of extractor-reported time.
    #[arg(long)]
    pub measure_time: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub invoice: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub out_dir: PathBuf,
    #[arg(short = 'n', long = "count")]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Error spec JSON; without it predictions equal the ground truth.
    #[arg(long)]
    pub errors: Option<PathBuf>,
    /// Generator settings JSON.
    #[arg(long)]
    pub generator: Option<PathBuf>,
    /// Evaluation config whose tolerances decide the expected outcomes.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub report: PathBuf,
    #[arg(long, value_enum, default_value = "md")]
    pub format: FormatArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure that maps to an exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn input(message: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_INPUT, message: message.to_string() }
}

fn load_config(path: Option<&Path>) -> Result<EvalConfig, Failure> {
    path.map_or_else(|| Ok(EvalConfig::default()), |p| EvalConfig::load(p).map_err(input))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| input(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| input(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| input(format!("cannot write {}: {e}", path.display())))
}

fn emit(report: &EvaluationReport, format: FormatArg, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) => write_report(report, format.into(), path).map_err(input),
        None => {
            let text = match format {
                FormatArg::Json => crate::corpus::report_to_json(report),
                FormatArg::Md => crate::corpus::render_markdown(report),
            };
            stdout.write_all(text.as_bytes()).map_err(|e| input(format!("cannot write output: {e}")))
        }
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{:.1}%", x * 100.0))
}

pub fn cmd_evaluate(args: &EvaluateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    let mut cfg = load_config(args.config.as_deref())?;
    for (name, value) in &args.gates {
        cfg.report.gates.insert(name.clone(), *value);
    }
    if args.workers == Some(0) {
        return Err(input("--workers must be at least 1"));
    }
    let opts = EvalOptions { methods: args.methods.clone(), workers: args.workers, measure_time: args.measure_time };
    let report = evaluate_manifest_file(&args.manifest, &cfg, &opts).map_err(input)?;
    emit(&report, args.format, args.out.as_deref(), stdout)?;

    // The summary goes wherever the report does not.
    let log: &mut dyn Write = if args.out.is_some() { stdout } else { stderr };
    let mut violated = Vec::new();
    for (name, m) in &report.methods {
        let b = &m.metrics;
        let _ = writeln!(
            log,
            "{name}: accuracy {} pass rate {} ({} documents)",
            pct(b.accuracy.overall),
            pct(b.consistency.pass_rate),
            b.documents
        );
        for (gate, threshold) in &cfg.report.gates {
            let metric: GateMetric = gate.parse().map_err(input)?;
            let value = metric.value(b);
            if !metric.satisfied(value, *threshold) {
                violated.push(format!("{name}: {gate} {} violates gate {threshold}", value.map_or("n/a".into(), |v| v.to_string())));
            }
        }
    }
    for v in &violated {
        let _ = writeln!(log, "gate failed: {v}");
    }
    Ok(if violated.is_empty() { EXIT_OK } else { EXIT_GATES })
}

pub fn cmd_check(args: &CheckArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = load_config(args.config.as_deref())?;
    let text = std::fs::read_to_string(&args.invoice)
        .map_err(|e| input(format!("cannot read {}: {e}", args.invoice.display())))?;
    let inv = parse_invoice(&text).map_err(|e| input(format!("{}: {e}", args.invoice.display())))?;
    match check_invoice(&inv, cfg.consistency.tolerance) {
        Ok(c) => {
            for r in &c.results {
                let _ = writeln!(stdout, "{r}");
            }
            let _ = writeln!(stdout, "verdict: {}", c.verdict.as_str());
            Ok(if c.verdict == crate::consistency::Status::Fail { EXIT_GATES } else { EXIT_OK })
        }
        Err(mix) => {
            let _ = writeln!(stdout, "{mix}");
            let _ = writeln!(stdout, "verdict: fail");
            Ok(EXIT_GATES)
        }
    }
}

pub fn cmd_synth(args: &SynthArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    if args.count == 0 {
        return Err(input("a corpus needs at least one document"));
    }
    let cfg = load_config(args.config.as_deref())?;
    let gen: GenConfig = args.generator.as_deref().map_or_else(|| Ok(GenConfig::default()), read_json)?;
    let spec: Option<ErrorSpec> = args.errors.as_deref().map(read_json).transpose()?;
    let docs = synth_corpus(args.count, args.seed, &gen, spec.as_ref(), &cfg).map_err(input)?;

    let dir = &args.out_dir;
    let mut entries = Vec::new();
    for d in &docs {
        let id = &d.meta.doc_id;
        let gt_path = format!("gt/{id}.json");
        let pred_path = format!("predictions/synthetic/{id}.json");
        write_file(&dir.join(&gt_path), &invoice_to_string(&d.gt))?;
        write_file(&dir.join(&pred_path), &invoice_to_string(&d.pred))?;
        let mut ledger = serde_json::to_string_pretty(&d.ledger).expect("ledger serializes");
        ledger.push('\n');
        write_file(&dir.join(format!("ledgers/{id}.json")), &ledger)?;
        entries.push(ManifestEntry {
            doc_id: id.clone(),
            gt_path,
            predictions: BTreeMap::from([("synthetic".to_string(), PredictionRef::Path(pred_path))]),
            meta: ManifestMeta::from(&d.meta),
        });
    }
    let manifest = CorpusManifest { corpus_id: format!("synth-{}", args.seed), documents: entries, base_dir: dir.clone() };
    write_file(&dir.join("manifest.json"), &manifest.to_json())?;
    let expected = expected_for(&docs, &cfg);
    let mut text = serde_json::to_string_pretty(&expected).expect("expected metrics serialize");
    text.push('\n');
    write_file(&dir.join("expected.json"), &text)?;

    let errors: usize = docs.iter().map(|d| d.ledger.entries.len()).sum();
    let _ = writeln!(
        stdout,
        "wrote {} documents with {errors} injected errors to {}; expected accuracy {}, pass rate {}",
        docs.len(),
        dir.display(),
        pct(expected.accuracy().overall),
        pct(expected.pass_rate())
    );
    Ok(EXIT_OK)
}

pub fn cmd_report(args: &ReportArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let text = std::fs::read_to_string(&args.report)
        .map_err(|e| input(format!("cannot read {}: {e}", args.report.display())))?;
    let report = report_from_json(&text, &args.report.display().to_string()).map_err(input)?;
    emit(&report, args.format, args.out.as_deref(), stdout)?;
    Ok(EXIT_OK)
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Evaluate(a) => cmd_evaluate(a, stdout, stderr),
        Command::Check(a) => cmd_check(a, stdout),
        Command::Synth(a) => cmd_synth(a, stdout),
        Command::Report(a) => cmd_report(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
