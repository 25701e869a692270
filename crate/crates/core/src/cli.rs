//! Command-line front end.
//!
//! Exit codes: `0` success, `1` schema or configuration error (including
//! invalid flags), `2` I/O error or unreadable snapshot.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::evolution::{
    classification_coverage, evolve_with_audit, property_domain_ratio, write_report, AuditSink,
    EvolutionConfig, EvolveError, DEFAULT_BATCH_LINES, DEFAULT_MAX_INNER_ROUNDS,
};
use crate::generalization::{DomainChange, ThresholdPolicy};
use crate::kb::{KnowledgeBase, SchemaError, Vocabulary};
use crate::ntriples::{read_all, BatchReader, ParseReport};
use crate::synth::{generate_kb, write_ntriples, SynthSpec};
use crate::typing::{Method, TypingDecision};

#[derive(Debug, Parser)]
#[command(name = "kbevolve", version, about = "Evolve a knowledge base from batches of N-Triples instance data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a schema and ingest instance triples without evolving.
    Ingest(IngestArgs),
    /// Run the generalization/typing cycle over batches of instance triples.
    Evolve(EvolveArgs),
    /// Print coverage metrics of a knowledge base snapshot.
    Report(ReportArgs),
    /// Re-export a knowledge base snapshot in canonical order.
    Export(ExportArgs),
    /// Generate a synthetic schema, instance stream and ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Schema N-Triples file.
    pub schema: PathBuf,
    /// Instance N-Triples file.
    pub triples: PathBuf,
    /// Physical lines per batch.
    #[arg(long, default_value_t = DEFAULT_BATCH_LINES, value_parser = parse_positive)]
    pub batch_lines: usize,
    /// Write the resulting snapshot here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// Schema N-Triples file (may also hold initial instance data).
    pub schema: PathBuf,
    /// Instance N-Triples file, consumed in batches.
    pub triples: PathBuf,
    /// Physical lines per batch.
    #[arg(long, default_value_t = DEFAULT_BATCH_LINES, value_parser = parse_positive)]
    pub batch_lines: usize,
    /// Type scoring method.
    #[arg(long, default_value = "pfidf", value_parser = ["naive", "cosine", "pfidf"])]
    pub method: String,
    /// Upper bound on generalize+type rounds per batch.
    #[arg(long, default_value_t = DEFAULT_MAX_INNER_ROUNDS, value_parser = parse_positive)]
    pub max_inner_rounds: usize,
    /// Learned domains are removed below this fraction of the generalization ratio.
    #[arg(long, default_value_t = 0.5)]
    pub deletion_factor: f64,
    /// Never remove learned domains.
    #[arg(long)]
    pub no_delete: bool,
    /// Evolved snapshot path.
    #[arg(long, default_value = "evolved.nt")]
    pub out: PathBuf,
    /// Per-batch metrics CSV path.
    #[arg(long, default_value = "report.csv")]
    pub report: PathBuf,
    /// CSV of type changes (instance, previous, chosen, score, method).
    #[arg(long)]
    pub type_audit: Option<PathBuf>,
    /// CSV of domain changes (class, property, action, ratio, threshold).
    #[arg(long)]
    pub domain_audit: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Knowledge base snapshot (N-Triples).
    pub kb: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Knowledge base snapshot (N-Triples).
    pub kb: PathBuf,
    /// Output path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub classes: usize,
    /// Signature properties per class.
    #[arg(long, default_value_t = 5)]
    pub sig: usize,
    /// Properties whose domain is every class.
    #[arg(long, default_value_t = 3)]
    pub shared: usize,
    /// Instances per class.
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    /// Fraction of instances without an rdf:type statement, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub hidden: f64,
    /// Probability of dropping each signature property, in [0, 1).
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Directory receiving schema.nt, triples.nt and truth.csv.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("schema error: {0}")]
    Schema(#[from] SchemaError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Corrupt(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Schema(_) => 1,
            CliError::Io { .. } | CliError::Corrupt(_) => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    1
                }
            };
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(&a, out, err),
        Command::Evolve(a) => cmd_evolve(&a, out, err),
        Command::Report(a) => cmd_report(&a.kb, out),
        Command::Export(a) => cmd_export(&a, out),
        Command::Synth(a) => cmd_synth(&a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn warn_parse_errors(path: &Path, report: &ParseReport, err: &mut dyn Write) {
    for e in report.errors.iter().take(20) {
        let _ = writeln!(err, "warning: {}:{}: {}", path.display(), e.line, e.error);
    }
    if report.errors.len() > 20 {
        let _ = writeln!(err, "warning: {}: {} more malformed lines", path.display(), report.errors.len() - 20);
    }
}

/// Loads a schema file; non-schema statements in it are ingested as
/// initial instance data.
fn load_kb(path: &Path, err: &mut dyn Write) -> Result<(KnowledgeBase, ParseReport), CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    let (triples, report) = read_all(BufReader::new(file)).map_err(io_err(path))?;
    warn_parse_errors(path, &report, err);
    let (mut kb, rest) = KnowledgeBase::load_schema(triples, Vocabulary::default())?;
    kb.add_instance_triples(&rest);
    Ok((kb, report))
}

fn write_snapshot(kb: &KnowledgeBase, path: &Path) -> Result<usize, CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    kb.export_ntriples(BufWriter::new(file)).map_err(io_err(path))
}

fn cmd_ingest(a: &IngestArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let (mut kb, _) = load_kb(&a.schema, err)?;
    let file = File::open(&a.triples).map_err(io_err(&a.triples))?;
    let mut reader = BatchReader::new(BufReader::new(file));
    let mut total = ParseReport::default();
    let mut batch = 0;
    loop {
        let (triples, report) = reader.read_batch(a.batch_lines).map_err(io_err(&a.triples))?;
        if report.lines_read == 0 {
            break;
        }
        batch += 1;
        let s = kb.add_instance_triples(&triples);
        let _ = writeln!(
            out,
            "batch={batch} lines_read={} triples_emitted={} lines_skipped={} new_instances={} new_placeholders={} type_assertions={}",
            report.lines_read, report.triples_emitted, report.lines_skipped, s.new_instances, s.new_placeholders, s.type_assertions
        );
        total.merge(report);
    }
    warn_parse_errors(&a.triples, &total, err);
    let _ = writeln!(
        out,
        "lines_read={} triples_emitted={} lines_skipped={} parse_errors={}",
        total.lines_read,
        total.triples_emitted,
        total.lines_skipped,
        total.errors.len()
    );
    print_coverage(&kb, out);
    if let Some(path) = &a.out {
        write_snapshot(&kb, path)?;
    }
    Ok(())
}

struct CsvAudit {
    types: Option<(PathBuf, csv::Writer<BufWriter<File>>)>,
    domains: Option<(PathBuf, csv::Writer<BufWriter<File>>)>,
}

fn csv_file(path: &Path, header: &[&str]) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).map_err(|e| io_err(path)(e.into()))?;
    Ok(w)
}

impl AuditSink<f64> for CsvAudit {
    fn decisions(&mut self, _iteration: usize, _round: usize, decisions: &[TypingDecision<f64>]) -> io::Result<()> {
        let Some((_, w)) = &mut self.types else {
            return Ok(());
        };
        for d in decisions.iter().filter(|d| d.changed()) {
            w.write_record([
                d.instance.as_str(),
                d.previous.as_deref().unwrap_or(crate::synth::UNCLASSIFIED),
                d.chosen.as_deref().unwrap_or(crate::synth::UNCLASSIFIED),
                &d.score.to_string(),
                d.method.as_str(),
            ])?;
        }
        Ok(())
    }

    fn domain_changes(&mut self, _iteration: usize, _round: usize, changes: &[DomainChange<f64>]) -> io::Result<()> {
        let Some((_, w)) = &mut self.domains else {
            return Ok(());
        };
        for c in changes {
            w.write_record([
                c.class.as_str(),
                c.property.as_str(),
                &c.action.to_string(),
                &c.ratio.to_string(),
                &c.threshold.to_string(),
            ])?;
        }
        Ok(())
    }
}

fn cmd_evolve(a: &EvolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let method: Method = a.method.parse().map_err(CliError::Usage)?;
    let policy = ThresholdPolicy::new(a.deletion_factor).map_err(|e| CliError::Usage(e.to_string()))?;
    let config = EvolutionConfig {
        batch_lines: a.batch_lines,
        method,
        max_inner_rounds: a.max_inner_rounds,
        policy,
        deletion_enabled: !a.no_delete,
    };

    let (mut kb, _) = load_kb(&a.schema, err)?;
    let file = File::open(&a.triples).map_err(io_err(&a.triples))?;
    let mut audit = CsvAudit {
        types: match &a.type_audit {
            Some(p) => Some((p.clone(), csv_file(p, &["instance", "previous", "chosen", "score", "method"])?)),
            None => None,
        },
        domains: match &a.domain_audit {
            Some(p) => Some((p.clone(), csv_file(p, &["class", "property", "action", "ratio", "threshold"])?)),
            None => None,
        },
    };

    let report = match evolve_with_audit(&mut kb, BufReader::new(file), &config, &mut audit) {
        Ok(r) => r,
        Err(EvolveError::Config(e)) => return Err(CliError::Usage(e.to_string())),
        Err(EvolveError::Io { report, source }) => {
            let _ = writeln!(err, "error: aborted after {} completed batches", report.records.len());
            return Err(io_err(&a.triples)(source));
        }
    };
    for (path, mut w) in [audit.types, audit.domains].into_iter().flatten() {
        w.flush().map_err(io_err(&path))?;
    }
    warn_parse_errors(&a.triples, &report.parse, err);

    write_snapshot(&kb, &a.out)?;
    let file = File::create(&a.report).map_err(io_err(&a.report))?;
    write_report(&report.records, BufWriter::new(file)).map_err(io_err(&a.report))?;

    let _ = writeln!(out, "batches={}", report.records.len());
    let _ = writeln!(out, "lines_read={}", report.parse.lines_read);
    let _ = writeln!(out, "parse_errors={}", report.parse.errors.len());
    print_coverage(&kb, out);
    Ok(())
}

fn print_coverage(kb: &KnowledgeBase, out: &mut dyn Write) {
    let cov = classification_coverage(kb);
    let props = property_domain_ratio(kb);
    let cr = cov.classified_ratio::<f64>();
    let pr = props.ratio::<f64>();
    let _ = writeln!(out, "instances_total={}", cov.instances_total);
    let _ = writeln!(out, "instances_with_properties={}", cov.with_properties);
    let _ = writeln!(out, "instances_classified={}", cov.classified);
    let _ = writeln!(out, "instances_classified_with_properties={}", cov.classified_with_properties);
    let _ = writeln!(out, "instances_placeholder={}", cov.placeholder);
    let _ = writeln!(out, "classified_ratio={}", cr.value);
    let _ = writeln!(out, "classified_ratio_zero_denominator={}", cr.zero_denominator);
    let _ = writeln!(out, "properties_total={}", props.properties_total);
    let _ = writeln!(out, "properties_with_domain={}", props.with_domain);
    let _ = writeln!(out, "property_domain_ratio={}", pr.value);
    let _ = writeln!(out, "property_domain_ratio_zero_denominator={}", pr.zero_denominator);
}

/// Loads a snapshot written by `export_ntriples`; any malformed line makes
/// the snapshot corrupt.
fn load_snapshot(path: &Path) -> Result<KnowledgeBase, CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    let (triples, report) = read_all(BufReader::new(file)).map_err(io_err(path))?;
    if let Some(e) = report.errors.first() {
        return Err(CliError::Corrupt(format!(
            "{}: corrupt snapshot: line {}: {}",
            path.display(),
            e.line,
            e.error
        )));
    }
    let (mut kb, rest) = KnowledgeBase::load_schema(triples, Vocabulary::default())?;
    kb.add_instance_triples(&rest);
    Ok(kb)
}

fn cmd_report(path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let kb = load_snapshot(path)?;
    print_coverage(&kb, out);
    Ok(())
}

fn cmd_export(a: &ExportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let kb = load_snapshot(&a.kb)?;
    let n = write_snapshot(&kb, &a.out)?;
    let _ = writeln!(out, "statements={n}");
    Ok(())
}

fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = SynthSpec {
        class_count: a.classes,
        signature_properties_per_class: a.sig,
        shared_properties: a.shared,
        instances_per_class: a.instances,
        hidden_type_fraction: a.hidden,
        noise_rate: a.noise,
        seed: a.seed,
    };
    let synth = generate_kb(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;

    let schema_path = a.out_dir.join("schema.nt");
    let triples_path = a.out_dir.join("triples.nt");
    let truth_path = a.out_dir.join("truth.csv");
    let create = |p: &Path| File::create(p).map(BufWriter::new).map_err(io_err(p));
    write_ntriples(&synth.schema, create(&schema_path)?).map_err(io_err(&schema_path))?;
    let lines = write_ntriples(&synth.instances, create(&triples_path)?).map_err(io_err(&triples_path))?;
    synth.truth.write_csv(create(&truth_path)?).map_err(io_err(&truth_path))?;

    let _ = writeln!(out, "schema={}", schema_path.display());
    let _ = writeln!(out, "triples={} lines={lines}", triples_path.display());
    let _ = writeln!(out, "truth={}", truth_path.display());
    Ok(())
}
