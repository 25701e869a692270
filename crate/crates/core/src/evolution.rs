//! The evolution cycle: ingest a batch, generalize leaf-first, re-type
//! instances, repeat until the batch settles, then move to the next batch.

use std::io::{self, BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generalization::{run_generalization_pass, Deletion, DomainChange, ThresholdPolicy};
use crate::kb::KnowledgeBase;
use crate::ntriples::{BatchReader, ParseReport};
use crate::scalar::{Ratio, Real};
use crate::typing::{apply_decisions, decide_types, Method, TypingDecision};

pub const DEFAULT_BATCH_LINES: usize = 50_000;
pub const DEFAULT_MAX_INNER_ROUNDS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig<T> {
    pub batch_lines: usize,
    pub method: Method,
    pub max_inner_rounds: usize,
    pub policy: ThresholdPolicy<T>,
    pub deletion_enabled: bool,
}

impl<T: Real> Default for EvolutionConfig<T> {
    fn default() -> Self {
        EvolutionConfig {
            batch_lines: DEFAULT_BATCH_LINES,
            method: Method::Pfidf,
            max_inner_rounds: DEFAULT_MAX_INNER_ROUNDS,
            policy: ThresholdPolicy::default(),
            deletion_enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("batch_lines must be at least 1")]
    ZeroBatchLines,
    #[error("max_inner_rounds must be at least 1")]
    ZeroInnerRounds,
}

impl<T: Real> EvolutionConfig<T> {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.batch_lines == 0 {
            return Err(ConfigError::ZeroBatchLines);
        }
        if self.max_inner_rounds == 0 {
            return Err(ConfigError::ZeroInnerRounds);
        }
        Ok(())
    }

    fn deletion(&self) -> Deletion {
        if self.deletion_enabled {
            Deletion::Enabled
        } else {
            Deletion::Disabled
        }
    }
}

/// Coverage metrics after one batch. Field order is the CSV column order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub triples_added: usize,
    pub instances_total: usize,
    pub instances_with_properties: usize,
    pub instances_classified: usize,
    pub instances_placeholder: usize,
    pub properties_total: usize,
    pub properties_with_domain: usize,
    pub type_changes: usize,
    pub domain_changes: usize,
}

pub const REPORT_COLUMNS: [&str; 10] = [
    "iteration",
    "triples_added",
    "instances_total",
    "instances_with_properties",
    "instances_classified",
    "instances_placeholder",
    "properties_total",
    "properties_with_domain",
    "type_changes",
    "domain_changes",
];

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionReport<T> {
    /// One record per non-empty batch, in order.
    pub records: Vec<IterationRecord>,
    /// Line accounting summed over all consumed batches.
    pub parse: ParseReport,
    pub classified_ratio: Ratio<T>,
    pub property_domain_ratio: Ratio<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Coverage {
    pub instances_total: usize,
    pub with_properties: usize,
    /// All instances holding a type, including property-less ones typed by assertion.
    pub classified: usize,
    pub classified_with_properties: usize,
    pub placeholder: usize,
}

impl Coverage {
    /// Classified share of the instances that have at least one property.
    pub fn classified_ratio<T: Real>(&self) -> Ratio<T> {
        Ratio::of(self.classified_with_properties, self.with_properties)
    }
}

pub fn classification_coverage(kb: &KnowledgeBase) -> Coverage {
    let mut c = Coverage::default();
    for rec in kb.instances().values() {
        c.instances_total += 1;
        let has_props = !rec.properties.is_empty();
        if has_props {
            c.with_properties += 1;
        }
        if rec.is_classified() {
            c.classified += 1;
            if has_props {
                c.classified_with_properties += 1;
            }
        }
        if rec.placeholder {
            c.placeholder += 1;
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PropertyCoverage {
    pub properties_total: usize,
    pub with_domain: usize,
}

impl PropertyCoverage {
    pub fn ratio<T: Real>(&self) -> Ratio<T> {
        Ratio::of(self.with_domain, self.properties_total)
    }
}

pub fn property_domain_ratio(kb: &KnowledgeBase) -> PropertyCoverage {
    PropertyCoverage {
        properties_total: kb.properties().len(),
        with_domain: kb.properties().values().filter(|p| !p.domains.is_empty()).count(),
    }
}

/// Receives every typing decision and domain change made during
/// [`evolve_with_audit`]. `iteration` and `round` are 1-based.
pub trait AuditSink<T> {
    fn decisions(&mut self, _iteration: usize, _round: usize, _decisions: &[TypingDecision<T>]) -> io::Result<()> {
        Ok(())
    }

    fn domain_changes(&mut self, _iteration: usize, _round: usize, _changes: &[DomainChange<T>]) -> io::Result<()> {
        Ok(())
    }
}

impl<T> AuditSink<T> for () {}

#[derive(Debug, Error)]
pub enum EvolveError<T: std::fmt::Debug> {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    /// The source or an audit sink failed; `report` covers every batch that
    /// completed before the failure.
    #[error("I/O failure after {} completed batches: {source}", .report.records.len())]
    Io {
        report: EvolutionReport<T>,
        #[source]
        source: io::Error,
    },
}

/// Outcome of settling the knowledge base after a batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CycleOutcome {
    pub rounds: usize,
    pub type_changes: usize,
    pub domain_changes: usize,
}

/// Alternates a generalization pass and a typing pass until a round makes
/// no change or `max_inner_rounds` is reached.
pub fn run_cycle<T: Real>(
    kb: &mut KnowledgeBase,
    config: &EvolutionConfig<T>,
    iteration: usize,
    audit: &mut dyn AuditSink<T>,
) -> io::Result<CycleOutcome> {
    let mut out = CycleOutcome::default();
    for round in 1..=config.max_inner_rounds {
        let changes = run_generalization_pass(kb, &config.policy, config.deletion());
        let decisions = decide_types::<T>(kb, config.method);
        let type_changes = apply_decisions(kb, &decisions);
        audit.domain_changes(iteration, round, &changes)?;
        audit.decisions(iteration, round, &decisions)?;
        out.rounds = round;
        out.type_changes += type_changes;
        out.domain_changes += changes.len();
        if changes.is_empty() && type_changes == 0 {
            break;
        }
    }
    Ok(out)
}

pub fn evolve<T: Real, R: BufRead>(
    kb: &mut KnowledgeBase,
    source: R,
    config: &EvolutionConfig<T>,
) -> Result<EvolutionReport<T>, EvolveError<T>> {
    evolve_with_audit(kb, source, config, &mut ())
}

/// Runs the evolution cycle over every batch of `source`. The knowledge base
/// is left in its final state; persisting it is up to the caller.
pub fn evolve_with_audit<T: Real, R: BufRead>(
    kb: &mut KnowledgeBase,
    source: R,
    config: &EvolutionConfig<T>,
    audit: &mut dyn AuditSink<T>,
) -> Result<EvolutionReport<T>, EvolveError<T>> {
    config.validate()?;
    let mut reader = BatchReader::new(source);
    let mut records = Vec::new();
    let mut parse = ParseReport::default();

    let finish = |kb: &KnowledgeBase, records: Vec<IterationRecord>, parse: ParseReport| EvolutionReport {
        records,
        parse,
        classified_ratio: classification_coverage(kb).classified_ratio(),
        property_domain_ratio: property_domain_ratio(kb).ratio(),
    };

    loop {
        let (triples, batch_report) = match reader.read_batch(config.batch_lines) {
            Ok(b) => b,
            Err(source) => {
                return Err(EvolveError::Io {
                    report: finish(kb, records, parse),
                    source,
                })
            }
        };
        if batch_report.lines_read == 0 {
            break;
        }
        let iteration = records.len() + 1;
        parse.merge(batch_report);
        kb.add_instance_triples(&triples);
        let outcome = match run_cycle(kb, config, iteration, audit) {
            Ok(o) => o,
            Err(source) => {
                return Err(EvolveError::Io {
                    report: finish(kb, records, parse),
                    source,
                })
            }
        };
        let cov = classification_coverage(kb);
        let props = property_domain_ratio(kb);
        records.push(IterationRecord {
            iteration,
            triples_added: triples.len(),
            instances_total: cov.instances_total,
            instances_with_properties: cov.with_properties,
            instances_classified: cov.classified,
            instances_placeholder: cov.placeholder,
            properties_total: props.properties_total,
            properties_with_domain: props.with_domain,
            type_changes: outcome.type_changes,
            domain_changes: outcome.domain_changes,
        });
    }
    Ok(finish(kb, records, parse))
}

/// Writes the per-batch series as CSV (header plus one row per record) and
/// returns the number of data rows.
pub fn write_report<W: Write>(records: &[IterationRecord], sink: W) -> io::Result<usize> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(REPORT_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(records.len())
}

pub fn read_report<R: Read>(source: R) -> Result<Vec<IterationRecord>, csv::Error> {
    csv::Reader::from_reader(source).deserialize().collect()
}
