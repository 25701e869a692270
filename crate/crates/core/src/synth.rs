//! Synthetic knowledge bases with planted class signatures, and
//! type-recovery accuracy against the known ground truth.
//!
//! The generated ontology is two levels deep: the root and `class_count`
//! leaf classes. Every class owns `signature_properties_per_class`
//! properties whose only domain is that class; `shared_properties` more
//! properties have every leaf class as a domain. Instances carry each of
//! their class's signature properties with probability `1 - noise_rate` and
//! each shared property with probability [`SHARED_CARRY_PROBABILITY`].

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::evolution::{evolve, EvolutionConfig, EvolutionReport, EvolveError};
use crate::kb::{KnowledgeBase, SchemaError, Vocabulary, OWL_CLASS, RDFS_DOMAIN, RDFS_SUBCLASS_OF, RDF_PROPERTY, RDF_TYPE};
use crate::ntriples::{Term, Triple};
use crate::scalar::Real;

pub const SHARED_CARRY_PROBABILITY: f64 = 0.9;
pub const BASE_IRI: &str = "http://example.org/synth/";
/// Label used for unclassified predictions in confusion counts.
pub const UNCLASSIFIED: &str = "Unclassified";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub class_count: usize,
    pub signature_properties_per_class: usize,
    pub shared_properties: usize,
    pub instances_per_class: usize,
    pub hidden_type_fraction: f64,
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            class_count: 20,
            signature_properties_per_class: 5,
            shared_properties: 3,
            instances_per_class: 50,
            hidden_type_fraction: 0.5,
            noise_rate: 0.1,
            seed: 42,
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Config(String),
    #[error("instance {0} is in the ground truth but missing from the knowledge base")]
    Consistency(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("evolution failed: {0}")]
    Evolve(String),
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let counts = [
            ("class_count", self.class_count),
            ("signature_properties_per_class", self.signature_properties_per_class),
            ("instances_per_class", self.instances_per_class),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(SynthError::Config(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..=1.0).contains(&self.hidden_type_fraction) {
            return Err(SynthError::Config(format!(
                "hidden_type_fraction must lie in [0, 1], got {}",
                self.hidden_type_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(SynthError::Config(format!(
                "noise_rate must lie in [0, 1), got {}",
                self.noise_rate
            )));
        }
        Ok(())
    }

    pub fn instance_count(&self) -> usize {
        self.class_count * self.instances_per_class
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthEntry {
    pub class: String,
    /// The instance's `rdf:type` statement was withheld.
    pub hidden: bool,
    /// Number of properties the instance was generated with.
    pub property_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub instances: BTreeMap<String, TruthEntry>,
    pub signatures: BTreeMap<String, BTreeSet<String>>,
}

impl GroundTruth {
    /// Writes `instance,true_class` rows in instance order.
    pub fn write_csv<W: Write>(&self, sink: W) -> io::Result<usize> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["instance", "true_class"])?;
        for (i, e) in &self.instances {
            w.write_record([i.as_str(), e.class.as_str()])?;
        }
        w.flush()?;
        Ok(self.instances.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthKb {
    pub schema: Vec<Triple>,
    pub instances: Vec<Triple>,
    pub truth: GroundTruth,
}

fn width(n: usize) -> usize {
    n.saturating_sub(1).to_string().len()
}

fn iri(s: String) -> Term {
    Term::Iri(s)
}

fn triple(s: Term, p: &str, o: Term) -> Triple {
    Triple::new(s, iri(p.to_string()), o).expect("generated statements are well-formed")
}

pub fn class_iri(spec: &SynthSpec, c: usize) -> String {
    format!("{BASE_IRI}class/C{:0w$}", c, w = width(spec.class_count))
}

/// Generates schema statements, instance statements and ground truth.
/// Output is fully determined by `spec` (including `seed`).
pub fn generate_kb(spec: &SynthSpec) -> Result<SynthKb, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cw = width(spec.class_count);
    let sw = width(spec.signature_properties_per_class);
    let iw = width(spec.instances_per_class);
    let xw = width(spec.shared_properties);
    let thing = Vocabulary::default().thing;

    let classes: Vec<String> = (0..spec.class_count).map(|c| class_iri(spec, c)).collect();
    let shared: Vec<String> = (0..spec.shared_properties)
        .map(|k| format!("{BASE_IRI}property/shared{k:0xw$}"))
        .collect();
    let mut truth = GroundTruth::default();

    let mut schema = Vec::new();
    for (c, class) in classes.iter().enumerate() {
        schema.push(triple(iri(class.clone()), RDFS_SUBCLASS_OF, iri(thing.clone())));
        schema.push(triple(iri(class.clone()), RDF_TYPE, iri(OWL_CLASS.into())));
        let sig: BTreeSet<String> = (0..spec.signature_properties_per_class)
            .map(|k| format!("{BASE_IRI}property/c{c:0cw$}_sig{k:0sw$}"))
            .collect();
        for p in &sig {
            schema.push(triple(iri(p.clone()), RDF_TYPE, iri(RDF_PROPERTY.into())));
            schema.push(triple(iri(p.clone()), RDFS_DOMAIN, iri(class.clone())));
        }
        truth.signatures.insert(class.clone(), sig);
    }
    for p in &shared {
        schema.push(triple(iri(p.clone()), RDF_TYPE, iri(RDF_PROPERTY.into())));
        for class in &classes {
            schema.push(triple(iri(p.clone()), RDFS_DOMAIN, iri(class.clone())));
        }
    }

    // Property draws happen in (class, instance) order; hiding and emission
    // order are drawn afterwards from the same stream.
    let mut generated: Vec<(String, usize, Vec<Triple>)> = Vec::with_capacity(spec.instance_count());
    for (c, class) in classes.iter().enumerate() {
        for i in 0..spec.instances_per_class {
            let inst = format!("{BASE_IRI}resource/c{c:0cw$}_i{i:0iw$}");
            let mut facts = Vec::new();
            for p in &truth.signatures[class] {
                if rng.gen::<f64>() >= spec.noise_rate {
                    let local = p.rsplit('/').next().unwrap_or(p);
                    let value = format!("{} {local}", inst.rsplit('/').next().unwrap_or(&inst));
                    facts.push(triple(iri(inst.clone()), p, Term::literal(value)));
                }
            }
            for (k, p) in shared.iter().enumerate() {
                if rng.gen_bool(SHARED_CARRY_PROBABILITY) {
                    let object = format!("{BASE_IRI}resource/shared_value{k:0xw$}");
                    facts.push(triple(iri(inst.clone()), p, iri(object)));
                }
            }
            generated.push((inst, c, facts));
        }
    }

    let total = generated.len();
    let hidden_count = ((spec.hidden_type_fraction * total as f64).round() as usize).min(total);
    let hidden: BTreeSet<usize> = index::sample(&mut rng, total, hidden_count).into_iter().collect();
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);

    let mut instances = Vec::new();
    for idx in order {
        let (inst, c, facts) = &generated[idx];
        let is_hidden = hidden.contains(&idx);
        if !is_hidden {
            instances.push(triple(iri(inst.clone()), RDF_TYPE, iri(classes[*c].clone())));
        }
        instances.extend(facts.iter().cloned());
        truth.instances.insert(
            inst.clone(),
            TruthEntry {
                class: classes[*c].clone(),
                hidden: is_hidden,
                property_count: facts.len(),
            },
        );
    }

    Ok(SynthKb {
        schema,
        instances,
        truth,
    })
}

/// Serializes statements one per line.
pub fn write_ntriples<W: Write>(triples: &[Triple], mut sink: W) -> io::Result<usize> {
    for t in triples {
        writeln!(sink, "{t}")?;
    }
    sink.flush()?;
    Ok(triples.len())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Accuracy {
    /// Hidden-type instances with at least one property.
    pub evaluated: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// (true class, predicted class or [`UNCLASSIFIED`]) → count
    pub confusion: BTreeMap<(String, String), usize>,
}

/// Fraction of hidden-type instances (with at least one property) whose
/// working type equals their true class.
pub fn evaluate_accuracy(kb: &KnowledgeBase, truth: &GroundTruth) -> Result<Accuracy, SynthError> {
    let mut acc = Accuracy::default();
    for (inst, entry) in &truth.instances {
        if !entry.hidden || entry.property_count == 0 {
            continue;
        }
        let rec = kb
            .instances()
            .get(inst)
            .ok_or_else(|| SynthError::Consistency(inst.clone()))?;
        if rec.properties.is_empty() {
            continue;
        }
        acc.evaluated += 1;
        let predicted = rec.assigned_type.clone().unwrap_or_else(|| UNCLASSIFIED.to_string());
        if predicted == entry.class {
            acc.correct += 1;
        }
        *acc.confusion.entry((entry.class.clone(), predicted)).or_insert(0) += 1;
    }
    acc.accuracy = if acc.evaluated == 0 {
        0.0
    } else {
        acc.correct as f64 / acc.evaluated as f64
    };
    Ok(acc)
}

/// Loads the generated schema, streams the instance statements through
/// [`evolve`] and scores the result.
pub fn evolve_and_evaluate<T: Real>(
    synth: &SynthKb,
    config: &EvolutionConfig<T>,
) -> Result<(KnowledgeBase, EvolutionReport<T>, Accuracy), SynthError> {
    let (mut kb, rest) = KnowledgeBase::load_schema(synth.schema.clone(), Vocabulary::default())?;
    kb.add_instance_triples(&rest);
    let mut text = Vec::new();
    write_ntriples(&synth.instances, &mut text).expect("writing to memory");
    let report = evolve(&mut kb, &text[..], config).map_err(|e: EvolveError<T>| SynthError::Evolve(e.to_string()))?;
    let acc = evaluate_accuracy(&kb, &synth.truth)?;
    Ok((kb, report, acc))
}
