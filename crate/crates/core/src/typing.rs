//! Instance type inference from property domains.
//!
//! Three scorers rank candidate classes for an instance:
//!
//! * [`Method::Naive`] counts (property, domain) pairs per class;
//! * [`Method::Cosine`] is the cosine between the binary instance-property
//!   row and the binary type-property row;
//! * [`Method::Pfidf`] is the same cosine with the type-property row
//!   reweighted by inverse domain frequency `ln(C / df(p))`, where `C` is the
//!   number of non-root classes and `df(p)` the number of non-root classes in
//!   the property's domains. The instance side stays binary.
//!
//! The root class stands for "unclassified" and is never a candidate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::kb::{InstanceRecord, KnowledgeBase, LookupError};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Naive,
    Cosine,
    Pfidf,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Naive, Method::Cosine, Method::Pfidf];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Cosine => "cosine",
            Method::Pfidf => "pfidf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Method::Naive),
            "cosine" => Ok(Method::Cosine),
            "pfidf" => Ok(Method::Pfidf),
            other => Err(format!("unknown method {other:?} (expected naive, cosine or pfidf)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Binary,
    Pfidf,
}

/// Per-class count of (property, domain) pairs contributed by one instance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DomainCountTable {
    pub entries: BTreeMap<String, usize>,
}

impl DomainCountTable {
    pub fn total(&self) -> usize {
        self.entries.values().sum()
    }

    pub fn get(&self, class: &str) -> usize {
        self.entries.get(class).copied().unwrap_or(0)
    }

    /// Entries sorted by descending count, then IRI.
    pub fn ranked(&self) -> Vec<(&str, usize)> {
        let mut v: Vec<_> = self.entries.iter().map(|(c, n)| (c.as_str(), *n)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        v
    }
}

pub fn domain_frequency(kb: &KnowledgeBase, instance: &str) -> Result<DomainCountTable, LookupError> {
    let rec = kb.instance(instance)?;
    Ok(count_domains(kb, rec))
}

fn count_domains(kb: &KnowledgeBase, rec: &InstanceRecord) -> DomainCountTable {
    let mut table = DomainCountTable::default();
    for p in &rec.properties {
        if let Some(prop) = kb.properties().get(p) {
            for d in prop.domains.keys() {
                *table.entries.entry(d.clone()).or_insert(0) += 1;
            }
        }
    }
    table
}

/// A sparse non-negative vector over property IRIs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector<T> {
    pub weights: BTreeMap<String, T>,
}

impl<T: Real> SparseVector<T> {
    pub fn binary<I, S>(support: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SparseVector {
            weights: support.into_iter().map(|p| (p.into(), T::one())).collect(),
        }
    }

    pub fn norm_squared(&self) -> T {
        self.weights.values().fold(T::zero(), |acc, w| acc + *w * *w)
    }

    pub fn dot(&self, other: &SparseVector<T>) -> T {
        let (small, large) = if self.weights.len() <= other.weights.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .weights
            .iter()
            .filter_map(|(p, w)| large.weights.get(p).map(|v| *w * *v))
            .fold(T::zero(), |acc, x| acc + x)
    }

    /// Cosine similarity; `0` when either vector has zero norm.
    pub fn cosine(&self, other: &SparseVector<T>) -> T {
        let denom_sq = self.norm_squared() * other.norm_squared();
        if denom_sq <= T::zero() {
            return T::zero();
        }
        // sqrt(|a|²·|b|²) keeps identical vectors at exactly 1.
        let c = self.dot(other) / denom_sq.sqrt();
        c.max(T::zero()).min(T::one())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeProfile<T> {
    pub class: String,
    pub weighting: Weighting,
    pub vector: SparseVector<T>,
}

/// Binary row of the instance-property matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceProfile {
    pub instance: String,
    pub support: BTreeSet<String>,
}

impl InstanceProfile {
    pub fn vector<T: Real>(&self) -> SparseVector<T> {
        SparseVector::binary(self.support.iter().cloned())
    }
}

/// `ln(class_count / df)`, undefined when `df` is zero.
pub fn idf<T: Real>(class_count: usize, df: usize) -> Option<T> {
    if df == 0 || class_count == 0 {
        return None;
    }
    Some((T::from_count(class_count) / T::from_count(df)).ln())
}

fn candidate_class_count(kb: &KnowledgeBase) -> usize {
    kb.classes().len() - 1
}

fn non_root_df(kb: &KnowledgeBase, domains: &BTreeMap<String, crate::kb::Provenance>) -> usize {
    domains.keys().filter(|d| d.as_str() != kb.root()).count()
}

/// Inverse domain frequency of a property; `None` for properties without a
/// (non-root) domain, which take no part in any type profile.
pub fn idf_weight<T: Real>(kb: &KnowledgeBase, property: &str) -> Result<Option<T>, LookupError> {
    let rec = kb.property(property)?;
    Ok(idf(candidate_class_count(kb), non_root_df(kb, &rec.domains)))
}

pub fn build_type_profile<T: Real>(
    kb: &KnowledgeBase,
    class: &str,
    weighting: Weighting,
) -> Result<TypeProfile<T>, LookupError> {
    kb.class(class)?;
    let c = candidate_class_count(kb);
    let mut weights = BTreeMap::new();
    for (p, rec) in kb.properties() {
        if !rec.has_domain(class) {
            continue;
        }
        let w = match weighting {
            Weighting::Binary => T::one(),
            Weighting::Pfidf => match idf::<T>(c, non_root_df(kb, &rec.domains)) {
                Some(w) => w,
                None => continue,
            },
        };
        if w > T::zero() {
            weights.insert(p.clone(), w);
        }
    }
    Ok(TypeProfile {
        class: class.to_string(),
        weighting,
        vector: SparseVector { weights },
    })
}

/// All non-root type profiles, built in one sweep over the property table.
fn build_all_type_profiles<T: Real>(
    kb: &KnowledgeBase,
    weighting: Weighting,
) -> BTreeMap<String, TypeProfile<T>> {
    let c = candidate_class_count(kb);
    let mut out: BTreeMap<String, TypeProfile<T>> = BTreeMap::new();
    for (p, rec) in kb.properties() {
        let w = match weighting {
            Weighting::Binary => T::one(),
            Weighting::Pfidf => match idf::<T>(c, non_root_df(kb, &rec.domains)) {
                Some(w) => w,
                None => continue,
            },
        };
        if w <= T::zero() {
            continue;
        }
        for d in rec.domains.keys().filter(|d| d.as_str() != kb.root()) {
            out.entry(d.clone())
                .or_insert_with(|| TypeProfile {
                    class: d.clone(),
                    weighting,
                    vector: SparseVector::default(),
                })
                .vector
                .weights
                .insert(p.clone(), w);
        }
    }
    out
}

pub fn build_instance_profile(kb: &KnowledgeBase, instance: &str) -> Result<InstanceProfile, LookupError> {
    let rec = kb.instance(instance)?;
    Ok(InstanceProfile {
        instance: instance.to_string(),
        support: rec.properties.clone(),
    })
}

pub fn cosine_score<T: Real>(type_profile: &TypeProfile<T>, instance_profile: &InstanceProfile) -> T {
    type_profile.vector.cosine(&instance_profile.vector())
}

pub fn pfidf_score<T: Real>(kb: &KnowledgeBase, instance: &str, class: &str) -> Result<T, LookupError> {
    let tp = build_type_profile::<T>(kb, class, Weighting::Pfidf)?;
    let ip = build_instance_profile(kb, instance)?;
    Ok(cosine_score(&tp, &ip))
}

/// Outcome of scoring one instance. `None` stands for unclassified.
#[derive(Debug, Clone, PartialEq)]
pub struct TypingDecision<T> {
    pub instance: String,
    pub previous: Option<String>,
    pub chosen: Option<String>,
    /// Score of `chosen` under `method` (`0` when unclassified).
    pub score: T,
    pub method: Method,
}

impl<T> TypingDecision<T> {
    pub fn changed(&self) -> bool {
        self.previous != self.chosen
    }
}

/// Argmax of [`domain_frequency`], ties broken towards the deeper class and
/// then the lexicographically smaller IRI. No evidence keeps the previous
/// type. The score is the winning count over the total pair count.
pub fn naive_assign<T: Real>(kb: &KnowledgeBase, instance: &str) -> Result<TypingDecision<T>, LookupError> {
    let rec = kb.instance(instance)?;
    let scorer = Scorer::<T>::new(kb, Method::Naive);
    let previous = rec.assigned_type.clone();
    Ok(match scorer.best(rec) {
        Some((class, score)) => TypingDecision {
            instance: instance.to_string(),
            previous,
            chosen: Some(class.to_string()),
            score,
            method: Method::Naive,
        },
        None => TypingDecision {
            instance: instance.to_string(),
            chosen: previous.clone(),
            score: previous
                .as_deref()
                .map(|c| scorer.score(rec, c))
                .unwrap_or_else(T::zero),
            previous,
            method: Method::Naive,
        },
    })
}

/// Read-only scoring state for one typing pass over a frozen knowledge base.
pub struct Scorer<'a, T> {
    kb: &'a KnowledgeBase,
    method: Method,
    depths: BTreeMap<&'a str, usize>,
    profiles: BTreeMap<String, TypeProfile<T>>,
}

impl<'a, T: Real> Scorer<'a, T> {
    pub fn new(kb: &'a KnowledgeBase, method: Method) -> Self {
        let profiles = match method {
            Method::Naive => BTreeMap::new(),
            Method::Cosine => build_all_type_profiles(kb, Weighting::Binary),
            Method::Pfidf => build_all_type_profiles(kb, Weighting::Pfidf),
        };
        Scorer {
            kb,
            method,
            depths: kb.depths(),
            profiles,
        }
    }

    /// Non-root classes appearing in the domains of the instance's
    /// properties. Every other class scores zero under all three methods.
    fn candidates(&self, rec: &InstanceRecord) -> BTreeSet<&'a str> {
        let root = self.kb.root();
        rec.properties
            .iter()
            .filter_map(|p| self.kb.properties().get(p))
            .flat_map(|prop| prop.domains.keys().map(String::as_str))
            .filter(|d| *d != root)
            .collect()
    }

    pub fn has_evidence(&self, rec: &InstanceRecord) -> bool {
        !self.candidates(rec).is_empty()
    }

    pub fn score(&self, rec: &InstanceRecord, class: &str) -> T {
        match self.method {
            Method::Naive => {
                let table = count_domains(self.kb, rec);
                let total = table.total();
                if total == 0 {
                    T::zero()
                } else {
                    T::from_count(table.get(class)) / T::from_count(total)
                }
            }
            Method::Cosine | Method::Pfidf => match self.profiles.get(class) {
                Some(tp) => tp.vector.cosine(&SparseVector::binary(rec.properties.iter().cloned())),
                None => T::zero(),
            },
        }
    }

    /// Highest-scoring candidate; ties go to the deeper class, then the
    /// lexicographically smaller IRI. `None` when there is no evidence.
    pub fn best(&self, rec: &InstanceRecord) -> Option<(&'a str, T)> {
        let candidates = self.candidates(rec);
        let scored: Vec<(&'a str, T)> = match self.method {
            Method::Naive => {
                let table = count_domains(self.kb, rec);
                let total = T::from_count(table.total());
                candidates
                    .into_iter()
                    .map(|c| (c, T::from_count(table.get(c)) / total))
                    .collect()
            }
            Method::Cosine | Method::Pfidf => {
                let iv = SparseVector::binary(rec.properties.iter().cloned());
                candidates
                    .into_iter()
                    .map(|c| {
                        let s = self
                            .profiles
                            .get(c)
                            .map(|tp| tp.vector.cosine(&iv))
                            .unwrap_or_else(T::zero);
                        (c, s)
                    })
                    .collect()
            }
        };
        let depth = |c: &str| self.depths.get(c).copied().unwrap_or(0);
        scored.into_iter().fold(None, |best, (c, s)| match best {
            None => Some((c, s)),
            Some((bc, bs)) => {
                let better = s > bs || (s == bs && (depth(c), std::cmp::Reverse(c)) > (depth(bc), std::cmp::Reverse(bc)));
                if better {
                    Some((c, s))
                } else {
                    Some((bc, bs))
                }
            }
        })
    }

    /// Applies the reassignment rule to one instance: an unclassified
    /// instance takes the best class if it scores above zero; a classified
    /// one moves only on a strictly higher score than its current class.
    pub fn decide(&self, instance: &str, rec: &InstanceRecord) -> TypingDecision<T> {
        let previous = rec.assigned_type.clone();
        let keep = |score: T| TypingDecision {
            instance: instance.to_string(),
            previous: previous.clone(),
            chosen: previous.clone(),
            score,
            method: self.method,
        };
        let Some((best, best_score)) = self.best(rec) else {
            return keep(T::zero());
        };
        let reassign = match &previous {
            None => best_score > T::zero(),
            Some(prev) => best_score > self.score(rec, prev),
        };
        if reassign {
            TypingDecision {
                instance: instance.to_string(),
                previous: previous.clone(),
                chosen: Some(best.to_string()),
                score: best_score,
                method: self.method,
            }
        } else {
            let s = previous.as_deref().map(|p| self.score(rec, p)).unwrap_or_else(T::zero);
            keep(s)
        }
    }
}

/// Scores every non-placeholder instance against the current knowledge base
/// without modifying it. Decisions come back in instance IRI order.
pub fn decide_types<T: Real>(kb: &KnowledgeBase, method: Method) -> Vec<TypingDecision<T>> {
    let scorer = Scorer::<T>::new(kb, method);
    let instances: Vec<(&String, &InstanceRecord)> =
        kb.instances().iter().filter(|(_, r)| !r.placeholder).collect();
    instances
        .par_iter()
        .map(|(i, rec)| scorer.decide(i, rec))
        .collect()
}

/// Applies decisions in order; returns the number of type changes.
pub fn apply_decisions<T>(kb: &mut KnowledgeBase, decisions: &[TypingDecision<T>]) -> usize {
    let mut changes = 0;
    for d in decisions.iter().filter(|d| d.changed()) {
        kb.set_type(&d.instance, d.chosen.clone())
            .expect("decision refers to existing instance and class");
        changes += 1;
    }
    changes
}

/// One typing pass: decisions are computed against the knowledge base as it
/// stood before the pass, then applied.
pub fn assign_types<T: Real>(kb: &mut KnowledgeBase, method: Method) -> Vec<TypingDecision<T>> {
    let decisions = decide_types(kb, method);
    apply_decisions(kb, &decisions);
    decisions
}
