//! Property generalization and deletion from direct-instance support.
//!
//! For a class with `N ≥ 1` direct instances the generalization ratio is
//! `P(N) = 1 / (1 + log10 N)`. A property used by a fraction `≥ P(N)` of
//! those instances gains the class as a domain; a learned domain whose
//! support drops below `deletion_factor · P(N)` is removed again. Domains
//! asserted in the schema are never removed.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::kb::{KnowledgeBase, LookupError, Provenance};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("generalization threshold is undefined for a class without direct instances")]
pub struct UndefinedThreshold;

/// `1 / (1 + log10 n)`.
pub fn generalization_threshold<T: Real>(n: usize) -> Result<T, UndefinedThreshold> {
    if n == 0 {
        return Err(UndefinedThreshold);
    }
    Ok(T::one() / (T::one() + T::from_count(n).log10()))
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("deletion factor must lie in (0, 1], got {0}")]
pub struct InvalidDeletionFactor(pub f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPolicy<T> {
    deletion_factor: T,
}

impl<T: Real> Default for ThresholdPolicy<T> {
    fn default() -> Self {
        ThresholdPolicy {
            deletion_factor: T::lit(0.5),
        }
    }
}

impl<T: Real> ThresholdPolicy<T> {
    pub fn new(deletion_factor: T) -> Result<Self, InvalidDeletionFactor> {
        if !(deletion_factor > T::zero() && deletion_factor <= T::one()) {
            return Err(InvalidDeletionFactor(deletion_factor.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(ThresholdPolicy { deletion_factor })
    }

    pub fn deletion_factor(&self) -> T {
        self.deletion_factor
    }

    pub fn generalization_ratio(&self, n: usize) -> Result<T, UndefinedThreshold> {
        generalization_threshold(n)
    }

    pub fn deletion_ratio(&self, n: usize) -> Result<T, UndefinedThreshold> {
        Ok(self.deletion_factor * generalization_threshold::<T>(n)?)
    }
}

/// Property usage among the direct instances of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportStats<T> {
    pub class: String,
    pub n: usize,
    /// property → (instances using it, fraction of `n`)
    pub per_property: BTreeMap<String, (usize, T)>,
}

impl<T: Real> SupportStats<T> {
    /// Support ratio of a property; `0` for unused properties.
    pub fn ratio(&self, property: &str) -> T {
        self.per_property
            .get(property)
            .map(|(_, r)| *r)
            .unwrap_or_else(T::zero)
    }
}

pub fn property_support<T: Real>(kb: &KnowledgeBase, class: &str) -> Result<SupportStats<T>, LookupError> {
    let direct = kb.direct_instances(class)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for i in direct {
        for p in &kb.instances()[i].properties {
            *counts.entry(p.clone()).or_insert(0) += 1;
        }
    }
    let n = direct.len();
    let per_property = counts
        .into_iter()
        .map(|(p, c)| (p, (c, T::from_count(c) / T::from_count(n))))
        .collect();
    Ok(SupportStats {
        class: class.to_string(),
        n,
        per_property,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DomainAction {
    Added,
    Removed,
}

impl fmt::Display for DomainAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainAction::Added => "added",
            DomainAction::Removed => "removed",
        })
    }
}

/// One domain edit, with the support ratio and threshold that triggered it.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainChange<T> {
    pub class: String,
    pub property: String,
    pub action: DomainAction,
    pub ratio: T,
    pub threshold: T,
}

fn generalize_with<T: Real>(
    kb: &mut KnowledgeBase,
    stats: &SupportStats<T>,
    policy: &ThresholdPolicy<T>,
) -> Vec<DomainChange<T>> {
    let Ok(threshold) = policy.generalization_ratio(stats.n) else {
        return Vec::new();
    };
    let mut changes = Vec::new();
    for (p, (_, ratio)) in &stats.per_property {
        if *ratio >= threshold
            && kb
                .add_domain(p, &stats.class, Provenance::Generalized)
                .expect("property and class exist")
        {
            changes.push(DomainChange {
                class: stats.class.clone(),
                property: p.clone(),
                action: DomainAction::Added,
                ratio: *ratio,
                threshold,
            });
        }
    }
    changes
}

fn delete_with<T: Real>(
    kb: &mut KnowledgeBase,
    stats: &SupportStats<T>,
    policy: &ThresholdPolicy<T>,
) -> Vec<DomainChange<T>> {
    let Ok(threshold) = policy.deletion_ratio(stats.n) else {
        return Vec::new();
    };
    let learned: Vec<String> = kb
        .properties()
        .iter()
        .filter(|(_, rec)| rec.domains.get(&stats.class) == Some(&Provenance::Generalized))
        .map(|(p, _)| p.clone())
        .collect();
    let mut changes = Vec::new();
    for p in learned {
        let ratio = stats.ratio(&p);
        if ratio < threshold {
            kb.remove_domain(&p, &stats.class).expect("property exists");
            changes.push(DomainChange {
                class: stats.class.clone(),
                property: p,
                action: DomainAction::Removed,
                ratio,
                threshold,
            });
        }
    }
    changes
}

/// Adds `class` to the domains of every property whose support ratio
/// reaches `P(N)`. No-op for a class without direct instances.
pub fn generalize_properties<T: Real>(
    kb: &mut KnowledgeBase,
    class: &str,
    policy: &ThresholdPolicy<T>,
) -> Result<Vec<DomainChange<T>>, LookupError> {
    let stats = property_support(kb, class)?;
    Ok(generalize_with(kb, &stats, policy))
}

/// Removes learned domains of `class` whose support ratio is below
/// `deletion_factor · P(N)`. No-op for a class without direct instances.
pub fn delete_properties<T: Real>(
    kb: &mut KnowledgeBase,
    class: &str,
    policy: &ThresholdPolicy<T>,
) -> Result<Vec<DomainChange<T>>, LookupError> {
    let stats = property_support(kb, class)?;
    Ok(delete_with(kb, &stats, policy))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deletion {
    Enabled,
    Disabled,
}

/// Visits classes leaf-first and, for each class with direct instances,
/// generalizes then deletes.
pub fn run_generalization_pass<T: Real>(
    kb: &mut KnowledgeBase,
    policy: &ThresholdPolicy<T>,
    deletion: Deletion,
) -> Vec<DomainChange<T>> {
    let order: Vec<String> = kb.leaf_first_order().into_iter().map(String::from).collect();
    let mut changes = Vec::new();
    for class in order {
        let stats = property_support::<T>(kb, &class).expect("class from traversal exists");
        if stats.n == 0 {
            continue;
        }
        changes.extend(generalize_with(kb, &stats, policy));
        if deletion == Deletion::Enabled {
            changes.extend(delete_with(kb, &stats, policy));
        }
    }
    changes
}
