//! In-memory knowledge base: a single-rooted class tree, the
//! property→domain table, instance records and the direct-instance index.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use thiserror::Error;

use crate::ntriples::{Term, Triple};

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDF_PROPERTY: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#Property";
pub const RDFS_SUBCLASS_OF: &str = "http://www.w3.org/2000/01/rdf-schema#subClassOf";
pub const RDFS_DOMAIN: &str = "http://www.w3.org/2000/01/rdf-schema#domain";
pub const RDFS_CLASS: &str = "http://www.w3.org/2000/01/rdf-schema#Class";
pub const OWL_THING: &str = "http://www.w3.org/2002/07/owl#Thing";
pub const OWL_CLASS: &str = "http://www.w3.org/2002/07/owl#Class";
pub const OWL_OBJECT_PROPERTY: &str = "http://www.w3.org/2002/07/owl#ObjectProperty";
pub const OWL_DATATYPE_PROPERTY: &str = "http://www.w3.org/2002/07/owl#DatatypeProperty";
/// Marks a property domain that was learned from instance data rather than
/// asserted in the schema. Snapshots carry it next to the `rdfs:domain`
/// statement so provenance survives export and reload.
pub const GENERALIZED_DOMAIN: &str = "urn:kbevolve:generalizedDomain";

/// The well-known IRIs the knowledge base interprets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub rdf_type: String,
    pub sub_class_of: String,
    pub domain: String,
    /// Root of the class tree; instances typed to it count as unclassified.
    pub thing: String,
    /// `rdf:type` objects that declare a class. The first one is used on export.
    pub class_markers: Vec<String>,
    /// `rdf:type` objects that declare a property. The first one is used on export.
    pub property_markers: Vec<String>,
    pub generalized_domain: String,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            rdf_type: RDF_TYPE.into(),
            sub_class_of: RDFS_SUBCLASS_OF.into(),
            domain: RDFS_DOMAIN.into(),
            thing: OWL_THING.into(),
            class_markers: vec![OWL_CLASS.into(), RDFS_CLASS.into()],
            property_markers: vec![
                RDF_PROPERTY.into(),
                OWL_OBJECT_PROPERTY.into(),
                OWL_DATATYPE_PROPERTY.into(),
            ],
            generalized_domain: GENERALIZED_DOMAIN.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassNode {
    pub parent: Option<String>,
    pub children: BTreeSet<String>,
}

/// Where a property domain came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    Schema,
    Generalized,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PropertyRecord {
    pub domains: BTreeMap<String, Provenance>,
}

impl PropertyRecord {
    pub fn has_domain(&self, class: &str) -> bool {
        self.domains.contains_key(class)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InstanceRecord {
    /// `None` is the unclassified state.
    pub assigned_type: Option<String>,
    /// Predicates the instance uses as subject (set semantics).
    pub properties: BTreeSet<String>,
    /// The (predicate, object) statements behind `properties`.
    pub facts: BTreeSet<(String, Term)>,
    /// Created only as the object of some statement and never seen as a subject.
    pub placeholder: bool,
}

impl InstanceRecord {
    pub fn is_classified(&self) -> bool {
        self.assigned_type.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("subClassOf cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("class {class} has multiple parents: {}", .parents.join(", "))]
    MultipleParents { class: String, parents: Vec<String> },
    #[error("root class cannot have a parent (found {0})")]
    RootHasParent(String),
    #[error("schema statement with a non-IRI term: {0}")]
    NonIriTerm(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("unknown class {0}")]
    UnknownClass(String),
    #[error("unknown property {0}")]
    UnknownProperty(String),
    #[error("unknown instance {0}")]
    UnknownInstance(String),
}

/// Counts produced by [`KnowledgeBase::add_instance_triples`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestSummary {
    pub new_instances: usize,
    pub new_placeholders: usize,
    pub type_assertions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    vocab: Vocabulary,
    classes: BTreeMap<String, ClassNode>,
    properties: BTreeMap<String, PropertyRecord>,
    instances: BTreeMap<String, InstanceRecord>,
    direct_index: BTreeMap<String, BTreeSet<String>>,
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        KnowledgeBase::new(Vocabulary::default())
    }
}

impl KnowledgeBase {
    /// A knowledge base holding only the root class.
    pub fn new(vocab: Vocabulary) -> Self {
        let mut kb = KnowledgeBase {
            classes: BTreeMap::new(),
            properties: BTreeMap::new(),
            instances: BTreeMap::new(),
            direct_index: BTreeMap::new(),
            vocab,
        };
        let root = kb.vocab.thing.clone();
        kb.classes.insert(root.clone(), ClassNode::default());
        kb.direct_index.insert(root, BTreeSet::new());
        kb
    }

    /// Builds the knowledge base from the schema statements among `triples`
    /// and returns the remaining statements untouched.
    ///
    /// Schema statements are `rdfs:subClassOf`, `rdfs:domain`, the
    /// generalized-domain marker, and `rdf:type` statements whose object is a
    /// class or property marker. Classes that are referenced but have no
    /// parent become children of the root.
    pub fn load_schema(
        triples: Vec<Triple>,
        vocab: Vocabulary,
    ) -> Result<(KnowledgeBase, Vec<Triple>), SchemaError> {
        let mut rest = Vec::new();
        let mut declared_classes = BTreeSet::new();
        let mut declared_props = BTreeSet::new();
        let mut parents: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut domains: BTreeMap<(String, String), Provenance> = BTreeMap::new();

        for t in triples {
            let p = t.predicate_iri();
            let is_marker_type = p == vocab.rdf_type
                && t.object().as_iri().is_some_and(|o| {
                    vocab.class_markers.iter().any(|m| m == o)
                        || vocab.property_markers.iter().any(|m| m == o)
                });
            let is_schema = is_marker_type
                || p == vocab.sub_class_of
                || p == vocab.domain
                || p == vocab.generalized_domain;
            if !is_schema {
                rest.push(t);
                continue;
            }
            let (Some(s), Some(o)) = (t.subject().as_iri(), t.object().as_iri()) else {
                return Err(SchemaError::NonIriTerm(t.to_string()));
            };
            let (s, o) = (s.to_string(), o.to_string());
            if is_marker_type {
                if vocab.class_markers.contains(&o) {
                    declared_classes.insert(s);
                } else {
                    declared_props.insert(s);
                }
            } else if p == vocab.sub_class_of {
                declared_classes.insert(o.clone());
                parents.entry(s).or_default().insert(o);
            } else if p == vocab.domain {
                declared_classes.insert(o.clone());
                declared_props.insert(s.clone());
                domains.entry((s, o)).or_insert(Provenance::Schema);
            } else {
                declared_classes.insert(o.clone());
                declared_props.insert(s.clone());
                domains.insert((s, o), Provenance::Generalized);
            }
        }

        let root = vocab.thing.clone();
        let mut parent_of = BTreeMap::new();
        for (child, ps) in parents {
            if child == root {
                let p = ps.into_iter().next().unwrap_or_default();
                return Err(SchemaError::RootHasParent(p));
            }
            if ps.len() > 1 {
                return Err(SchemaError::MultipleParents {
                    class: child,
                    parents: ps.into_iter().collect(),
                });
            }
            let parent = ps.into_iter().next().expect("non-empty parent set");
            parent_of.insert(child, parent);
        }
        if let Some(cycle) = find_cycle(&parent_of) {
            return Err(SchemaError::Cycle(cycle));
        }

        let mut kb = KnowledgeBase::new(vocab);
        for c in declared_classes.iter().chain(parent_of.keys()) {
            kb.ensure_class(c);
        }
        for (child, parent) in &parent_of {
            kb.set_parent(child, parent);
        }
        for p in declared_props {
            kb.properties.entry(p).or_default();
        }
        for ((p, c), prov) in domains {
            kb.properties.entry(p).or_default().domains.insert(c, prov);
        }
        Ok((kb, rest))
    }

    fn ensure_class(&mut self, iri: &str) {
        if self.classes.contains_key(iri) {
            return;
        }
        let root = self.vocab.thing.clone();
        self.classes.insert(
            iri.to_string(),
            ClassNode {
                parent: Some(root.clone()),
                children: BTreeSet::new(),
            },
        );
        self.classes
            .get_mut(&root)
            .expect("root exists")
            .children
            .insert(iri.to_string());
        self.direct_index.insert(iri.to_string(), BTreeSet::new());
    }

    fn set_parent(&mut self, child: &str, parent: &str) {
        let old = self.classes[child].parent.clone();
        if let Some(old) = old {
            self.classes.get_mut(&old).expect("parent exists").children.remove(child);
        }
        self.classes.get_mut(child).expect("child exists").parent = Some(parent.to_string());
        self.classes
            .get_mut(parent)
            .expect("parent exists")
            .children
            .insert(child.to_string());
    }

    /// Adds instance statements.
    ///
    /// Every subject gains the predicate as a property, except for
    /// `rdf:type` statements naming a known class, which set the instance's
    /// type instead. IRI objects that are not classes, properties or existing
    /// instances become placeholder instances. Literal objects never do.
    /// Re-adding a statement is a no-op and the outcome does not depend on
    /// the order of `batch`.
    pub fn add_instance_triples(&mut self, batch: &[Triple]) -> IngestSummary {
        let mut created: BTreeSet<String> = BTreeSet::new();
        let mut summary = IngestSummary::default();

        // Register properties first so placeholder creation is order-free.
        for t in batch {
            if !self.is_type_assertion(t) {
                self.properties
                    .entry(t.predicate_iri().to_string())
                    .or_default();
            }
        }

        for t in batch {
            let Some(s) = t.subject().resource_key() else {
                continue;
            };
            if !self.instances.contains_key(&s) {
                created.insert(s.clone());
            }
            let type_assertion = self.is_type_assertion(t);
            let inst = self.instances.entry(s.clone()).or_default();
            inst.placeholder = false;

            if type_assertion {
                if self.assert_type(&s, t.object().value()) {
                    summary.type_assertions += 1;
                }
                continue;
            }

            let p = t.predicate_iri().to_string();
            inst.properties.insert(p.clone());
            inst.facts.insert((p, t.object().clone()));

            if let Some(o) = t.object().as_iri() {
                if !self.classes.contains_key(o)
                    && !self.properties.contains_key(o)
                    && !self.instances.contains_key(o)
                {
                    created.insert(o.to_string());
                    self.instances.insert(
                        o.to_string(),
                        InstanceRecord {
                            placeholder: true,
                            ..InstanceRecord::default()
                        },
                    );
                }
            }
        }

        for c in &created {
            if self.instances[c].placeholder {
                summary.new_placeholders += 1;
            } else {
                summary.new_instances += 1;
            }
        }
        summary
    }

    fn is_type_assertion(&self, t: &Triple) -> bool {
        t.predicate_iri() == self.vocab.rdf_type
            && t.object().as_iri().is_some_and(|o| self.classes.contains_key(o))
    }

    /// Applies an asserted type, keeping the deepest of the current and the
    /// asserted class (lexicographically smaller IRI on equal depth).
    /// Returns whether the assignment changed.
    fn assert_type(&mut self, instance: &str, class: &str) -> bool {
        if class == self.vocab.thing {
            return false;
        }
        let current = self.instances[instance].assigned_type.clone();
        let replace = match &current {
            None => true,
            Some(cur) => {
                let (dc, dn) = (self.depth(cur), self.depth(class));
                dn > dc || (dn == dc && class < cur.as_str())
            }
        };
        if replace {
            self.set_type(instance, Some(class.to_string()))
                .expect("instance and class exist");
        }
        replace
    }

    /// Sets (or clears) the working type of an instance, keeping the
    /// direct-instance index in sync. Assigning the root class clears it.
    pub fn set_type(&mut self, instance: &str, class: Option<String>) -> Result<(), LookupError> {
        let class = class.filter(|c| *c != self.vocab.thing);
        if let Some(c) = &class {
            if !self.classes.contains_key(c) {
                return Err(LookupError::UnknownClass(c.clone()));
            }
        }
        let rec = self
            .instances
            .get_mut(instance)
            .ok_or_else(|| LookupError::UnknownInstance(instance.to_string()))?;
        if let Some(old) = rec.assigned_type.take() {
            self.direct_index
                .get_mut(&old)
                .expect("indexed class")
                .remove(instance);
        }
        if let Some(c) = &class {
            self.direct_index
                .get_mut(c)
                .expect("indexed class")
                .insert(instance.to_string());
        }
        rec.assigned_type = class;
        Ok(())
    }

    /// Adds `class` to the domains of `property`. Returns false if it was
    /// already present (provenance is left as is).
    pub fn add_domain(
        &mut self,
        property: &str,
        class: &str,
        provenance: Provenance,
    ) -> Result<bool, LookupError> {
        if !self.classes.contains_key(class) {
            return Err(LookupError::UnknownClass(class.to_string()));
        }
        let rec = self
            .properties
            .get_mut(property)
            .ok_or_else(|| LookupError::UnknownProperty(property.to_string()))?;
        if rec.domains.contains_key(class) {
            return Ok(false);
        }
        rec.domains.insert(class.to_string(), provenance);
        Ok(true)
    }

    pub fn remove_domain(&mut self, property: &str, class: &str) -> Result<bool, LookupError> {
        let rec = self
            .properties
            .get_mut(property)
            .ok_or_else(|| LookupError::UnknownProperty(property.to_string()))?;
        Ok(rec.domains.remove(class).is_some())
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn root(&self) -> &str {
        &self.vocab.thing
    }

    pub fn classes(&self) -> &BTreeMap<String, ClassNode> {
        &self.classes
    }

    pub fn properties(&self) -> &BTreeMap<String, PropertyRecord> {
        &self.properties
    }

    pub fn instances(&self) -> &BTreeMap<String, InstanceRecord> {
        &self.instances
    }

    pub fn class(&self, iri: &str) -> Result<&ClassNode, LookupError> {
        self.classes
            .get(iri)
            .ok_or_else(|| LookupError::UnknownClass(iri.to_string()))
    }

    pub fn property(&self, iri: &str) -> Result<&PropertyRecord, LookupError> {
        self.properties
            .get(iri)
            .ok_or_else(|| LookupError::UnknownProperty(iri.to_string()))
    }

    pub fn instance(&self, iri: &str) -> Result<&InstanceRecord, LookupError> {
        self.instances
            .get(iri)
            .ok_or_else(|| LookupError::UnknownInstance(iri.to_string()))
    }

    /// Instances whose working type is exactly `class`. Subclass instances
    /// are not included.
    pub fn direct_instances(&self, class: &str) -> Result<&BTreeSet<String>, LookupError> {
        self.direct_index
            .get(class)
            .ok_or_else(|| LookupError::UnknownClass(class.to_string()))
    }

    /// Distance from the root; the root has depth 0.
    pub fn depth(&self, class: &str) -> usize {
        let mut d = 0;
        let mut cur = self.classes.get(class).and_then(|c| c.parent.as_deref());
        while let Some(p) = cur {
            d += 1;
            cur = self.classes[p].parent.as_deref();
        }
        d
    }

    /// Depth of every class, computed in one top-down sweep.
    pub fn depths(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        let mut stack = vec![(self.root(), 0usize)];
        while let Some((c, d)) = stack.pop() {
            out.insert(c, d);
            for child in &self.classes[c].children {
                stack.push((child.as_str(), d + 1));
            }
        }
        out
    }

    /// Post-order over the class tree: every class comes after all of its
    /// descendants, siblings in lexicographic order.
    pub fn leaf_first_order(&self) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.classes.len());
        // (class, children already expanded)
        let mut stack = vec![(self.root(), false)];
        while let Some((c, expanded)) = stack.pop() {
            if expanded {
                out.push(c);
                continue;
            }
            stack.push((c, true));
            for child in self.classes[c].children.iter().rev() {
                stack.push((child.as_str(), false));
            }
        }
        out
    }

    /// Writes the whole knowledge base as sorted, de-duplicated N-Triples and
    /// returns the number of statements written.
    pub fn export_ntriples<W: Write>(&self, mut sink: W) -> io::Result<usize> {
        let lines = self.export_lines();
        for l in &lines {
            sink.write_all(l.as_bytes())?;
            sink.write_all(b"\n")?;
        }
        sink.flush()?;
        Ok(lines.len())
    }

    fn export_lines(&self) -> Vec<String> {
        let v = &self.vocab;
        let iri = |s: &str| Term::Iri(s.to_string());
        let stmt = |s: &Term, p: &str, o: &Term| format!("{s} <{p}> {o} .");
        let mut lines = Vec::new();

        for (c, node) in &self.classes {
            if let Some(parent) = &node.parent {
                lines.push(stmt(&iri(c), &v.sub_class_of, &iri(parent)));
            }
        }
        let prop_marker = v.property_markers.first().map(String::as_str).unwrap_or(RDF_PROPERTY);
        for (p, rec) in &self.properties {
            lines.push(stmt(&iri(p), &v.rdf_type, &iri(prop_marker)));
            for (d, prov) in &rec.domains {
                lines.push(stmt(&iri(p), &v.domain, &iri(d)));
                if *prov == Provenance::Generalized {
                    lines.push(stmt(&iri(p), &v.generalized_domain, &iri(d)));
                }
            }
        }
        for (i, rec) in &self.instances {
            let subject = Term::from_resource_key(i).expect("instance keys are valid terms");
            match &rec.assigned_type {
                Some(c) => lines.push(stmt(&subject, &v.rdf_type, &iri(c))),
                None if rec.facts.is_empty() && !rec.placeholder => {
                    lines.push(stmt(&subject, &v.rdf_type, &iri(&v.thing)))
                }
                None => {}
            }
            for (p, o) in &rec.facts {
                lines.push(stmt(&subject, p, o));
            }
        }
        lines.sort();
        lines.dedup();
        lines
    }

    /// Checks the structural invariants: a single-rooted acyclic tree with
    /// consistent parent/child links, a direct-instance index equal to the
    /// inverse of the assigned types, and referential integrity of domains,
    /// types and instance properties.
    pub fn check_invariants(&self) -> Result<(), String> {
        let root = self.root();
        for (c, node) in &self.classes {
            match &node.parent {
                None if c != root => return Err(format!("class {c} has no parent")),
                Some(_) if c == root => return Err("root has a parent".into()),
                Some(p) => {
                    let pn = self.classes.get(p).ok_or(format!("missing parent {p}"))?;
                    if !pn.children.contains(c) {
                        return Err(format!("{p} does not list child {c}"));
                    }
                }
                None => {}
            }
            for ch in &node.children {
                if self.classes.get(ch).and_then(|n| n.parent.as_deref()) != Some(c) {
                    return Err(format!("child {ch} does not point back to {c}"));
                }
            }
        }
        if self.leaf_first_order().len() != self.classes.len() {
            return Err("class tree is not connected to the root".into());
        }

        let mut expected: BTreeMap<&str, BTreeSet<&str>> =
            self.classes.keys().map(|c| (c.as_str(), BTreeSet::new())).collect();
        for (i, rec) in &self.instances {
            if let Some(t) = &rec.assigned_type {
                expected
                    .get_mut(t.as_str())
                    .ok_or(format!("instance {i} typed to unknown class {t}"))?
                    .insert(i.as_str());
            }
            for p in &rec.properties {
                if !self.properties.contains_key(p) {
                    return Err(format!("instance {i} uses unregistered property {p}"));
                }
            }
            if rec.placeholder && !rec.properties.is_empty() {
                return Err(format!("placeholder {i} has properties"));
            }
        }
        let actual: BTreeMap<&str, BTreeSet<&str>> = self
            .direct_index
            .iter()
            .map(|(c, s)| (c.as_str(), s.iter().map(String::as_str).collect()))
            .collect();
        if actual != expected {
            return Err("direct-instance index differs from assigned types".into());
        }
        for (p, rec) in &self.properties {
            for d in rec.domains.keys() {
                if !self.classes.contains_key(d) {
                    return Err(format!("property {p} has unknown domain {d}"));
                }
            }
        }
        Ok(())
    }
}

/// Finds a cycle in a child→parent map; the cycle is rotated to start at its
/// lexicographically smallest member.
fn find_cycle(parent_of: &BTreeMap<String, String>) -> Option<Vec<String>> {
    let mut done: BTreeSet<&str> = BTreeSet::new();
    for start in parent_of.keys() {
        let mut path: Vec<&str> = Vec::new();
        let mut cur = Some(start.as_str());
        while let Some(c) = cur {
            if done.contains(c) {
                break;
            }
            if let Some(pos) = path.iter().position(|x| *x == c) {
                let mut cycle: Vec<String> = path[pos..].iter().map(|s| s.to_string()).collect();
                let min = cycle
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                cycle.rotate_left(min);
                return Some(cycle);
            }
            path.push(c);
            cur = parent_of.get(c).map(String::as_str);
        }
        done.extend(path);
    }
    None
}
