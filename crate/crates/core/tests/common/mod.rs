#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use kbevolve::kb::{KnowledgeBase, Vocabulary, OWL_THING, RDFS_DOMAIN, RDFS_SUBCLASS_OF, RDF_TYPE};
use kbevolve::ntriples::{Term, Triple};
use proptest::prelude::*;

pub const EX: &str = "http://ex.org/";

pub fn ex(s: &str) -> String {
    format!("{EX}{s}")
}

pub fn class(i: usize) -> String {
    ex(&format!("C{i:02}"))
}

pub fn prop(i: usize) -> String {
    ex(&format!("p{i:02}"))
}

pub fn inst(i: usize) -> String {
    ex(&format!("i{i:03}"))
}

/// One property per row with its domains. The former president carries all
/// of them, giving President 25 pairs, OfficeHolder 15, Politician and
/// Monarch 14, Officer 9, Actor and Model 1.
pub fn president_rows() -> Vec<(String, Vec<&'static str>)> {
    let mut rows: Vec<(String, Vec<&'static str>)> = vec![
        ("name".into(), vec!["President", "Person"]),
        ("picture".into(), vec!["Artist", "Person"]),
        ("country".into(), vec!["President", "OfficeHolder"]),
        ("birthPlace".into(), vec!["President", "Monarch"]),
        ("diedIn".into(), vec!["President", "Monarch"]),
        ("birthDate".into(), vec!["President", "Person"]),
        ("inaugurationDay".into(), vec!["President", "OfficeHolder"]),
        ("vicePresident".into(), vec!["President"]),
    ];
    for i in 0..18 {
        let mut d = vec!["President"];
        if i < 13 {
            d.push("OfficeHolder");
        }
        if i < 14 {
            d.push("Politician");
        }
        if i < 12 {
            d.push("Monarch");
        }
        if i < 9 {
            d.push("Officer");
        }
        if i == 16 {
            d.push("Model");
        }
        if i == 17 {
            d.push("Actor");
        }
        rows.push((format!("extra{i:02}"), d));
    }
    rows
}

pub const PRESIDENT_TREE: [(&str, &str); 9] = [
    ("Person", ""),
    ("Artist", "Person"),
    ("Actor", "Artist"),
    ("Model", "Person"),
    ("Monarch", "Person"),
    ("OfficeHolder", "Person"),
    ("Politician", "OfficeHolder"),
    ("President", "Politician"),
    ("Officer", "OfficeHolder"),
];

pub fn president_kb() -> (KnowledgeBase, String) {
    let mut schema = Vec::new();
    for (c, parent) in PRESIDENT_TREE {
        let parent = if parent.is_empty() { OWL_THING.to_string() } else { ex(parent) };
        schema.push(Triple::iris(&ex(c), RDFS_SUBCLASS_OF, &parent).unwrap());
    }
    let subject = ex("former_president");
    let mut data = Vec::new();
    for (p, domains) in president_rows() {
        for d in domains {
            schema.push(Triple::iris(&ex(&p), RDFS_DOMAIN, &ex(d)).unwrap());
        }
        data.push(Triple::new(Term::Iri(subject.clone()), Term::Iri(ex(&p)), Term::literal("v")).unwrap());
    }
    let (mut kb, rest) = KnowledgeBase::load_schema(schema, Vocabulary::default()).unwrap();
    assert!(rest.is_empty());
    kb.add_instance_triples(&data);
    (kb, subject)
}

/// Abstract description of a small knowledge base.
#[derive(Debug, Clone)]
pub struct KbShape {
    /// `parents[i]` is the parent of class `i`; `None` means the root.
    pub parents: Vec<Option<usize>>,
    /// Domains of each property.
    pub domains: Vec<BTreeSet<usize>>,
    /// Per instance: asserted type and carried properties.
    pub instances: Vec<(Option<usize>, BTreeSet<usize>)>,
}

impl KbShape {
    pub fn schema(&self) -> Vec<Triple> {
        let mut out = Vec::new();
        for (c, parent) in self.parents.iter().enumerate() {
            let p = parent.map(class).unwrap_or_else(|| OWL_THING.to_string());
            out.push(Triple::iris(&class(c), RDFS_SUBCLASS_OF, &p).unwrap());
        }
        for (p, ds) in self.domains.iter().enumerate() {
            for d in ds {
                out.push(Triple::iris(&prop(p), RDFS_DOMAIN, &class(*d)).unwrap());
            }
        }
        out
    }

    pub fn data(&self) -> Vec<Triple> {
        let mut out = Vec::new();
        for (i, (ty, props)) in self.instances.iter().enumerate() {
            if let Some(t) = ty {
                out.push(Triple::iris(&inst(i), RDF_TYPE, &class(*t)).unwrap());
            }
            for p in props {
                out.push(Triple::new(Term::Iri(inst(i)), Term::Iri(prop(*p)), Term::literal(format!("v{p}"))).unwrap());
            }
        }
        out
    }

    pub fn build(&self) -> KnowledgeBase {
        let (mut kb, rest) = KnowledgeBase::load_schema(self.schema(), Vocabulary::default()).unwrap();
        assert!(rest.is_empty());
        kb.add_instance_triples(&self.data());
        kb
    }
}

/// Random tree: each class picks its parent among earlier classes or the root.
pub fn tree_strategy(max_classes: usize) -> impl Strategy<Value = Vec<Option<usize>>> {
    (1..=max_classes).prop_flat_map(|n| {
        (0..n)
            .map(|i| {
                if i == 0 {
                    Just(None).boxed()
                } else {
                    prop::option::weighted(0.8, 0..i).boxed()
                }
            })
            .collect::<Vec<_>>()
    })
}

pub fn kb_shape_strategy() -> impl Strategy<Value = KbShape> {
    (tree_strategy(6), 1usize..8, 0usize..15).prop_flat_map(|(parents, n_props, n_inst)| {
        let nc = parents.len();
        let domains = prop::collection::vec(prop::collection::btree_set(0..nc, 0..=2), n_props);
        let instances = prop::collection::vec(
            (
                prop::option::weighted(0.5, 0..nc),
                prop::collection::btree_set(0..n_props, 0..=n_props.min(4)),
            ),
            n_inst,
        );
        (Just(parents), domains, instances).prop_map(|(parents, domains, instances)| KbShape {
            parents,
            domains,
            instances,
        })
    })
}

/// Cosine of two binary vectors given as index sets, over an explicit
/// dense expansion of dimension `dim`.
pub fn dense_binary_cosine(a: &BTreeSet<usize>, b: &BTreeSet<usize>, dim: usize) -> f64 {
    let va: Vec<f64> = (0..dim).map(|i| if a.contains(&i) { 1.0 } else { 0.0 }).collect();
    let vb: Vec<f64> = (0..dim).map(|i| if b.contains(&i) { 1.0 } else { 0.0 }).collect();
    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    let na: f64 = va.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Collects every descendant of `c`, recursively.
pub fn recursive_descendants(children: &BTreeMap<String, Vec<String>>, c: &str, out: &mut Vec<String>) {
    if let Some(ch) = children.get(c) {
        for k in ch {
            out.push(k.clone());
            recursive_descendants(children, k, out);
        }
    }
}

pub fn export_string(kb: &KnowledgeBase) -> String {
    let mut buf = Vec::new();
    kb.export_ntriples(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

/// Loads an exported snapshot back into a knowledge base.
pub fn reload(text: &str) -> KnowledgeBase {
    let (triples, report) = kbevolve::ntriples::read_all(text.as_bytes()).unwrap();
    assert!(report.errors.is_empty(), "{:?}", report.errors);
    let (mut kb, rest) = KnowledgeBase::load_schema(triples, Vocabulary::default()).unwrap();
    kb.add_instance_triples(&rest);
    kb
}
