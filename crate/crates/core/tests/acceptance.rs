//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints a PASS/FAIL line on each `cargo test` run.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use kbevolve::evolution::{classification_coverage, EvolutionConfig};
use kbevolve::generalization::{run_generalization_pass, Deletion};
use kbevolve::kb::KnowledgeBase;
use kbevolve::ntriples::{read_all, BatchReader};
use kbevolve::synth::{evolve_and_evaluate, generate_kb, SynthSpec};
use kbevolve::typing::{
    build_instance_profile, build_type_profile, cosine_score, domain_frequency, idf_weight, naive_assign,
    pfidf_score, InstanceProfile, Method, SparseVector, TypeProfile, Weighting,
};
use kbevolve::{evolve, generalization_threshold};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn thresholds() -> Outcome {
    let cases = [(1usize, 1.0), (10, 0.5), (100, 1.0 / 3.0), (1000, 0.25)];
    let mut worst = 0.0f64;
    for (n, want) in cases {
        let got = generalization_threshold::<f64>(n).map_err(|e| e.to_string())?;
        let err = (got - want).abs();
        ensure!(err < 1e-12, "P({n}) = {got}, expected {want}");
        worst = worst.max(err);
    }
    Ok(format!("max abs error {worst:.1e}"))
}

fn cosine_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let pairs = 500;
    for _ in 0..pairs {
        let dim = rng.gen_range(1..=50);
        let density = rng.gen_range(0.05..0.6);
        let a: BTreeSet<usize> = (0..dim).filter(|_| rng.gen_bool(density)).collect();
        let b: BTreeSet<usize> = (0..dim).filter(|_| rng.gen_bool(density)).collect();
        let tp = TypeProfile {
            class: "t".into(),
            weighting: Weighting::Binary,
            vector: SparseVector::<f64>::binary(a.iter().map(|i| i.to_string())),
        };
        let ip = InstanceProfile {
            instance: "i".into(),
            support: b.iter().map(|i| i.to_string()).collect(),
        };
        let got = cosine_score(&tp, &ip);
        let want = dense_binary_cosine(&a, &b, dim);
        ensure!((got - want).abs() < 1e-9, "{a:?} vs {b:?}: {got} != {want}");
        worst = worst.max((got - want).abs());
        if !a.is_empty() {
            let same = InstanceProfile {
                instance: "i".into(),
                support: a.iter().map(|i| i.to_string()).collect(),
            };
            ensure!(cosine_score(&tp, &same) == 1.0, "identical support of size {} != 1.0", a.len());
        }
    }
    Ok(format!("{pairs} pairs, max abs error {worst:.1e}"))
}

fn president_counts() -> Outcome {
    let (kb, subject) = president_kb();
    let table = domain_frequency(&kb, &subject).map_err(|e| e.to_string())?;
    let (top, count) = table.ranked()[0];
    ensure!(top == ex("President") && count == 25, "top entry {top} with {count}");
    let d = naive_assign::<f64>(&kb, &subject).map_err(|e| e.to_string())?;
    ensure!(d.chosen.as_deref() == Some(ex("President").as_str()), "naive chose {:?}", d.chosen);
    Ok(format!("President={count}, OfficeHolder={}, naive -> President", table.get(&ex("OfficeHolder"))))
}

fn ubiquity() -> Outcome {
    let shape = KbShape {
        parents: vec![None, None, Some(0), Some(1), Some(1)],
        domains: vec![(0..5).collect(), [0].into(), [1, 2].into(), [3].into()],
        instances: vec![(None, [0, 1].into()), (None, [0, 2, 3].into()), (None, [0].into())],
    };
    let kb = shape.build();
    let w = idf_weight::<f64>(&kb, &prop(0)).map_err(|e| e.to_string())?;
    ensure!(w == Some(0.0), "idf of ubiquitous property is {w:?}");
    let binary = build_type_profile::<f64>(&kb, &class(0), Weighting::Binary).map_err(|e| e.to_string())?;
    ensure!(binary.vector.weights.contains_key(&prop(0)), "binary profile lost the property");
    for c in 0..5 {
        let tp = build_type_profile::<f64>(&kb, &class(c), Weighting::Pfidf).map_err(|e| e.to_string())?;
        ensure!(!tp.vector.weights.contains_key(&prop(0)), "pfidf profile of C{c} keeps the property");
        for i in 0..3 {
            let ip = build_instance_profile(&kb, &inst(i)).map_err(|e| e.to_string())?;
            let mut without = ip.clone();
            without.support.remove(&prop(0));
            ensure!(
                tp.vector.dot(&ip.vector()) == tp.vector.dot(&without.vector()),
                "property changes the numerator for C{c}"
            );
        }
        let s = pfidf_score::<f64>(&kb, &inst(2), &class(c)).map_err(|e| e.to_string())?;
        ensure!(s == 0.0, "instance carrying only the ubiquitous property scores {s} for C{c}");
    }
    Ok("idf=0, absent from every pfidf profile, zero contribution".into())
}

/// Scores computed straight from the property→domain table.
fn oracle_scores(kb: &KnowledgeBase, instance: &str, method: Method) -> BTreeMap<String, f64> {
    let props = &kb.instances()[instance].properties;
    let classes: Vec<&String> = kb.classes().keys().filter(|c| c.as_str() != kb.root()).collect();
    let c_count = classes.len() as f64;
    let domains_of = |p: &String| -> BTreeSet<&String> {
        kb.properties()[p].domains.keys().filter(|d| d.as_str() != kb.root()).collect()
    };
    let mut out = BTreeMap::new();
    for c in classes {
        let members: Vec<&String> = kb.properties().keys().filter(|p| domains_of(p).contains(c)).collect();
        let weight = |p: &String| match method {
            Method::Pfidf => (c_count / domains_of(p).len() as f64).ln(),
            _ => 1.0,
        };
        let score = match method {
            Method::Naive => props.iter().filter(|p| domains_of(p).contains(c)).count() as f64,
            _ => {
                let dot: f64 = members.iter().filter(|p| props.contains(**p)).map(|p| weight(p)).sum();
                let norm: f64 = members.iter().map(|p| weight(p).powi(2)).sum::<f64>().sqrt();
                if norm == 0.0 || props.is_empty() {
                    0.0
                } else {
                    dot / (norm * (props.len() as f64).sqrt())
                }
            }
        };
        out.insert(c.clone(), score);
    }
    out
}

fn noise_free_recovery() -> Outcome {
    let spec = SynthSpec {
        class_count: 10,
        signature_properties_per_class: 4,
        shared_properties: 2,
        instances_per_class: 20,
        hidden_type_fraction: 0.5,
        noise_rate: 0.0,
        seed: 17,
    };
    let synth = generate_kb(&spec).map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    for method in Method::ALL {
        let config = EvolutionConfig::<f64> {
            method,
            ..Default::default()
        };
        let (kb, report, acc) = evolve_and_evaluate(&synth, &config).map_err(|e| e.to_string())?;
        ensure!(report.records.len() == 1, "{} batches", report.records.len());
        ensure!(acc.evaluated == 100, "{method}: evaluated {}", acc.evaluated);
        ensure!(acc.accuracy == 1.0, "{method}: accuracy {}", acc.accuracy);
        for (inst, entry) in synth.truth.instances.iter().filter(|(_, e)| e.hidden) {
            let scores = oracle_scores(&kb, inst, method);
            let best = scores[&entry.class];
            let rivals = scores.iter().filter(|(c, s)| **c != entry.class && **s >= best).count();
            ensure!(best > 0.0 && rivals == 0, "{method}: {inst} has no unique maximizer");
        }
        summary.push(format!("{method}=1.0"));
    }
    Ok(summary.join(" "))
}

fn noisy_recovery() -> Outcome {
    let mut cos = Vec::new();
    let mut pf = Vec::new();
    for seed in 0..10 {
        let spec = SynthSpec {
            seed,
            ..SynthSpec::default()
        };
        let synth = generate_kb(&spec).map_err(|e| e.to_string())?;
        for (method, sink) in [(Method::Cosine, &mut cos), (Method::Pfidf, &mut pf)] {
            let config = EvolutionConfig::<f64> {
                method,
                ..Default::default()
            };
            sink.push(evolve_and_evaluate(&synth, &config).map_err(|e| e.to_string())?.2.accuracy);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mc, mp) = (mean(&cos), mean(&pf));
    ensure!(mp >= mc, "mean pfidf {mp:.4} < mean cosine {mc:.4}");
    ensure!(mp >= 0.8, "mean pfidf {mp:.4} < 0.8");
    Ok(format!("mean pfidf {mp:.4}, mean cosine {mc:.4} over 10 seeds"))
}

fn monotone_coverage() -> Outcome {
    let spec = SynthSpec {
        class_count: 10,
        signature_properties_per_class: 4,
        shared_properties: 2,
        instances_per_class: 30,
        hidden_type_fraction: 0.5,
        noise_rate: 0.0,
        seed: 5,
    };
    let synth = generate_kb(&spec).map_err(|e| e.to_string())?;
    let config = EvolutionConfig::<f64> {
        batch_lines: synth.instances.len().div_ceil(3),
        deletion_enabled: false,
        ..Default::default()
    };
    let (_, report, _) = evolve_and_evaluate(&synth, &config).map_err(|e| e.to_string())?;
    let r = &report.records;
    ensure!(r.len() == 3, "{} records", r.len());
    for w in r.windows(2) {
        ensure!(w[1].instances_classified >= w[0].instances_classified, "classified dropped: {r:?}");
        ensure!(w[1].properties_with_domain >= w[0].properties_with_domain, "with_domain dropped: {r:?}");
    }
    let classified: Vec<usize> = r.iter().map(|x| x.instances_classified).collect();
    let with_domain: Vec<usize> = r.iter().map(|x| x.properties_with_domain).collect();
    Ok(format!("classified {classified:?}, properties_with_domain {with_domain:?}"))
}

fn fixed_point() -> Outcome {
    let synth = generate_kb(&SynthSpec::default()).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for method in Method::ALL {
        let config = EvolutionConfig::<f64> {
            method,
            ..Default::default()
        };
        let (mut kb, _, _) = evolve_and_evaluate(&synth, &config).map_err(|e| e.to_string())?;
        let before = export_string(&kb);
        let domain_changes = run_generalization_pass(&mut kb, &config.policy, Deletion::Enabled);
        ensure!(domain_changes.is_empty(), "{method}: {} domain changes on re-run", domain_changes.len());
        let type_changes = kbevolve::typing::assign_types::<f64>(&mut kb, method)
            .iter()
            .filter(|d| d.changed())
            .count();
        ensure!(type_changes == 0, "{method}: {type_changes} type changes on re-run");
        let report = evolve(&mut kb, &b""[..], &config).map_err(|e| e.to_string())?;
        ensure!(report.records.is_empty(), "empty source produced records");
        ensure!(export_string(&kb) == before, "{method}: export changed after empty evolve");
        checked += 1;
    }
    Ok(format!("{checked} methods, zero changes, export byte-identical"))
}

fn round_trip() -> Outcome {
    let spec = SynthSpec {
        class_count: 30,
        instances_per_class: 80,
        ..SynthSpec::default()
    };
    let synth = generate_kb(&spec).map_err(|e| e.to_string())?;
    let (kb, _, _) = evolve_and_evaluate(&synth, &EvolutionConfig::<f64>::default()).map_err(|e| e.to_string())?;
    let first = export_string(&kb);
    let n = first.lines().count();
    ensure!(n >= 10_000, "only {n} statements");
    let second = export_string(&reload(&first));
    ensure!(first == second, "export differs after reload");
    let cov = classification_coverage(&reload(&second));
    ensure!(cov == classification_coverage(&kb), "coverage differs after reload");
    Ok(format!("{n} statements, byte-identical"))
}

fn parser_robustness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let bad = [
        "<http://ex/s> <http://ex/p> \"open",
        "<http://ex/s> <http://ex/p>",
        "<http://ex/s <http://ex/p> <http://ex/o> .",
        "_:b \"lit\" <http://ex/o> .",
        "<http://ex/s> <http://ex/p> \"x\"@ .",
        "<http://ex/s> <http://ex/p> \"\\q\" .",
        "<http://ex/s> <http://ex/p> <http://ex/o> . <http://ex/o>",
        "garbage",
    ];
    let mut lines = Vec::new();
    let mut expected = Vec::new();
    for i in 0..2000 {
        match rng.gen_range(0..10) {
            0..=5 => {
                lines.push(format!("<http://ex/s{i}> <http://ex/p> \"line {i} \\\" . # not a comment\" ."));
                expected.push(i);
            }
            6 => lines.push(bad[rng.gen_range(0..bad.len())].to_string()),
            7 => lines.push(format!("# comment {i}")),
            8 => lines.push(String::new()),
            _ => lines.push(bad[rng.gen_range(0..bad.len())].to_string()),
        }
    }
    let text = lines.join("\n") + "\n";
    let (triples, report) = read_all(text.as_bytes()).map_err(|e| e.to_string())?;
    ensure!(report.lines_read == 2000, "lines_read {}", report.lines_read);
    ensure!(
        report.lines_read == report.triples_emitted + report.lines_skipped,
        "accounting {report:?}"
    );
    ensure!(triples.len() == expected.len(), "{} triples, expected {}", triples.len(), expected.len());
    for (t, i) in triples.iter().zip(&expected) {
        ensure!(t.subject().value() == format!("http://ex/s{i}"), "subject mismatch at {i}");
        ensure!(t.object().value() == format!("line {i} \" . # not a comment"), "object mismatch at {i}");
    }
    // Same accounting when the stream is cut into small batches.
    let mut reader = BatchReader::new(text.as_bytes());
    let mut emitted = 0;
    let mut skipped = 0;
    loop {
        let (t, r) = reader.read_batch(7).map_err(|e| e.to_string())?;
        if r.lines_read == 0 {
            break;
        }
        emitted += t.len();
        skipped += r.lines_skipped;
    }
    ensure!(emitted == report.triples_emitted && skipped == report.lines_skipped, "batched accounting differs");
    Ok(format!(
        "read={} emitted={} skipped={} errors={}",
        report.lines_read,
        report.triples_emitted,
        report.lines_skipped,
        report.errors.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("threshold exactness", thresholds),
        ("cosine oracle equivalence", cosine_oracle),
        ("naive counting picks president", president_counts),
        ("pf-idf ubiquity suppression", ubiquity),
        ("noise-free recovery", noise_free_recovery),
        ("noisy recovery", noisy_recovery),
        ("monotone coverage", monotone_coverage),
        ("fixed point", fixed_point),
        ("round trip", round_trip),
        ("parser robustness", parser_robustness),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panic: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name} ({secs:.2}s): {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.2}s): {why}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
