use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use schemakit::inference::{flatten_document, match_schema, InferenceConfig};
use schemakit::metrics::{coverage, Stratum};
use schemakit::mining::{mine_frequent, MiningConfig};
use schemakit::schema::{validate_schema, Schema};
use schemakit::skeleton::{build_skeletons, default_scorer, BuilderConfig};
use schemakit_bench::{fixture, multisets, ontology, synthetic, teaching, transactions};

fn mining(c: &mut Criterion) {
    let ont = ontology();
    let data = synthetic(&ont);
    let tx = transactions(&data.corpus);
    let cfg = MiningConfig::default();
    c.bench_function("mine_frequent/1000_docs", |b| {
        b.iter(|| mine_frequent(black_box(&tx), &cfg))
    });
    let itemsets = mine_frequent(&tx, &cfg);
    let scorer = default_scorer(&tx).unwrap();
    let universe: Vec<&str> = ont.event_type_ids().collect();
    let builder = BuilderConfig::default();
    c.bench_function("build_skeletons/1000_docs", |b| {
        b.iter(|| build_skeletons(black_box(&itemsets), &universe, &scorer, &builder).unwrap())
    });
}

fn solver(c: &mut Criterion) {
    let (schema, doc) = teaching();
    let observed = flatten_document(&doc);
    let cfg = InferenceConfig::default();
    c.bench_function("match_schema/teaching", |b| {
        b.iter(|| match_schema(black_box(&schema), &doc, &observed, &cfg).unwrap())
    });
}

fn metrics(c: &mut Criterion) {
    let ont = ontology();
    let data = synthetic(&ont);
    let docs = multisets(&data.corpus);
    let strata = [
        Stratum { lo: 1, hi: Some(5) },
        Stratum {
            lo: 5,
            hi: Some(10),
        },
        Stratum { lo: 10, hi: None },
    ];
    c.bench_function("coverage/1000_docs_232_schemas", |b| {
        b.iter(|| coverage(black_box(&docs), &data.library, &[0.5, 0.7, 0.9], &strata).unwrap())
    });
}

fn validation(c: &mut Criterion) {
    let ont = ontology();
    let schema =
        Schema::from_json(&std::fs::read(fixture("schemas/cook_meal.json")).unwrap()).unwrap();
    c.bench_function("validate_schema/cook_meal", |b| {
        b.iter(|| validate_schema(black_box(&schema), &ont))
    });
}

criterion_group!(benches, mining, solver, metrics, validation);
criterion_main!(benches);
