use std::path::Path;
use std::time::{Duration, Instant};

use schemakit::ingest::{build_transactions, load_corpus, write_transactions, Transaction};
use schemakit::mining::{mine_frequent, write_itemsets, MiningConfig};
use schemakit::ontology::{load_ontology, Ontology};
use schemakit::schema::{schema_from_skeleton, validate_schema, write_skeletons};
use schemakit::skeleton::{build_skeletons, default_scorer, BuilderConfig};

fn ontology() -> Ontology {
    load_ontology(include_bytes!("../../../fixtures/ontology.json")).unwrap()
}

/// Every intermediate artifact of one run over the shipped synthetic
/// corpus, serialized.
fn run(ont: &Ontology) -> Vec<String> {
    let corpus = load_corpus(
        &Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/synthetic/corpus.jsonl"),
    )
    .unwrap();
    let transactions: Vec<Transaction> = corpus.iter().flat_map(build_transactions).collect();
    let itemsets = mine_frequent(&transactions, &MiningConfig::default());
    assert!(!itemsets.is_empty());
    let universe: Vec<&str> = ont.event_type_ids().collect();
    let scorer = default_scorer(&transactions).unwrap();
    let config = BuilderConfig {
        top_chains: 50,
        ..BuilderConfig::default()
    };
    let skeletons = build_skeletons(&itemsets, &universe, &scorer, &config).unwrap();
    assert!(!skeletons.is_empty());
    let mut out = vec![
        write_transactions(&transactions),
        write_itemsets(&itemsets),
        write_skeletons(&skeletons),
    ];
    for sk in &skeletons {
        let schema = schema_from_skeleton(sk, ont).unwrap();
        let report = validate_schema(&schema, ont);
        assert_eq!(report.errors().count(), 0, "{}: {:?}", sk.id, report.issues);
        out.push(String::from_utf8(schema.to_json()).unwrap());
    }
    out
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let ont = ontology();
    let start = Instant::now();
    let a = run(&ont);
    let b = run(&ont);
    assert_eq!(a, b);
    assert!(
        start.elapsed() < Duration::from_secs(60),
        "{:?}",
        start.elapsed()
    );
}
