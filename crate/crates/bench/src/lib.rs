//! Shared inputs for the benchmarks: the fixture ontology and seeded
//! synthetic data at the sizes the acceptance budgets are stated for.

use std::path::PathBuf;

use schemakit::ingest::{
    build_transactions, event_multiset, DocumentGraph, EventMultiset, Transaction,
};
use schemakit::ontology::{load_ontology, Ontology};
use schemakit::schema::Schema;
use schemakit::synth::{synthesize, SynthConfig, SyntheticData};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

pub fn ontology() -> Ontology {
    load_ontology(&std::fs::read(fixture("ontology.json")).expect("fixture ontology"))
        .expect("valid ontology")
}

/// 232 schemas and 1000 documents from seed 0.
pub fn synthetic(ontology: &Ontology) -> SyntheticData {
    synthesize(ontology, &SynthConfig::default())
}

pub fn transactions(corpus: &[DocumentGraph]) -> Vec<Transaction> {
    corpus.iter().flat_map(build_transactions).collect()
}

pub fn multisets(corpus: &[DocumentGraph]) -> Vec<EventMultiset> {
    corpus.iter().map(event_multiset).collect()
}

pub fn teaching() -> (Schema, DocumentGraph) {
    let schema =
        Schema::from_json(&std::fs::read(fixture("remote_teaching/schema.json")).expect("fixture"))
            .expect("valid schema");
    let doc = schemakit::ingest::parse_document_graph(
        &std::fs::read(fixture("remote_teaching/document.json")).expect("fixture"),
    )
    .expect("valid document");
    (schema, doc)
}
