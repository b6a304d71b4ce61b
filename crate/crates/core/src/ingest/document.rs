use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityValue {
    pub entity: String,
    #[serde(default = "one")]
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedParticipant {
    #[serde(rename = "@id", default)]
    pub id: String,
    /// Slot name with any `<type>/Slots/` qualification stripped.
    pub role: String,
    #[serde(rename = "values", default)]
    pub entity_values: Vec<EntityValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedEvent {
    #[serde(rename = "@id")]
    pub id: String,
    /// Event type with any namespace prefix (`kairos:Primitives/Events/`)
    /// stripped.
    #[serde(rename = "@type")]
    pub event_type: String,
    #[serde(default = "one")]
    pub confidence: f64,
    #[serde(default)]
    pub participants: Vec<ExtractedParticipant>,
}

impl ExtractedEvent {
    pub fn qualified_role(&self, role: &str) -> String {
        format!("{}/Slots/{}", self.event_type, role)
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.participants
            .iter()
            .flat_map(|p| p.entity_values.iter().map(|v| v.entity.as_str()))
    }
}

/// One document's extracted events, flattened from the extractor output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentGraph {
    #[serde(rename = "@id")]
    pub doc_id: String,
    #[serde(default)]
    pub events: Vec<ExtractedEvent>,
    #[serde(default)]
    pub entities: BTreeSet<String>,
}

impl DocumentGraph {
    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("document serializes")
    }
}

fn strip_type(raw: &str) -> String {
    raw.rsplit('/').next().unwrap_or(raw).to_string()
}

fn strip_role(raw: &str) -> String {
    match raw.rfind("/Slots/") {
        Some(at) => raw[at + "/Slots/".len()..].to_string(),
        None => raw.rsplit('/').next().unwrap_or(raw).to_string(),
    }
}

fn check_confidence(value: f64, location: impl FnOnce() -> String) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::ConfidenceOutOfRange {
            location: location(),
            value,
        })
    }
}

/// Normalizes names, checks confidences and ids, and completes the entity
/// set from participant values.
fn normalize(mut doc: DocumentGraph) -> Result<DocumentGraph> {
    let mut event_ids = BTreeSet::new();
    for event in &mut doc.events {
        if !event_ids.insert(event.id.clone()) {
            return Err(Error::Precondition(format!(
                "document `{}` has duplicate event id `{}`",
                doc.doc_id, event.id
            )));
        }
        event.event_type = strip_type(&event.event_type);
        check_confidence(event.confidence, || format!("{}/{}", doc.doc_id, event.id))?;
        for participant in &mut event.participants {
            participant.role = strip_role(&participant.role);
            for value in &participant.entity_values {
                if value.entity.is_empty() {
                    return Err(Error::Precondition(format!(
                        "empty entity id in {}/{}",
                        doc.doc_id, event.id
                    )));
                }
                check_confidence(value.confidence, || {
                    format!("{}/{}/{}", doc.doc_id, event.id, participant.role)
                })?;
                doc.entities.insert(value.entity.clone());
            }
        }
    }
    Ok(doc)
}

pub fn parse_document_graph(source: &[u8]) -> Result<DocumentGraph> {
    let doc: DocumentGraph =
        serde_json::from_slice(source).map_err(|e| Error::parse("document graph", e))?;
    normalize(doc)
}

/// Loads a corpus from a directory of `*.json` documents (sorted by file
/// name) or from a JSON-lines file with one document per line.
pub fn load_corpus(path: &Path) -> Result<Vec<DocumentGraph>> {
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json" || x == "jsonl"))
            .collect();
        files.sort();
        let mut docs = Vec::new();
        for file in files {
            if file.extension().is_some_and(|x| x == "jsonl") {
                docs.extend(load_corpus(&file)?);
            } else {
                let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
                docs.push(parse_document_graph(&bytes)?);
            }
        }
        Ok(docs)
    } else {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_corpus_lines(&text)
    }
}

pub fn parse_corpus_lines(text: &str) -> Result<Vec<DocumentGraph>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let doc: DocumentGraph = serde_json::from_str(line)
                .map_err(|e| Error::format("corpus", i + 1, e.to_string()))?;
            normalize(doc)
        })
        .collect()
}

pub fn write_corpus_lines(docs: &[DocumentGraph]) -> String {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&doc.to_json());
        out.push('\n');
    }
    out
}
