//! Task export for annotators, the separate answer key, response import
//! and the review sheet for the manual grammar pass.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{IntrusionTask, ResponseSet};
use crate::error::{Error, Result};

/// What annotators see: no answer, types or provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportedTask {
    pub task_id: String,
    pub steps: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerKeyEntry {
    pub answer_index: usize,
    /// Steps shown, host steps plus the intruder.
    pub n_shown: usize,
}

pub type AnswerKey = BTreeMap<String, AnswerKeyEntry>;

/// One line of `{"task_id", "steps"}` per task.
pub fn write_task_export(tasks: &[IntrusionTask]) -> String {
    tasks
        .iter()
        .map(|t| {
            let e = ExportedTask {
                task_id: t.task_id.clone(),
                steps: t.steps_shown.clone(),
            };
            serde_json::to_string(&e).expect("plain strings serialize") + "\n"
        })
        .collect()
}

/// Full task records with provenance, one JSON object per line.
pub fn write_tasks(tasks: &[IntrusionTask]) -> String {
    tasks
        .iter()
        .map(|t| serde_json::to_string(t).expect("task serializes") + "\n")
        .collect()
}

pub fn read_tasks(text: &str) -> Result<Vec<IntrusionTask>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::format("task file", i + 1, e.to_string()))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct KeyRow {
    task_id: String,
    answer_index: usize,
    n_shown: usize,
}

fn tsv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 input stays utf-8")
}

fn csv_error(what: &'static str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::format(what, line, e.to_string())
}

/// Tab-separated `task_id, answer_index, n_shown` with a header.
pub fn write_answer_key(tasks: &[IntrusionTask]) -> String {
    let mut w = tsv_writer();
    for t in tasks {
        w.serialize(KeyRow {
            task_id: t.task_id.clone(),
            answer_index: t.answer_index,
            n_shown: t.steps_shown.len(),
        })
        .expect("in-memory write");
    }
    finish(w)
}

pub fn read_answer_key(text: &str) -> Result<AnswerKey> {
    let mut r = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .from_reader(text.as_bytes());
    let mut key = AnswerKey::new();
    for row in r.deserialize::<KeyRow>() {
        let row = row.map_err(|e| csv_error("answer key", e))?;
        if row.answer_index >= row.n_shown {
            return Err(Error::Precondition(format!(
                "answer out of range for task `{}`",
                row.task_id
            )));
        }
        let entry = AnswerKeyEntry {
            answer_index: row.answer_index,
            n_shown: row.n_shown,
        };
        if key.insert(row.task_id.clone(), entry).is_some() {
            return Err(Error::Precondition(format!(
                "task `{}` keyed twice",
                row.task_id
            )));
        }
    }
    Ok(key)
}

/// One annotator vote.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub task_id: String,
    pub annotator_id: String,
    pub pick: usize,
}

/// Comma-separated `task_id, annotator_id, pick` with a header, grouped per
/// task in file order. Each task needs exactly three votes from three
/// distinct annotators.
pub fn read_responses(text: &str) -> Result<Vec<ResponseSet>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut votes: BTreeMap<String, Vec<ResponseRecord>> = BTreeMap::new();
    for row in r.deserialize::<ResponseRecord>() {
        let row = row.map_err(|e| csv_error("responses", e))?;
        votes.entry(row.task_id.clone()).or_default().push(row);
    }
    votes
        .into_iter()
        .map(|(task_id, rows)| {
            let mut annotators: Vec<&str> = rows.iter().map(|r| r.annotator_id.as_str()).collect();
            annotators.sort_unstable();
            annotators.dedup();
            if rows.len() != 3 || annotators.len() != 3 {
                return Err(Error::Precondition(format!(
                    "task `{task_id}` has {} vote(s) from {} annotator(s); need 3 from 3",
                    rows.len(),
                    annotators.len()
                )));
            }
            Ok(ResponseSet {
                task_id,
                picks: [rows[0].pick, rows[1].pick, rows[2].pick],
            })
        })
        .collect()
}

/// Tab-separated review sheet of every intruder: where it came from, its
/// original text and the rewritten text shown to annotators.
pub fn write_review(tasks: &[IntrusionTask]) -> String {
    let mut w = tsv_writer();
    w.write_record([
        "task_id",
        "host_schema",
        "source_schema",
        "source_step",
        "weight",
        "original",
        "rewritten",
    ])
    .expect("in-memory write");
    for t in tasks {
        let weight = format!("{:.6}", t.intruder.weight);
        w.write_record([
            t.task_id.as_str(),
            &t.host_schema,
            &t.intruder.source_schema,
            &t.intruder.step.id,
            &weight,
            &t.original_text,
            &t.steps_shown[t.answer_index],
        ])
        .expect("in-memory write");
    }
    finish(w)
}
