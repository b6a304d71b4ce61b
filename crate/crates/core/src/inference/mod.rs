//! Soft-logic schema matching.
//!
//! A document is flattened to observed atoms, each candidate schema is
//! grounded against it as a weighted hinge-loss program, and the solved
//! schema-atom truth becomes the match confidence.

mod atoms;
mod prefilter;
mod program;
mod solver;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{event_multiset, DocumentGraph};
use crate::schema::Schema;

pub use atoms::{flatten_document, is_unk, Atom, Observations, FALSUM, UNK_ENTITY, UNK_EVENT};
pub use prefilter::{idf, prefilter, SchemaIndex};
pub use program::{
    ground_schema, render_rule_templates, step_predicate, GroundRule, Grounding, GroundingCaps,
    RuleKind, SoftLogicProgram, UnkTruths, PRIOR_WEIGHT, SCHEMA_RULE_WEIGHT, STEP_RULE_WEIGHT,
};
pub use solver::{objective_at, solve, Solution, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    /// Schemas attempted per document after prefiltering.
    pub top_k: usize,
    pub caps: GroundingCaps,
    pub solver: SolverConfig,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            top_k: 10,
            caps: GroundingCaps::default(),
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedEvent {
    pub event_type: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub doc_id: String,
    pub schema_id: String,
    /// Rescaled confidence.
    pub theta: f64,
    pub theta_raw: f64,
    pub matched_steps: usize,
    pub total_steps: usize,
    /// Step id to event id or `UNK_event`.
    pub step_bindings: BTreeMap<String, String>,
    /// Participant id to entity id or `UNK_entity`.
    pub bindings: BTreeMap<String, String>,
    /// Types of this schema's unmatched steps, with the probability
    /// combined over every matched schema of the document predicting them.
    pub predicted_events: Vec<PredictedEvent>,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub doc_id: String,
    pub schema_id: String,
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
    pub targets: usize,
    pub rules: usize,
    pub groundings: usize,
    pub truncated: bool,
}

/// `theta_raw * matched / total`.
pub fn rescale_confidence(theta_raw: f64, matched_steps: usize, total_steps: usize) -> f64 {
    if total_steps == 0 {
        return 0.0;
    }
    theta_raw * matched_steps as f64 / total_steps as f64
}

/// Probability that an event implied by any of several schemas happened:
/// `1 - prod (1 - theta_i)`.
pub fn combine_event_probability(thetas: &[f64]) -> f64 {
    1.0 - thetas.iter().map(|t| 1.0 - t).product::<f64>()
}

/// Matches one schema, keeping the grounding with the highest rescaled
/// confidence (then more matched steps, then enumeration order).
pub fn match_schema(
    schema: &Schema,
    doc: &DocumentGraph,
    observed: &Observations,
    config: &InferenceConfig,
) -> Result<(MatchResult, SolveDiagnostics)> {
    let program = ground_schema(schema, doc, observed, &config.caps)?;
    let solution = solve(&program, &config.solver);
    let total = schema.steps.len();
    let mut best: Option<(&Grounding, f64, f64, usize)> = None;
    for g in &program.groundings {
        let raw = solution.truth(&g.schema_atom).unwrap_or(0.0);
        let matched = g.matched_steps();
        let theta = rescale_confidence(raw, matched, total);
        let better = match best {
            None => true,
            Some((_, t, _, m)) => theta > t || (theta == t && matched > m),
        };
        if better {
            best = Some((g, theta, raw, matched));
        }
    }
    let (g, theta, theta_raw, matched) = best.expect("a grounding always exists");
    let result = MatchResult {
        doc_id: doc.doc_id.clone(),
        schema_id: schema.id.clone(),
        theta,
        theta_raw,
        matched_steps: matched,
        total_steps: total,
        step_bindings: schema
            .steps
            .iter()
            .map(|s| s.id.clone())
            .zip(g.steps.iter().cloned())
            .collect(),
        bindings: schema
            .participants
            .iter()
            .map(|p| p.id.clone())
            .zip(g.participants.iter().cloned())
            .collect(),
        predicted_events: Vec::new(),
        truncated: program.truncated,
    };
    let diagnostics = SolveDiagnostics {
        doc_id: doc.doc_id.clone(),
        schema_id: schema.id.clone(),
        iterations: solution.iterations,
        objective: solution.objective,
        converged: solution.converged,
        targets: program.targets.len(),
        rules: program.rules.len(),
        groundings: program.groundings.len(),
        truncated: program.truncated,
    };
    Ok((result, diagnostics))
}

/// Fills `predicted_events` for the results of one document. Only results
/// with positive confidence predict anything.
pub fn predict_events(results: &mut [MatchResult], library: &BTreeMap<&str, &Schema>) {
    let mut support: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut per_result: Vec<Vec<String>> = Vec::with_capacity(results.len());
    for r in results.iter() {
        let mut types = Vec::new();
        if r.theta > 0.0 {
            if let Some(schema) = library.get(r.schema_id.as_str()) {
                for step in &schema.steps {
                    if r.step_bindings
                        .get(&step.id)
                        .is_some_and(|e| e == UNK_EVENT)
                        && !types.contains(&step.event_type)
                    {
                        types.push(step.event_type.clone());
                    }
                }
            }
        }
        for t in &types {
            support.entry(t.clone()).or_default().push(r.theta);
        }
        per_result.push(types);
    }
    for (r, types) in results.iter_mut().zip(per_result) {
        r.predicted_events = types
            .into_iter()
            .map(|t| PredictedEvent {
                probability: combine_event_probability(&support[&t]),
                event_type: t,
            })
            .collect();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentInference {
    pub doc_id: String,
    /// Best first; ties by schema id.
    pub results: Vec<MatchResult>,
    pub diagnostics: Vec<SolveDiagnostics>,
}

/// Matches the prefiltered schemas of `library` against one document.
pub fn infer_document(
    library: &[Schema],
    index: &SchemaIndex,
    doc: &DocumentGraph,
    config: &InferenceConfig,
) -> Result<DocumentInference> {
    let candidates = prefilter(library, index, &event_multiset(doc), config.top_k)?;
    infer_with(&candidates, doc, config)
}

/// Matches every schema of `library` against one document, without
/// prefiltering.
pub fn infer_document_exhaustive(
    library: &[Schema],
    doc: &DocumentGraph,
    config: &InferenceConfig,
) -> Result<DocumentInference> {
    let all: Vec<&Schema> = library.iter().collect();
    infer_with(&all, doc, config)
}

fn infer_with(
    schemas: &[&Schema],
    doc: &DocumentGraph,
    config: &InferenceConfig,
) -> Result<DocumentInference> {
    let observed = flatten_document(doc);
    let pairs = schemas
        .par_iter()
        .map(|s| match_schema(s, doc, &observed, config))
        .collect::<Result<Vec<_>>>()?;
    let (mut results, diagnostics): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let by_id: BTreeMap<&str, &Schema> = schemas.iter().map(|s| (s.id.as_str(), *s)).collect();
    predict_events(&mut results, &by_id);
    results.sort_by(|a, b| {
        b.theta
            .total_cmp(&a.theta)
            .then_with(|| a.schema_id.cmp(&b.schema_id))
    });
    Ok(DocumentInference {
        doc_id: doc.doc_id.clone(),
        results,
        diagnostics,
    })
}

/// Runs [`infer_document`] over a corpus; documents are independent.
pub fn infer_corpus(
    library: &[Schema],
    docs: &[DocumentGraph],
    config: &InferenceConfig,
) -> Result<Vec<DocumentInference>> {
    let index = SchemaIndex::build(library);
    if index.is_empty() {
        return Err(Error::EmptyIndex);
    }
    docs.par_iter()
        .map(|d| infer_document(library, &index, d, config))
        .collect()
}

#[cfg(test)]
mod tests;
