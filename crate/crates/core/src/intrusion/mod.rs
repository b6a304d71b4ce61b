//! Schema-intrusion tasks: a step from another schema, with its
//! participants remapped onto the host's, hidden among the host's steps.

mod files;
mod rename;
mod score;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inference::{is_unk, MatchResult};
use crate::schema::{Schema, Step};

pub use files::{
    read_answer_key, read_responses, read_tasks, write_answer_key, write_review, write_task_export,
    write_tasks, AnswerKey, AnswerKeyEntry, ExportedTask, ResponseRecord,
};
pub use rename::{rename_step, Renamed};
pub use score::{
    baselines_for_p, random_baselines, score_responses, AccuracyReport, Baselines, ResponseSet,
};

/// Intruder participant id to host participant id, total over the
/// intruder step's participants.
pub type ParticipantMap = BTreeMap<String, String>;

/// Jaccard index, with J(∅, ∅) = 0.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Geometric mean of per-pair overlaps. An empty map weighs 1: nothing
/// argues against the swap.
pub fn geometric_weight(overlaps: impl IntoIterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let mut log_sum = 0.0;
    for j in overlaps {
        if j <= 0.0 {
            return 0.0;
        }
        n += 1;
        log_sum += j.ln();
    }
    if n == 0 {
        1.0
    } else {
        (log_sum / n as f64).exp()
    }
}

fn participant_types(schema: &Schema, id: &str) -> BTreeSet<String> {
    schema
        .participant(id)
        .map(|p| p.coarse_types.clone())
        .unwrap_or_default()
}

/// Type-overlap weight of remapping `source` participants onto `host`
/// participants, using coarse entity types.
pub fn library_weight(map: &ParticipantMap, source: &Schema, host: &Schema) -> f64 {
    geometric_weight(
        map.iter()
            .map(|(x, y)| jaccard(&participant_types(source, x), &participant_types(host, y))),
    )
}

/// Entity sets bound to a schema's participants in one document.
pub type EntityBindings = BTreeMap<String, BTreeSet<String>>;

/// Entity-overlap weight of a remapping within one document both schemas
/// match. Unbound participants have the empty set and force weight 0.
pub fn corpus_weight(map: &ParticipantMap, source: &EntityBindings, host: &EntityBindings) -> f64 {
    let empty = BTreeSet::new();
    geometric_weight(map.iter().map(|(x, y)| {
        jaccard(
            source.get(x).unwrap_or(&empty),
            host.get(y).unwrap_or(&empty),
        )
    }))
}

/// Matched schemas per document, as needed by corpus-based sampling.
#[derive(Debug, Clone, Default)]
pub struct CorpusEvidence {
    /// Document id to extracted event count.
    pub n_events: BTreeMap<String, usize>,
    /// Document id to schema id to participant entity sets, for matches with
    /// positive confidence.
    pub matches: BTreeMap<String, BTreeMap<String, EntityBindings>>,
}

impl CorpusEvidence {
    pub fn from_results<'a>(
        n_events: BTreeMap<String, usize>,
        results: impl IntoIterator<Item = &'a MatchResult>,
    ) -> Self {
        let mut matches: BTreeMap<String, BTreeMap<String, EntityBindings>> = BTreeMap::new();
        for r in results.into_iter().filter(|r| r.theta > 0.0) {
            let bindings = r
                .bindings
                .iter()
                .map(|(p, e)| {
                    let set = if is_unk(e) {
                        BTreeSet::new()
                    } else {
                        BTreeSet::from([e.clone()])
                    };
                    (p.clone(), set)
                })
                .collect();
            matches
                .entry(r.doc_id.clone())
                .or_default()
                .insert(r.schema_id.clone(), bindings);
        }
        CorpusEvidence { n_events, matches }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Method<'a> {
    Library,
    Corpus(&'a CorpusEvidence),
}

impl Method<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Library => "library",
            Method::Corpus(_) => "corpus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntrusionConfig {
    pub seed: u64,
    pub tasks_per_schema: usize,
    /// Complete maps enumerated per (source schema, step); past this many
    /// the maps are drawn uniformly instead.
    pub map_cap: usize,
    /// Corpus documents qualify with this many events, inclusive.
    pub min_doc_events: usize,
    pub max_doc_events: usize,
}

impl Default for IntrusionConfig {
    fn default() -> Self {
        IntrusionConfig {
            seed: 0,
            tasks_per_schema: 1,
            map_cap: 10_000,
            min_doc_events: 2,
            max_doc_events: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrusionCandidate {
    pub host_schema: String,
    pub source_schema: String,
    pub step: Step,
    pub map: ParticipantMap,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrusionTask {
    pub task_id: String,
    pub host_schema: String,
    pub method: String,
    /// Host step texts plus the intruder, shuffled.
    pub steps_shown: Vec<String>,
    pub answer_index: usize,
    pub intruder: IntrusionCandidate,
    /// The intruder's text before participant renaming.
    pub original_text: String,
    pub shuffle_seed: u64,
}

/// Text shown for a step: its description, or when that is empty its type
/// with role fillers by participant name.
pub fn step_text(step: &Step, schema: &Schema) -> String {
    if !step.description.trim().is_empty() {
        return step.description.clone();
    }
    let roles: Vec<String> = step
        .fillers
        .iter()
        .filter(|(_, ps)| !ps.is_empty())
        .map(|(role, ps)| {
            let names: Vec<&str> = ps
                .iter()
                .map(|p| {
                    schema
                        .participant(p)
                        .map_or(p.as_str(), |q| q.name.as_str())
                })
                .collect();
            format!("{role}: {}", names.join(", "))
        })
        .collect();
    if roles.is_empty() {
        step.event_type.clone()
    } else {
        format!("{} ({})", step.event_type, roles.join("; "))
    }
}

/// Seed of the task rng, from the global seed, method, host schema and
/// task ordinal; independent of scheduling.
pub fn task_seed(seed: u64, method: &str, schema_id: &str, ordinal: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((ordinal as u64).to_le_bytes());
    h.update(method.as_bytes());
    h.update([0]);
    h.update(schema_id.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest has 32 bytes"))
}

/// Candidate before materialization: `map[i]` indexes host participants for
/// the i-th participant of the step.
/// A matching document with the source and host bindings in it.
type DocContext<'a> = (&'a str, &'a EntityBindings, &'a EntityBindings);

struct Draft<'a> {
    source: &'a Schema,
    step: &'a Step,
    participants: Arc<[&'a str]>,
    map: Vec<usize>,
    weight: f64,
    doc_id: Option<&'a str>,
}

fn enumerate_maps(m: usize, q: usize, cap: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![Vec::new()];
    }
    if q == 0 {
        return Vec::new();
    }
    let total = (q as f64).powi(m as i32);
    if total > cap as f64 {
        return (0..cap)
            .map(|_| (0..m).map(|_| rng.random_range(0..q)).collect())
            .collect();
    }
    // Odometer over q^m.
    let mut out = Vec::with_capacity(total as usize);
    let mut cur = vec![0usize; m];
    loop {
        out.push(cur.clone());
        let mut i = m;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < q {
                break;
            }
            cur[i] = 0;
        }
    }
}

fn drafts<'a>(
    host: &'a Schema,
    library: &'a [Schema],
    method: Method<'a>,
    config: &IntrusionConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Draft<'a>> {
    let host_ps: Vec<&str> = host.participants.iter().map(|p| p.id.as_str()).collect();
    // (source, matching document, bindings of source and host there)
    let mut contexts: Vec<(&Schema, Option<DocContext<'_>>)> = Vec::new();
    match method {
        Method::Library => contexts.extend(
            library
                .iter()
                .filter(|t| t.id != host.id)
                .map(|t| (t, None)),
        ),
        Method::Corpus(ev) => {
            for (doc, matched) in &ev.matches {
                let n = ev.n_events.get(doc).copied().unwrap_or(0);
                if n < config.min_doc_events || n > config.max_doc_events {
                    continue;
                }
                let Some(host_b) = matched.get(&host.id) else {
                    continue;
                };
                for t in library.iter().filter(|t| t.id != host.id) {
                    if let Some(src_b) = matched.get(&t.id) {
                        contexts.push((t, Some((doc.as_str(), src_b, host_b))));
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    for (source, ctx) in contexts {
        for step in &source.steps {
            let participants: Arc<[&str]> = step.participant_ids().into();
            // Overlap of each step participant with each host participant.
            let overlap: Vec<Vec<f64>> = participants
                .iter()
                .map(|x| {
                    host_ps
                        .iter()
                        .map(|y| match ctx {
                            None => {
                                jaccard(&participant_types(source, x), &participant_types(host, y))
                            }
                            Some((_, src_b, host_b)) => {
                                let empty = BTreeSet::new();
                                jaccard(
                                    src_b.get(*x).unwrap_or(&empty),
                                    host_b.get(*y).unwrap_or(&empty),
                                )
                            }
                        })
                        .collect()
                })
                .collect();
            for map in enumerate_maps(participants.len(), host_ps.len(), config.map_cap, rng) {
                let weight = geometric_weight(map.iter().enumerate().map(|(i, &j)| overlap[i][j]));
                if weight > 0.0 {
                    out.push(Draft {
                        source,
                        step,
                        participants: participants.clone(),
                        map,
                        weight,
                        doc_id: ctx.map(|c| c.0),
                    });
                }
            }
        }
    }
    out
}

fn materialize(d: &Draft<'_>, host: &Schema) -> IntrusionCandidate {
    IntrusionCandidate {
        host_schema: host.id.clone(),
        source_schema: d.source.id.clone(),
        step: d.step.clone(),
        map: d
            .participants
            .iter()
            .zip(&d.map)
            .map(|(x, &j)| (x.to_string(), host.participants[j].id.clone()))
            .collect(),
        weight: d.weight,
        doc_id: d.doc_id.map(str::to_string),
    }
}

/// The step after remapping its fillers onto host participants.
fn remapped(step: &Step, map: &ParticipantMap) -> Step {
    Step {
        fillers: step
            .fillers
            .iter()
            .map(|(role, ps)| {
                (
                    role.clone(),
                    ps.iter()
                        .map(|p| map.get(p).cloned().unwrap_or_else(|| p.clone()))
                        .collect(),
                )
            })
            .collect(),
        ..step.clone()
    }
}

/// Renamed intruder text, or `None` when the sample must be rejected: it
/// duplicates a host step or still names a participant foreign to the host.
fn accept(c: &IntrusionCandidate, source: &Schema, host: &Schema) -> Option<(String, String)> {
    let moved = remapped(&c.step, &c.map);
    if host
        .steps
        .iter()
        .any(|s| s.event_type == moved.event_type && s.fillers == moved.fillers)
    {
        return None;
    }
    let original = step_text(&c.step, source);
    let names: Vec<(String, String)> = c
        .map
        .iter()
        .filter_map(|(x, y)| {
            Some((
                source.participant(x)?.name.clone(),
                host.participant(y)?.name.clone(),
            ))
        })
        .collect();
    let host_names: BTreeSet<&str> = host.participants.iter().map(|p| p.name.as_str()).collect();
    let foreign: Vec<&str> = source
        .participants
        .iter()
        .map(|p| p.name.as_str())
        .filter(|n| !host_names.contains(n))
        .collect();
    let renamed = rename_step(&original, &names, &foreign);
    if !renamed.residual.is_empty() {
        return None;
    }
    let host_texts: BTreeSet<String> = host.steps.iter().map(|s| step_text(s, host)).collect();
    if host_texts.contains(&renamed.text) {
        return None;
    }
    Some((original, renamed.text))
}

/// Every positive-weight candidate for `host` in enumeration order, before
/// rejection. Maps beyond the cap are drawn from `seed`.
pub fn intrusion_candidates(
    host: &Schema,
    library: &[Schema],
    method: Method<'_>,
    config: &IntrusionConfig,
    seed: u64,
) -> Vec<IntrusionCandidate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    drafts(host, library, method, config, &mut rng)
        .iter()
        .map(|d| materialize(d, host))
        .collect()
}

/// Draws one intruder for `host` with probability proportional to weight
/// among acceptable candidates, then shuffles it among the host steps.
pub fn sample_intruder(
    host: &Schema,
    library: &[Schema],
    method: Method<'_>,
    config: &IntrusionConfig,
    ordinal: usize,
) -> Result<IntrusionTask> {
    if library.len() < 2 {
        return Err(Error::Precondition(
            "intrusion needs at least two schemas".into(),
        ));
    }
    let shuffle_seed = task_seed(config.seed, method.name(), &host.id, ordinal);
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    let pool = drafts(host, library, method, config, &mut rng);
    let mut weights: Vec<f64> = pool.iter().map(|d| d.weight).collect();
    // Rejection: a drawn sample that fails is zeroed and the draw repeated,
    // which samples the weights conditioned on acceptance.
    let (chosen, original, text) = loop {
        let dist = WeightedIndex::new(&weights).map_err(|_| Error::NoCandidate(host.id.clone()))?;
        let i = dist.sample(&mut rng);
        let cand = materialize(&pool[i], host);
        match accept(&cand, pool[i].source, host) {
            Some((original, text)) => break (cand, original, text),
            None => weights[i] = 0.0,
        }
    };
    let mut shown: Vec<(String, bool)> = host
        .steps
        .iter()
        .map(|s| (step_text(s, host), false))
        .collect();
    shown.push((text, true));
    shown.shuffle(&mut rng);
    let answer_index = shown
        .iter()
        .position(|(_, intruder)| *intruder)
        .expect("intruder was added");
    Ok(IntrusionTask {
        task_id: format!("{}-{}-{}", method.name(), host.id, ordinal + 1),
        host_schema: host.id.clone(),
        method: method.name().into(),
        steps_shown: shown.into_iter().map(|(t, _)| t).collect(),
        answer_index,
        intruder: chosen,
        original_text: original,
        shuffle_seed,
    })
}

/// Hosts skipped by [`generate_tasks`], with the reason.
pub type Skipped = Vec<(String, Error)>;

/// Tasks for every host schema, in library id order. Hosts without an
/// acceptable candidate are reported alongside.
pub fn generate_tasks(
    library: &[Schema],
    method: Method<'_>,
    config: &IntrusionConfig,
) -> Result<(Vec<IntrusionTask>, Skipped)> {
    if library.len() < 2 {
        return Err(Error::Precondition(
            "intrusion needs at least two schemas".into(),
        ));
    }
    let mut hosts: Vec<&Schema> = library.iter().collect();
    hosts.sort_by(|a, b| a.id.cmp(&b.id));
    let jobs: Vec<(&Schema, usize)> = hosts
        .iter()
        .flat_map(|h| (0..config.tasks_per_schema).map(move |n| (*h, n)))
        .collect();
    let outcomes: Vec<(String, Result<IntrusionTask>)> = jobs
        .par_iter()
        .map(|(h, n)| {
            (
                h.id.clone(),
                sample_intruder(h, library, method, config, *n),
            )
        })
        .collect();
    let mut tasks = Vec::new();
    let mut skipped = Vec::new();
    for (id, r) in outcomes {
        match r {
            Ok(t) => tasks.push(t),
            Err(e) => skipped.push((id, e)),
        }
    }
    Ok((tasks, skipped))
}
