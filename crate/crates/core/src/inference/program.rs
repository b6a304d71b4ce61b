use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::atoms::{Atom, Observations, UNK_ENTITY, UNK_EVENT};
use crate::error::{Error, Result};
use crate::ingest::DocumentGraph;
use crate::schema::Schema;

pub const STEP_RULE_WEIGHT: f64 = 100.0;
pub const SCHEMA_RULE_WEIGHT: f64 = 10.0;
pub const PRIOR_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Step,
    Schema,
    Prior,
}

/// `weight: head <- body[0] & body[1] & ...`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundRule {
    pub kind: RuleKind,
    pub body: Vec<Atom>,
    pub head: Atom,
    pub weight: f64,
}

impl GroundRule {
    pub fn new(kind: RuleKind, body: Vec<Atom>, head: Atom) -> Self {
        let weight = match kind {
            RuleKind::Step => STEP_RULE_WEIGHT,
            RuleKind::Schema => SCHEMA_RULE_WEIGHT,
            RuleKind::Prior => PRIOR_WEIGHT,
        };
        GroundRule {
            kind,
            body,
            head,
            weight,
        }
    }

    /// Negative prior on `atom`: `atom -> false`.
    pub fn prior(atom: Atom) -> Self {
        Self::new(RuleKind::Prior, vec![atom], Atom::falsum())
    }
}

/// Truths for atoms involving UNK constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnkTruths {
    /// `EventType(UNK_event)`: what an unmatched step is worth.
    pub event: f64,
    /// Role atoms with a UNK event or entity.
    pub role: f64,
}

impl Default for UnkTruths {
    fn default() -> Self {
        UnkTruths {
            event: 0.1,
            role: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundingCaps {
    /// Maximum groundings per (schema, document).
    pub max_groundings: usize,
    pub unk: UnkTruths,
}

impl Default for GroundingCaps {
    fn default() -> Self {
        GroundingCaps {
            max_groundings: 512,
            unk: UnkTruths::default(),
        }
    }
}

/// One binding of a schema's steps to events and participants to entities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    /// Event id or `UNK_event`, per step in schema order.
    pub steps: Vec<String>,
    /// Entity id or `UNK_entity`, per participant in schema order.
    pub participants: Vec<String>,
    pub step_atoms: Vec<Atom>,
    pub schema_atom: Atom,
}

impl Grounding {
    pub fn matched_steps(&self) -> usize {
        self.steps.iter().filter(|e| *e != UNK_EVENT).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLogicProgram {
    pub observed: BTreeMap<Atom, f64>,
    /// Open atoms, in variable order.
    pub targets: Vec<Atom>,
    pub rules: Vec<GroundRule>,
    pub groundings: Vec<Grounding>,
    /// Set when the grounding cap pruned candidate bindings.
    pub truncated: bool,
}

impl SoftLogicProgram {
    /// Builds a program from rules; every atom not listed in `observed`
    /// becomes a target.
    pub fn from_rules(observed: BTreeMap<Atom, f64>, rules: Vec<GroundRule>) -> Self {
        let mut seen = HashSet::new();
        let mut targets = Vec::new();
        for rule in &rules {
            for atom in rule.body.iter().chain(std::iter::once(&rule.head)) {
                if !observed.contains_key(atom) && seen.insert(atom.clone()) {
                    targets.push(atom.clone());
                }
            }
        }
        SoftLogicProgram {
            observed,
            targets,
            rules,
            groundings: Vec::new(),
            truncated: false,
        }
    }

    pub fn rules_of(&self, kind: RuleKind) -> impl Iterator<Item = &GroundRule> {
        self.rules.iter().filter(move |r| r.kind == kind)
    }
}

/// Step predicate name: `<schema id>/<step id>`.
pub fn step_predicate(schema: &Schema, step_index: usize) -> String {
    format!("{}/{}", schema.id, schema.steps[step_index].id)
}

/// Distinct participants of a step, in filler order.
fn step_participants(schema: &Schema, step_index: usize) -> Vec<usize> {
    let index: HashMap<&str, usize> = schema
        .participants
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i))
        .collect();
    let mut out = Vec::new();
    for pids in schema.steps[step_index].fillers.values() {
        for pid in pids {
            if let Some(&i) = index.get(pid.as_str()) {
                if !out.contains(&i) {
                    out.push(i);
                }
            }
        }
    }
    out
}

/// The rule templates of a schema with variables in place of constants:
/// `<step>_event` for step events and participant names for participants.
pub fn render_rule_templates(schema: &Schema) -> String {
    let name_of = |pid: &str| {
        schema
            .participants
            .iter()
            .find(|p| p.id == pid)
            .map_or(pid.to_string(), |p| p.name.clone())
    };
    let mut out = String::new();
    let mut step_heads = Vec::new();
    for (i, step) in schema.steps.iter().enumerate() {
        let ev = format!("{}_event", step.id);
        let mut args = vec![ev.clone()];
        args.extend(
            step_participants(schema, i)
                .into_iter()
                .map(|p| schema.participants[p].name.clone()),
        );
        let head = Atom::new(step_predicate(schema, i), args);
        let mut body = vec![Atom::event(&step.event_type, &ev).to_string()];
        for (role, pids) in &step.fillers {
            for pid in pids {
                body.push(Atom::role(&step.event_type, role, &ev, &name_of(pid)).to_string());
            }
        }
        out.push_str(&format!(
            "{STEP_RULE_WEIGHT}: {head}\n    <- {}\n",
            body.join("\n    & ")
        ));
        step_heads.push(head);
    }
    let schema_head = Atom::new(
        schema.id.clone(),
        schema
            .steps
            .iter()
            .map(|s| format!("{}_event", s.id))
            .collect(),
    );
    let body: Vec<String> = step_heads.iter().map(Atom::to_string).collect();
    out.push_str(&format!(
        "{SCHEMA_RULE_WEIGHT}: {schema_head}\n    <- {}\n",
        body.join("\n    & ")
    ));
    for head in step_heads.iter().chain(std::iter::once(&schema_head)) {
        out.push_str(&format!("{PRIOR_WEIGHT}: !{head}\n"));
    }
    out
}

/// Partial assignment during beam search, ranked by matched steps, then
/// supported role atoms, then summed event confidence.
#[derive(Clone)]
struct State {
    steps: Vec<usize>,
    participants: Vec<usize>,
    matched: usize,
    support: usize,
    confidence: f64,
}

impl State {
    fn rank(&self, other: &Self) -> Ordering {
        other
            .matched
            .cmp(&self.matched)
            .then(other.support.cmp(&self.support))
            .then(other.confidence.total_cmp(&self.confidence))
    }
}

const UNK: usize = usize::MAX;

/// Enumerates bindings of `schema` against `doc` and encodes them as one
/// program.
///
/// Each step may bind to any document event of its type (an event fills
/// at most one step) or to `UNK_event`; each participant may bind to an
/// entity that fills one of its roles in a bound event and is not bound to
/// another participant, or to `UNK_entity`.
/// A beam keeps the `max_groundings` best partial bindings after every
/// decision; [`SoftLogicProgram::truncated`] records whether it pruned.
pub fn ground_schema(
    schema: &Schema,
    doc: &DocumentGraph,
    observed: &Observations,
    caps: &GroundingCaps,
) -> Result<SoftLogicProgram> {
    if schema.steps.is_empty() {
        return Err(Error::Precondition(format!(
            "schema `{}` has no steps",
            schema.id
        )));
    }
    let cap = caps.max_groundings.max(1);
    let n_parts = schema.participants.len();
    let part_index: HashMap<&str, usize> = schema
        .participants
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i))
        .collect();
    // (step, role) pairs each participant fills.
    let mut fills: Vec<Vec<(usize, &str)>> = vec![Vec::new(); n_parts];
    for (s, step) in schema.steps.iter().enumerate() {
        for (role, pids) in &step.fillers {
            for pid in pids {
                if let Some(&p) = part_index.get(pid.as_str()) {
                    fills[p].push((s, role.as_str()));
                }
            }
        }
    }
    let truth_of = |atom: &Atom| observed.get(atom).copied().unwrap_or(0.0);

    let mut truncated = false;
    let mut beam = vec![State {
        steps: Vec::new(),
        participants: Vec::new(),
        matched: 0,
        support: 0,
        confidence: 0.0,
    }];
    let prune = |mut next: Vec<State>, truncated: &mut bool| {
        next.sort_by(State::rank);
        if next.len() > cap {
            *truncated = true;
            next.truncate(cap);
        }
        next
    };

    for step in &schema.steps {
        let mut candidates: Vec<(usize, f64)> = doc
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| e.event_type == step.event_type)
            .map(|(i, e)| (i, e.confidence))
            .collect();
        candidates.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then(doc.events[a.0].id.cmp(&doc.events[b.0].id))
        });
        let mut next = Vec::new();
        for state in &beam {
            for &(ev, conf) in &candidates {
                if state.steps.contains(&ev) {
                    continue;
                }
                let mut s = state.clone();
                s.steps.push(ev);
                s.matched += 1;
                s.confidence += conf;
                next.push(s);
            }
            let mut s = state.clone();
            s.steps.push(UNK);
            next.push(s);
        }
        beam = prune(next, &mut truncated);
    }

    let entity_ids: Vec<&String> = doc.entities.iter().collect();
    let entity_index: HashMap<&str, usize> = entity_ids
        .iter()
        .enumerate()
        .map(|(i, e)| (e.as_str(), i))
        .collect();
    // Per event: role -> entities observed in it with positive truth.
    let role_fillers: Vec<HashMap<&str, BTreeSet<usize>>> = doc
        .events
        .iter()
        .map(|event| {
            let mut by_role: HashMap<&str, BTreeSet<usize>> = HashMap::new();
            for p in &event.participants {
                for v in &p.entity_values {
                    if v.confidence > 0.0 {
                        if let Some(&e) = entity_index.get(v.entity.as_str()) {
                            by_role.entry(p.role.as_str()).or_default().insert(e);
                        }
                    }
                }
            }
            by_role
        })
        .collect();
    for fill in fills.iter().take(n_parts) {
        let mut next = Vec::new();
        for state in &beam {
            let mut options: BTreeMap<usize, usize> = BTreeMap::new();
            for &(s, role) in fill {
                let ev = state.steps[s];
                if ev == UNK {
                    continue;
                }
                for &e in role_fillers[ev].get(role).into_iter().flatten() {
                    *options.entry(e).or_insert(0) += 1;
                }
            }
            let mut options: Vec<(usize, usize)> = options.into_iter().collect();
            options.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            for (e, support) in options {
                if state.participants.contains(&e) {
                    continue;
                }
                let mut s = state.clone();
                s.participants.push(e);
                s.support += support;
                next.push(s);
            }
            let mut s = state.clone();
            s.participants.push(UNK);
            next.push(s);
        }
        beam = prune(next, &mut truncated);
    }

    let step_parts: Vec<Vec<usize>> = (0..schema.steps.len())
        .map(|s| step_participants(schema, s))
        .collect();
    let unk_role = caps.unk.role;
    let unk_event = caps.unk.event;

    let mut program_observed = BTreeMap::new();
    program_observed.insert(Atom::falsum(), 0.0);
    let mut rules = Vec::new();
    let mut rule_keys = HashSet::new();
    let mut groundings = Vec::with_capacity(beam.len());
    let mut targets_seen = BTreeSet::new();

    for state in &beam {
        let events: Vec<String> = state
            .steps
            .iter()
            .map(|&i| {
                if i == UNK {
                    UNK_EVENT.to_string()
                } else {
                    doc.events[i].id.clone()
                }
            })
            .collect();
        let entities: Vec<String> = state
            .participants
            .iter()
            .map(|&i| {
                if i == UNK {
                    UNK_ENTITY.to_string()
                } else {
                    entity_ids[i].clone()
                }
            })
            .collect();
        let mut step_atoms = Vec::with_capacity(schema.steps.len());
        for (s, step) in schema.steps.iter().enumerate() {
            let ev = &events[s];
            let mut args = vec![ev.clone()];
            args.extend(step_parts[s].iter().map(|&p| entities[p].clone()));
            let head = Atom::new(step_predicate(schema, s), args);
            if rule_keys.insert(head.clone()) {
                let type_atom = Atom::event(&step.event_type, ev);
                let t = if type_atom.has_unk() {
                    unk_event
                } else {
                    truth_of(&type_atom)
                };
                program_observed.insert(type_atom.clone(), t);
                let mut body = vec![type_atom];
                for (role, pids) in &step.fillers {
                    for pid in pids {
                        let ent = part_index
                            .get(pid.as_str())
                            .map_or(UNK_ENTITY, |&p| entities[p].as_str());
                        let atom = Atom::role(&step.event_type, role, ev, ent);
                        let t = if atom.has_unk() {
                            unk_role
                        } else {
                            truth_of(&atom)
                        };
                        program_observed.insert(atom.clone(), t);
                        body.push(atom);
                    }
                }
                rules.push(GroundRule::new(RuleKind::Step, body, head.clone()));
            }
            step_atoms.push(head);
        }
        let schema_atom = Atom::new(schema.id.clone(), events.clone());
        if rule_keys.insert(schema_atom.clone()) {
            rules.push(GroundRule::new(
                RuleKind::Schema,
                step_atoms.clone(),
                schema_atom.clone(),
            ));
        }
        for atom in step_atoms.iter().chain(std::iter::once(&schema_atom)) {
            if targets_seen.insert(atom.clone()) {
                rules.push(GroundRule::prior(atom.clone()));
            }
        }
        groundings.push(Grounding {
            steps: events,
            participants: entities,
            step_atoms,
            schema_atom,
        });
    }

    let mut program = SoftLogicProgram::from_rules(program_observed, rules);
    program.groundings = groundings;
    program.truncated = truncated;
    Ok(program)
}
