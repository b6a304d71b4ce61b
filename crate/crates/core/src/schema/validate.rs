use std::collections::{BTreeMap, BTreeSet, HashMap};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::{OrderingKind, Schema};
use crate::ontology::Ontology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    /// Id of the offending step, participant or relation (`relation[i]`,
    /// `order[i]`), or the schema id for schema-level issues.
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Warning)
    }
}

#[derive(Default)]
struct Collector {
    issues: Vec<Issue>,
}

impl Collector {
    fn error(&mut self, location: &str, message: String) {
        self.push(Severity::Error, location, message);
    }

    fn warning(&mut self, location: &str, message: String) {
        self.push(Severity::Warning, location, message);
    }

    fn push(&mut self, severity: Severity, location: &str, message: String) {
        self.issues.push(Issue {
            severity,
            location: location.to_string(),
            message,
        });
    }

    fn finish(self) -> ValidationReport {
        let ok = !self.issues.iter().any(|i| i.severity == Severity::Error);
        ValidationReport {
            ok,
            issues: self.issues,
        }
    }
}

fn fmt_set(set: &BTreeSet<String>) -> String {
    let items: Vec<&str> = set.iter().map(String::as_str).collect();
    format!("{{{}}}", items.join(", "))
}

fn is_fine_type_id(id: &str) -> bool {
    let mut chars = id.chars();
    chars.next() == Some('Q') && id.len() > 1 && chars.all(|c| c.is_ascii_digit())
}

/// Result of participant type inference.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TypeInference {
    pub types: BTreeMap<String, BTreeSet<String>>,
    /// Participants whose constraints leave no admissible type.
    pub conflicts: Vec<String>,
}

/// Intersects, per participant, the allowed entity types of every role it
/// fills, then the participant's declared coarse types (when any). A
/// participant constrained by nothing may be any entity type.
pub fn infer_participant_types(schema: &Schema, ontology: &Ontology) -> TypeInference {
    let universe: BTreeSet<String> = ontology.entity_types.iter().map(|e| e.id.clone()).collect();
    let mut constraints: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for step in &schema.steps {
        let Some(event) = ontology.event_type(&step.event_type) else {
            continue;
        };
        for (role_name, fillers) in &step.fillers {
            let Some(role) = event.role(role_name) else {
                continue;
            };
            for p in fillers {
                let entry = constraints
                    .entry(p.as_str())
                    .or_insert_with(|| universe.clone());
                entry.retain(|t| role.allowed_entity_types.contains(t));
            }
        }
    }

    let mut out = TypeInference::default();
    for participant in &schema.participants {
        let mut types = constraints
            .get(participant.id.as_str())
            .cloned()
            .unwrap_or_else(|| universe.clone());
        if !participant.coarse_types.is_empty() {
            types.retain(|t| participant.coarse_types.contains(t));
        }
        if types.is_empty() {
            out.conflicts.push(participant.id.clone());
        }
        out.types.insert(participant.id.clone(), types);
    }
    out
}

/// Type-checks a schema against the ontology.
///
/// Problems are reported, never thrown: the report is what the editor
/// highlights while the annotator works.
pub fn validate_schema(schema: &Schema, ontology: &Ontology) -> ValidationReport {
    let mut c = Collector::default();
    let sid = schema.id.as_str();

    if schema.id.is_empty() {
        c.error(sid, "schema id is empty".into());
    }
    if schema.name.trim().is_empty() {
        c.error(sid, "schema name is empty".into());
    }
    if schema.description.trim().is_empty() {
        c.warning(sid, "schema has no description".into());
    }
    if schema.steps.is_empty() {
        c.error(sid, "schema has no steps".into());
    }

    let mut step_ids = BTreeSet::new();
    for step in &schema.steps {
        if !step_ids.insert(step.id.as_str()) {
            c.error(&step.id, format!("duplicate step id `{}`", step.id));
        }
    }
    let mut participant_ids = BTreeSet::new();
    for p in &schema.participants {
        if !participant_ids.insert(p.id.as_str()) {
            c.error(&p.id, format!("duplicate participant id `{}`", p.id));
        }
        if p.name.trim().is_empty() {
            c.error(&p.id, "participant name is empty".into());
        }
        if p.coarse_types.is_empty() {
            c.warning(
                &p.id,
                format!("participant `{}` has no coarse types", p.name),
            );
        }
        for ty in &p.coarse_types {
            if ontology.entity_type(ty).is_none() {
                c.error(&p.id, format!("unknown coarse type `{ty}`"));
            }
        }
        for ty in &p.fine_types {
            if !is_fine_type_id(ty) {
                c.error(
                    &p.id,
                    format!("fine type `{ty}` is not an external id of the form Q<digits>"),
                );
            }
        }
    }

    // Steps: event types, roles, cardinalities, declared-type conflicts.
    let mut referenced: BTreeSet<&str> = BTreeSet::new();
    let mut declared_conflict: BTreeSet<&str> = BTreeSet::new();
    for step in &schema.steps {
        if step.description.trim().is_empty() {
            c.warning(&step.id, "step has no description".into());
        }
        for p in step.fillers.values().flatten() {
            referenced.insert(p.as_str());
            if !participant_ids.contains(p.as_str()) {
                c.error(
                    &step.id,
                    format!("filler references unknown participant `{p}`"),
                );
            }
        }
        let Some(event) = ontology.event_type(&step.event_type) else {
            c.error(
                &step.id,
                format!("unknown event type `{}`", step.event_type),
            );
            continue;
        };
        for (role_name, fillers) in &step.fillers {
            let Some(role) = event.role(role_name) else {
                c.error(
                    &step.id,
                    format!("event type `{}` has no role `{role_name}`", event.id),
                );
                continue;
            };
            if !role.max_fillers.admits(fillers.len()) {
                c.error(
                    &step.id,
                    format!(
                        "role `{role_name}` has {} filler(s); at most {} allowed",
                        fillers.len(),
                        role.max_fillers
                    ),
                );
            }
            let mut seen = BTreeSet::new();
            for p in fillers {
                if !seen.insert(p) {
                    c.warning(
                        &step.id,
                        format!("participant `{p}` fills role `{role_name}` twice"),
                    );
                }
                let Some(participant) = schema.participant(p) else {
                    continue;
                };
                if !participant.coarse_types.is_empty()
                    && participant
                        .coarse_types
                        .is_disjoint(&role.allowed_entity_types)
                {
                    declared_conflict.insert(participant.id.as_str());
                    c.error(
                        &step.id,
                        format!(
                            "step `{}` role `{role_name}`: participant `{}` has types {} but the role allows {}",
                            step.id,
                            participant.name,
                            fmt_set(&participant.coarse_types),
                            fmt_set(&role.allowed_entity_types)
                        ),
                    );
                }
            }
        }
        for role in &event.roles {
            let count = step.fillers.get(&role.name).map_or(0, Vec::len);
            if count < role.min_fillers as usize {
                // Unfilled required slots are expected while a skeleton is
                // being fleshed out, so they do not block saving.
                c.warning(
                    &step.id,
                    format!(
                        "role `{}` has {count} filler(s); at least {} expected",
                        role.name, role.min_fillers
                    ),
                );
            }
        }
    }

    for p in &schema.participants {
        if !referenced.contains(p.id.as_str()) {
            c.error(&p.id, format!("participant `{}` fills no role", p.name));
        }
    }

    let inference = infer_participant_types(schema, ontology);
    for id in &inference.conflicts {
        if declared_conflict.contains(id.as_str()) || !referenced.contains(id.as_str()) {
            continue;
        }
        c.error(
            id,
            format!("participant `{id}` fills roles whose allowed types have no common type"),
        );
    }

    for (i, rel) in schema.relations.iter().enumerate() {
        let loc = format!("relation[{i}]");
        let def = ontology.relation_type(&rel.relation_type);
        if def.is_none() {
            c.error(
                &loc,
                format!("unknown relation type `{}`", rel.relation_type),
            );
        }
        for (side, pid) in [("subject", &rel.subject), ("object", &rel.object)] {
            if !participant_ids.contains(pid.as_str()) {
                c.error(
                    &loc,
                    format!("{side} references unknown participant `{pid}`"),
                );
                continue;
            }
            let Some(def) = def else { continue };
            let allowed = if side == "subject" {
                &def.subject_types
            } else {
                &def.object_types
            };
            let types = &inference.types[pid];
            if !types.is_empty() && types.is_disjoint(allowed) {
                c.error(
                    &loc,
                    format!(
                        "relation `{}` {side} `{pid}` has types {} but {} are allowed",
                        def.id,
                        fmt_set(types),
                        fmt_set(allowed)
                    ),
                );
            }
        }
    }

    check_orderings(schema, &step_ids, &mut c);
    c.finish()
}

fn check_orderings(schema: &Schema, step_ids: &BTreeSet<&str>, c: &mut Collector) {
    let mut exclusive_owner: HashMap<&str, usize> = HashMap::new();
    let mut graph: DiGraph<&str, ()> = DiGraph::new();
    let mut nodes = HashMap::new();
    for step in &schema.steps {
        nodes
            .entry(step.id.as_str())
            .or_insert_with(|| graph.add_node(step.id.as_str()));
    }

    for (i, order) in schema.orderings.iter().enumerate() {
        let loc = format!("order[{i}]");
        if order.members.len() < 2 {
            c.error(&loc, "ordering constraint needs at least 2 members".into());
        }
        for m in &order.members {
            if !step_ids.contains(m.as_str()) {
                c.error(&loc, format!("ordering references unknown step `{m}`"));
            }
        }
        match order.kind {
            OrderingKind::ExclusiveGroup => {
                for m in &order.members {
                    if let Some(prev) = exclusive_owner.insert(m.as_str(), i) {
                        if prev != i {
                            c.error(
                                &loc,
                                format!("step `{m}` appears in exclusive groups order[{prev}] and order[{i}]"),
                            );
                        }
                    }
                }
            }
            OrderingKind::Linear => {
                for pair in order.members.windows(2) {
                    let (Some(&a), Some(&b)) =
                        (nodes.get(pair[0].as_str()), nodes.get(pair[1].as_str()))
                    else {
                        continue;
                    };
                    graph.add_edge(a, b, ());
                }
            }
            OrderingKind::UnorderedGroup => {}
        }
    }

    for scc in tarjan_scc(&graph) {
        let self_loop = scc.len() == 1 && graph.contains_edge(scc[0], scc[0]);
        if scc.len() > 1 || self_loop {
            let mut members: Vec<&str> = scc.iter().map(|&n| graph[n]).collect();
            members.sort_unstable();
            c.error(
                members[0],
                format!("ordering cycle among steps [{}]", members.join(", ")),
            );
        }
    }
}
