use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ingest::DocumentGraph;

pub const UNK_EVENT: &str = "UNK_event";
pub const UNK_ENTITY: &str = "UNK_entity";
/// Head of every negative prior; observed at 0, so `A -> #false` costs
/// `truth(A)`.
pub const FALSUM: &str = "#false";

pub fn is_unk(constant: &str) -> bool {
    constant == UNK_EVENT || constant == UNK_ENTITY
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<String>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    /// `EventType(event)`.
    pub fn event(event_type: &str, event: &str) -> Self {
        Atom::new(event_type, vec![event.to_string()])
    }

    /// `EventType/Slots/Role(event, entity)`.
    pub fn role(event_type: &str, role: &str, event: &str, entity: &str) -> Self {
        Atom::new(
            format!("{event_type}/Slots/{role}"),
            vec![event.to_string(), entity.to_string()],
        )
    }

    pub fn falsum() -> Self {
        Atom::new(FALSUM, Vec::new())
    }

    pub fn has_unk(&self) -> bool {
        self.args.iter().any(|a| is_unk(a))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.args.join(", "))
    }
}

/// Observed truths of a flattened document.
pub type Observations = BTreeMap<Atom, f64>;

/// One unary atom per event at the event confidence and one binary atom per
/// participant value at the value confidence. Repeated atoms keep the
/// highest truth.
pub fn flatten_document(doc: &DocumentGraph) -> Observations {
    let mut out = Observations::new();
    let mut put = |atom: Atom, truth: f64| {
        let slot = out.entry(atom).or_insert(truth);
        *slot = slot.max(truth);
    };
    for event in &doc.events {
        put(Atom::event(&event.event_type, &event.id), event.confidence);
        for p in &event.participants {
            for v in &p.entity_values {
                put(
                    Atom::role(&event.event_type, &p.role, &event.id, &v.entity),
                    v.confidence,
                );
            }
        }
    }
    out
}
