use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::files::AnswerKey;
use crate::error::{Error, Result};

/// The three annotator picks for one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseSet {
    pub task_id: String,
    pub picks: [usize; 3],
}

/// Expected accuracies of uniform guessing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub random: f64,
    /// At least n of three independent guesses correct.
    pub random_1: f64,
    pub random_2: f64,
    pub random_3: f64,
}

/// Guessing accuracies for one task whose intruder is picked with
/// probability `p` by each of three independent annotators.
pub fn baselines_for_p(p: f64) -> Baselines {
    let q = 1.0 - p;
    Baselines {
        random: p,
        random_1: 1.0 - q.powi(3),
        random_2: 3.0 * p * p * q + p.powi(3),
        random_3: p.powi(3),
    }
}

/// Per task with k host steps the intruder is one of k + 1 options; each
/// value is a mean over tasks. Zero tasks give all zeros.
pub fn random_baselines(host_step_counts: &[usize]) -> Baselines {
    let mut sum = Baselines {
        random: 0.0,
        random_1: 0.0,
        random_2: 0.0,
        random_3: 0.0,
    };
    if host_step_counts.is_empty() {
        return sum;
    }
    for &k in host_step_counts {
        let b = baselines_for_p(1.0 / (k + 1) as f64);
        sum.random += b.random;
        sum.random_1 += b.random_1;
        sum.random_2 += b.random_2;
        sum.random_3 += b.random_3;
    }
    let n = host_step_counts.len() as f64;
    Baselines {
        random: sum.random / n,
        random_1: sum.random_1 / n,
        random_2: sum.random_2 / n,
        random_3: sum.random_3 / n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub n_tasks: usize,
    /// Correct picks over all picks.
    pub total: f64,
    /// Tasks where at least one, two or all three picks are correct.
    pub one_ann: f64,
    pub two_ann: f64,
    pub all_ann: f64,
    pub baselines: Baselines,
}

/// Scores responses against the answer key. Every keyed task needs exactly
/// one response set, and picks must index a shown step.
pub fn score_responses(key: &AnswerKey, responses: &[ResponseSet]) -> Result<AccuracyReport> {
    let mut by_task: BTreeMap<&str, &ResponseSet> = BTreeMap::new();
    for r in responses {
        let entry = key.get(&r.task_id).ok_or_else(|| {
            Error::Precondition(format!("response for unknown task `{}`", r.task_id))
        })?;
        if let Some(p) = r.picks.iter().find(|&&p| p >= entry.n_shown) {
            return Err(Error::Precondition(format!(
                "pick {p} out of range for task `{}` with {} steps",
                r.task_id, entry.n_shown
            )));
        }
        if by_task.insert(&r.task_id, r).is_some() {
            return Err(Error::Precondition(format!(
                "duplicate responses for task `{}`",
                r.task_id
            )));
        }
    }
    if let Some(missing) = key.keys().find(|t| !by_task.contains_key(t.as_str())) {
        return Err(Error::Precondition(format!(
            "no responses for task `{missing}`"
        )));
    }
    let n = key.len();
    if n == 0 {
        return Err(Error::Precondition("no tasks to score".into()));
    }
    let mut correct_votes = 0usize;
    let mut at_least = [0usize; 4];
    for (task, entry) in key {
        let hits = by_task[task.as_str()]
            .picks
            .iter()
            .filter(|&&p| p == entry.answer_index)
            .count();
        correct_votes += hits;
        for slot in at_least.iter_mut().take(hits + 1).skip(1) {
            *slot += 1;
        }
    }
    let steps: Vec<usize> = key.values().map(|e| e.n_shown - 1).collect();
    let nf = n as f64;
    Ok(AccuracyReport {
        n_tasks: n,
        total: correct_votes as f64 / (3.0 * nf),
        one_ann: at_least[1] as f64 / nf,
        two_ann: at_least[2] as f64 / nf,
        all_ann: at_least[3] as f64 / nf,
        baselines: random_baselines(&steps),
    })
}
