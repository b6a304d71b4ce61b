use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scorer::PairScorer;
use crate::error::{Error, Result};
use crate::mining::FrequentItemset;
use crate::ontology::Ontology;
use crate::schema::{write_skeletons, SkeletonSchema};

/// Itemsets up to this size are ordered by trying every permutation.
pub const EXHAUSTIVE_ORDER_LIMIT: usize = 6;

pub const CURATION_QUEUE_FILE: &str = "curation_queue.tsv";
pub const SKELETONS_FILE: &str = "skeletons.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuilderConfig {
    pub top_sequences: usize,
    /// A sequence is kept only if one of its event types has appeared in
    /// fewer than this many higher-ranked kept sequences.
    pub reuse_cap: usize,
    pub top_chains: usize,
}

impl Default for BuilderConfig {
    fn default() -> Self {
        BuilderConfig {
            top_sequences: 100_000,
            reuse_cap: 50,
            top_chains: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSequence {
    pub events: Vec<String>,
    pub score: f64,
    /// Support of the itemset the sequence was ordered from.
    pub support: usize,
}

/// Mean pairwise compatibility over ordered pairs `i < j`:
/// `2 / (N (N - 1)) * sum cscore(e_i, e_j)`.
pub fn score_sequence<S: AsRef<str>>(events: &[S], scorer: &dyn PairScorer) -> Result<f64> {
    let n = events.len();
    if n < 2 {
        return Err(Error::Precondition(format!(
            "a sequence needs at least 2 events to be scored, got {n}"
        )));
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += scorer.cscore(events[i].as_ref(), events[j].as_ref());
        }
    }
    Ok(2.0 / (n * (n - 1)) as f64 * sum)
}

/// Rearranges `perm` into the next lexicographic permutation; false once
/// the last one has been reached.
fn next_permutation(perm: &mut [usize]) -> bool {
    let Some(i) = perm.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = perm
        .iter()
        .rposition(|&x| x > perm[i])
        .expect("pivot has a successor");
    perm.swap(i, j);
    perm[i + 1..].reverse();
    true
}

fn pair_sum(order: &[usize], table: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            sum += table[order[i] * n + order[j]];
        }
    }
    sum
}

/// Orders an itemset into the sequence of maximal score.
///
/// Up to [`EXHAUSTIVE_ORDER_LIMIT`] items every permutation is tried and the
/// lexicographically smallest maximizer wins. Larger sets are built by
/// greedy insertion of the sorted items, each at its best position
/// (earliest on ties).
pub fn order_itemset<S: AsRef<str>>(items: &[S], scorer: &dyn PairScorer) -> Result<Vec<String>> {
    let mut sorted: Vec<&str> = items.iter().map(AsRef::as_ref).collect();
    sorted.sort_unstable();
    sorted.dedup();
    let n = sorted.len();
    if n < 2 {
        return Err(Error::Precondition(format!(
            "an itemset needs at least 2 distinct items to be ordered, got {n}"
        )));
    }
    let table: Vec<f64> = sorted
        .iter()
        .flat_map(|a| sorted.iter().map(move |b| (a, b)))
        .map(|(a, b)| scorer.cscore(a, b))
        .collect();

    let best: Vec<usize> = if n <= EXHAUSTIVE_ORDER_LIMIT {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = perm.clone();
        let mut best_sum = pair_sum(&perm, &table, n);
        while next_permutation(&mut perm) {
            let sum = pair_sum(&perm, &table, n);
            if sum > best_sum {
                best_sum = sum;
                best.clone_from(&perm);
            }
        }
        best
    } else {
        let mut order = vec![0usize];
        for item in 1..n {
            let mut best_pos = 0;
            let mut best_sum = f64::NEG_INFINITY;
            for pos in 0..=order.len() {
                order.insert(pos, item);
                let sum = pair_sum(&order, &table, n);
                order.remove(pos);
                if sum > best_sum {
                    best_sum = sum;
                    best_pos = pos;
                }
            }
            order.insert(best_pos, item);
        }
        order
    };
    Ok(best.into_iter().map(|i| sorted[i].to_string()).collect())
}

/// Orders and scores every itemset with at least two items.
pub fn candidates_from_itemsets(
    itemsets: &[FrequentItemset],
    scorer: &dyn PairScorer,
) -> Result<Vec<CandidateSequence>> {
    itemsets
        .par_iter()
        .filter(|set| set.items.len() >= 2)
        .map(|set| {
            let events = order_itemset(&set.items, scorer)?;
            let score = score_sequence(&events, scorer)?;
            Ok(CandidateSequence {
                events,
                score,
                support: set.support,
            })
        })
        .collect()
}

fn by_rank(a: &CandidateSequence, b: &CandidateSequence) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.events.cmp(&b.events))
}

/// Keeps the `top_sequences` best candidates, then drops every sequence
/// whose event types have all been used `reuse_cap` times by kept
/// sequences ranked above it. Output is in rank order.
pub fn rank_and_diversify(
    mut candidates: Vec<CandidateSequence>,
    config: &BuilderConfig,
) -> Vec<CandidateSequence> {
    candidates.sort_by(by_rank);
    candidates.truncate(config.top_sequences);
    let mut uses: HashMap<String, usize> = HashMap::new();
    let mut kept = Vec::new();
    for cand in candidates {
        let fresh = cand
            .events
            .iter()
            .any(|e| uses.get(e).copied().unwrap_or(0) < config.reuse_cap);
        if fresh {
            let distinct: HashSet<&String> = cand.events.iter().collect();
            for e in distinct {
                *uses.entry(e.clone()).or_insert(0) += 1;
            }
            kept.push(cand);
        }
    }
    kept
}

/// The event `e` maximizing `score(S + [e])` over `universe`, ties to the
/// smallest id.
pub fn best_extension<'u>(
    sequence: &[String],
    universe: &[&'u str],
    scorer: &dyn PairScorer,
) -> Option<&'u str> {
    // score(S + e) differs across e only in the pairs (s_i, e); the
    // normalization is shared.
    let mut sorted = universe.to_vec();
    sorted.sort_unstable();
    let mut best: Option<(&str, f64)> = None;
    for e in sorted {
        let gain: f64 = sequence.iter().map(|s| scorer.cscore(s, e)).sum();
        if best.is_none_or(|(_, g)| gain > g) {
            best = Some((e, gain));
        }
    }
    best.map(|(e, _)| e)
}

/// Joins each kept sequence `S` with the best-ranked other kept sequence
/// starting at `S`'s best extension event. A shared join event appears
/// once. Sequences with no such partner pass through unchanged.
///
/// Chains are rescored, deduplicated, ranked and truncated to
/// `top_chains`, then numbered `skel-0001`, `skel-0002`, ...
pub fn extend_chains(
    kept: &[CandidateSequence],
    universe: &[&str],
    scorer: &dyn PairScorer,
    config: &BuilderConfig,
) -> Result<Vec<SkeletonSchema>> {
    let mut ranked: Vec<usize> = (0..kept.len()).collect();
    ranked.sort_by(|&a, &b| by_rank(&kept[a], &kept[b]));
    let mut by_head: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &i in &ranked {
        if let Some(head) = kept[i].events.first() {
            by_head.entry(head.as_str()).or_default().push(i);
        }
    }

    let chains: Vec<Vec<String>> = kept
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let partner = best_extension(&s.events, universe, scorer)
                .and_then(|e| by_head.get(e))
                .and_then(|list| list.iter().copied().find(|&j| j != i));
            let mut chain = s.events.clone();
            if let Some(j) = partner {
                let tail = &kept[j].events;
                let skip = usize::from(chain.last() == tail.first());
                chain.extend(tail[skip..].iter().cloned());
            }
            chain
        })
        .collect();

    let mut seen = HashSet::new();
    let mut scored = Vec::new();
    for chain in chains {
        if chain.len() < 2 || !seen.insert(chain.clone()) {
            continue;
        }
        let score = score_sequence(&chain, scorer)?;
        scored.push(CandidateSequence {
            events: chain,
            score,
            support: 0,
        });
    }
    scored.sort_by(by_rank);
    scored.truncate(config.top_chains);
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(rank, c)| SkeletonSchema {
            id: format!("skel-{:04}", rank + 1),
            score: c.score,
            events: c.events,
        })
        .collect())
}

/// The whole pipeline from mined itemsets to ranked skeletons.
pub fn build_skeletons(
    itemsets: &[FrequentItemset],
    universe: &[&str],
    scorer: &dyn PairScorer,
    config: &BuilderConfig,
) -> Result<Vec<SkeletonSchema>> {
    let candidates = candidates_from_itemsets(itemsets, scorer)?;
    let kept = rank_and_diversify(candidates, config);
    extend_chains(&kept, universe, scorer, config)
}

/// One line per skeleton: rank, score, event labels joined by ` > `, id.
/// Event types missing from the ontology are shown by id.
pub fn render_curation_queue(chains: &[SkeletonSchema], ontology: &Ontology) -> String {
    let mut out = String::new();
    for (rank, chain) in chains.iter().enumerate() {
        let labels: Vec<&str> = chain
            .events
            .iter()
            .map(|e| {
                ontology
                    .event_type(e)
                    .map_or(e.as_str(), |d| d.label.as_str())
            })
            .collect();
        out.push_str(&format!(
            "{}\t{:.6}\t{}\t{}\n",
            rank + 1,
            chain.score,
            labels.join(" > "),
            chain.id
        ));
    }
    out
}

/// Writes the human-readable queue and the machine-readable skeleton file
/// into `dir`.
pub fn export_curation_queue(
    chains: &[SkeletonSchema],
    ontology: &Ontology,
    dir: &Path,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let queue = dir.join(CURATION_QUEUE_FILE);
    fs::write(&queue, render_curation_queue(chains, ontology)).map_err(|e| Error::io(&queue, e))?;
    let skeletons = dir.join(SKELETONS_FILE);
    fs::write(&skeletons, write_skeletons(chains)).map_err(|e| Error::io(&skeletons, e))
}
