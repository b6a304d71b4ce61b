use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sim, Stratum};
use crate::error::{Error, Result};
use crate::ingest::EventMultiset;
use crate::schema::Schema;

/// Gold (document, schema) pairs: a document is relevant to the schemas of
/// its complex events.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabels {
    pub by_doc: BTreeMap<String, BTreeSet<String>>,
    pub by_schema: BTreeMap<String, BTreeSet<String>>,
}

impl GoldLabels {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut gold = GoldLabels::default();
        for (doc, schema) in pairs {
            gold.by_doc
                .entry(doc.to_string())
                .or_default()
                .insert(schema.to_string());
            gold.by_schema
                .entry(schema.to_string())
                .or_default()
                .insert(doc.to_string());
        }
        gold
    }
}

/// Tab- or comma-separated `doc_id, schema_id` lines. Blank lines and lines
/// starting with `#` are skipped.
pub fn read_gold_labels(text: &str) -> Result<GoldLabels> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(['\t', ',']).map(str::trim);
        match (fields.next(), fields.next(), fields.next()) {
            (Some(d), Some(s), None) if !d.is_empty() && !s.is_empty() => pairs.push((d, s)),
            _ => {
                return Err(Error::format(
                    "gold labels",
                    i + 1,
                    "expected `doc_id<TAB>schema_id`",
                ))
            }
        }
    }
    Ok(GoldLabels::from_pairs(pairs))
}

fn sort_ranking(mut ranking: Vec<(String, f64)>) -> Vec<(String, f64)> {
    ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranking
}

/// Library schemas by descending sim to `doc`, ties by schema id.
pub fn rank_schemas(doc: &EventMultiset, library: &[Schema]) -> Vec<(String, f64)> {
    sort_ranking(
        library
            .iter()
            .map(|s| (s.id.clone(), sim(doc, &s.event_type_set())))
            .collect(),
    )
}

/// Corpus documents by descending sim to `schema`, ties by document id.
pub fn rank_documents(schema: &Schema, corpus: &[EventMultiset]) -> Vec<(String, f64)> {
    let types = schema.event_type_set();
    sort_ranking(
        corpus
            .iter()
            .map(|d| (d.doc_id.clone(), sim(d, &types)))
            .collect(),
    )
}

/// 1-based position of the first relevant item.
pub fn gold_rank(ranking: &[(String, f64)], gold: &BTreeSet<String>) -> Option<usize> {
    ranking
        .iter()
        .position(|(id, _)| gold.contains(id))
        .map(|p| p + 1)
}

/// Mean reciprocal rank; 0 for no queries.
pub fn mrr(ranks: &[usize]) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64
}

/// Fraction of queries whose relevant item is within the top `k`.
pub fn recall_at_k(ranks: &[usize], k: usize) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64
}

pub fn avg_rank(ranks: &[usize]) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().sum::<usize>() as f64 / ranks.len() as f64
}

/// Binary-gain nDCG with discount `1 / log2(i + 1)` for 1-based position
/// `i`, normalized by the ideal ordering. `None` when nothing is relevant.
pub fn ndcg<S: AsRef<str>>(ranked: &[S], gold: &BTreeSet<String>) -> Option<f64> {
    if gold.is_empty() {
        return None;
    }
    let discount = |i: usize| 1.0 / ((i + 1) as f64).log2();
    let dcg: f64 = ranked
        .iter()
        .enumerate()
        .filter(|(_, id)| gold.contains(id.as_ref()))
        .map(|(p, _)| discount(p + 1))
        .sum();
    let ideal: f64 = (1..=gold.len().min(ranked.len())).map(discount).sum();
    if ideal == 0.0 {
        return None;
    }
    Some(dcg / ideal)
}

fn set_recall(ranking: &[(String, f64)], gold: &BTreeSet<String>, k: usize) -> f64 {
    let hits = ranking
        .iter()
        .take(k)
        .filter(|(id, _)| gold.contains(id))
        .count();
    hits as f64 / gold.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingSummary {
    pub n_queries: usize,
    /// Mean 1-based rank of the first relevant item.
    pub avg_rank: f64,
    pub mrr: f64,
    /// Mean of |relevant in top k| / |relevant| per query.
    pub recall_at: BTreeMap<usize, f64>,
    /// Macro average over queries with relevant items.
    pub ndcg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    /// `schemas` or `documents`.
    pub mode: String,
    pub overall: RankingSummary,
    pub strata: Vec<(Stratum, RankingSummary)>,
}

struct QueryOutcome {
    first: usize,
    recall: Vec<f64>,
    ndcg: f64,
}

fn outcome(
    ranking: &[(String, f64)],
    gold: &BTreeSet<String>,
    ks: &[usize],
) -> Option<QueryOutcome> {
    let first = gold_rank(ranking, gold)?;
    let ids: Vec<&str> = ranking.iter().map(|(id, _)| id.as_str()).collect();
    Some(QueryOutcome {
        first,
        recall: ks.iter().map(|&k| set_recall(ranking, gold, k)).collect(),
        ndcg: ndcg(&ids, gold).unwrap_or(0.0),
    })
}

fn summarize(outcomes: &[QueryOutcome], ks: &[usize]) -> RankingSummary {
    let ranks: Vec<usize> = outcomes.iter().map(|o| o.first).collect();
    let n = outcomes.len();
    let mean = |f: &dyn Fn(&QueryOutcome) -> f64| {
        if n == 0 {
            0.0
        } else {
            outcomes.iter().map(f).sum::<f64>() / n as f64
        }
    };
    RankingSummary {
        n_queries: n,
        avg_rank: avg_rank(&ranks),
        mrr: mrr(&ranks),
        recall_at: ks
            .iter()
            .enumerate()
            .map(|(j, &k)| (k, mean(&|o: &QueryOutcome| o.recall[j])))
            .collect(),
        ndcg: (n > 0).then(|| mean(&|o: &QueryOutcome| o.ndcg)),
    }
}

/// Each document with gold schemas in the library is a query over the
/// library. Strata select queries by the document's event count.
pub fn evaluate_schema_ranking(
    corpus: &[EventMultiset],
    library: &[Schema],
    gold: &GoldLabels,
    ks: &[usize],
    strata: &[Stratum],
) -> Result<RankingReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let known: BTreeSet<&str> = library.iter().map(|s| s.id.as_str()).collect();
    let mut per_doc: Vec<(&str, usize, QueryOutcome)> = corpus
        .par_iter()
        .filter_map(|d| {
            let relevant: BTreeSet<String> = gold
                .by_doc
                .get(&d.doc_id)?
                .iter()
                .filter(|s| known.contains(s.as_str()))
                .cloned()
                .collect();
            if relevant.is_empty() {
                return None;
            }
            outcome(&rank_schemas(d, library), &relevant, ks)
                .map(|o| (d.doc_id.as_str(), d.total(), o))
        })
        .collect();
    // Sums run in id order so float results ignore input order.
    per_doc.sort_by(|a, b| a.0.cmp(b.0));
    let select = |stratum: Option<Stratum>| {
        let chosen: Vec<QueryOutcome> = per_doc
            .iter()
            .filter(|(_, n, _)| stratum.is_none_or(|s| s.contains(*n)))
            .map(|(_, _, o)| QueryOutcome {
                first: o.first,
                recall: o.recall.clone(),
                ndcg: o.ndcg,
            })
            .collect();
        summarize(&chosen, ks)
    };
    Ok(RankingReport {
        mode: "schemas".into(),
        overall: select(None),
        strata: strata.iter().map(|&s| (s, select(Some(s)))).collect(),
    })
}

/// Each schema with gold documents is a query over the corpus. A stratum
/// restricts the corpus to documents whose event count it contains.
pub fn evaluate_document_ranking(
    corpus: &[EventMultiset],
    library: &[Schema],
    gold: &GoldLabels,
    ks: &[usize],
    strata: &[Stratum],
) -> Result<RankingReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let run = |docs: &[EventMultiset]| {
        let present: BTreeSet<&str> = docs.iter().map(|d| d.doc_id.as_str()).collect();
        let mut outcomes: Vec<(&str, QueryOutcome)> = library
            .par_iter()
            .filter_map(|s| {
                let relevant: BTreeSet<String> = gold
                    .by_schema
                    .get(&s.id)?
                    .iter()
                    .filter(|d| present.contains(d.as_str()))
                    .cloned()
                    .collect();
                if relevant.is_empty() {
                    return None;
                }
                outcome(&rank_documents(s, docs), &relevant, ks).map(|o| (s.id.as_str(), o))
            })
            .collect();
        outcomes.sort_by(|a, b| a.0.cmp(b.0));
        let outcomes: Vec<QueryOutcome> = outcomes.into_iter().map(|(_, o)| o).collect();
        summarize(&outcomes, ks)
    };
    let strata_reports = strata
        .iter()
        .map(|&s| {
            let sub: Vec<EventMultiset> = corpus
                .iter()
                .filter(|d| s.contains(d.total()))
                .cloned()
                .collect();
            (s, run(&sub))
        })
        .collect();
    Ok(RankingReport {
        mode: "documents".into(),
        overall: run(corpus),
        strata: strata_reports,
    })
}

/// Plain-text table: one row for all queries and one per stratum.
pub fn render_ranking_table(report: &RankingReport) -> String {
    let ks: Vec<usize> = report.overall.recall_at.keys().copied().collect();
    let mut out = format!("# rank {}\nevents\tqueries\tavg_rank\tMRR", report.mode);
    for k in &ks {
        out.push_str(&format!("\tR@{k}"));
    }
    out.push_str("\tnDCG\n");
    let row = |label: String, s: &RankingSummary| {
        let mut line = format!("{label}\t{}\t{:.2}\t{:.4}", s.n_queries, s.avg_rank, s.mrr);
        for k in &ks {
            line.push_str(&format!(
                "\t{:.4}",
                s.recall_at.get(k).copied().unwrap_or(0.0)
            ));
        }
        match s.ndcg {
            Some(v) => line.push_str(&format!("\t{v:.4}\n")),
            None => line.push_str("\t-\n"),
        }
        line
    };
    out.push_str(&row("all".into(), &report.overall));
    for (stratum, s) in &report.strata {
        out.push_str(&row(stratum.to_string(), s));
    }
    out
}
