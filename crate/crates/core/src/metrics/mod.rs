//! Corpus coverage and ranking evaluation of schema libraries.

mod ranking;

use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EventMultiset;
use crate::schema::Schema;

pub use ranking::{
    avg_rank, evaluate_document_ranking, evaluate_schema_ranking, gold_rank, mrr, ndcg,
    rank_documents, rank_schemas, read_gold_labels, recall_at_k, render_ranking_table, GoldLabels,
    RankingReport, RankingSummary,
};

/// Fraction of the document's event occurrences whose type occurs in the
/// schema. Two occurrences of one type both count against a single
/// schema step of that type. An empty document scores 0.
pub fn sim<S: Borrow<str> + Ord>(doc: &EventMultiset, schema_types: &BTreeSet<S>) -> f64 {
    let total = doc.total();
    if total == 0 {
        return 0.0;
    }
    let hit: usize = doc
        .counts
        .iter()
        .filter(|(t, _)| schema_types.contains(t.as_str()))
        .map(|(_, c)| c)
        .sum();
    hit as f64 / total as f64
}

pub fn sim_schema(doc: &EventMultiset, schema: &Schema) -> f64 {
    sim(doc, &schema.event_type_set())
}

/// Half-open interval `[lo, hi)` over a document's event count; `hi` of
/// `None` is unbounded. Written `lo:hi` or `lo:`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Stratum {
    pub lo: usize,
    pub hi: Option<usize>,
}

impl Stratum {
    pub const ALL: Stratum = Stratum { lo: 1, hi: None };

    pub fn contains(&self, n_events: usize) -> bool {
        n_events >= self.lo && self.hi.is_none_or(|hi| n_events < hi)
    }

    fn overlaps(&self, other: &Stratum) -> bool {
        let a_hi = self.hi.unwrap_or(usize::MAX);
        let b_hi = other.hi.unwrap_or(usize::MAX);
        self.lo < b_hi && other.lo < a_hi
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) => write!(f, "{}:{}", self.lo, hi),
            None => write!(f, "{}:", self.lo),
        }
    }
}

impl FromStr for Stratum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Precondition(format!("bad stratum `{s}`; expected `lo:hi` or `lo:`"));
        let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi = match hi.trim() {
            "" => None,
            h => Some(h.parse::<usize>().map_err(|_| bad())?),
        };
        if lo == 0 || hi.is_some_and(|h| h <= lo) {
            return Err(bad());
        }
        Ok(Stratum { lo, hi })
    }
}

pub fn parse_strata(spec: &str) -> Result<Vec<Stratum>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

pub fn parse_thresholds(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Precondition(format!("bad threshold `{s}`")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumCoverage {
    pub stratum: Stratum,
    pub n_docs: usize,
    /// Coverage per threshold, in report threshold order. 0 for an empty
    /// stratum.
    pub coverage: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub library_id: String,
    pub corpus_id: String,
    pub thresholds: Vec<f64>,
    pub strata: Vec<StratumCoverage>,
    /// The union stratum `1:`.
    pub overall: StratumCoverage,
}

/// Best sim of each document against the library (0 for an empty library).
pub fn best_sims(corpus: &[EventMultiset], library: &[Schema]) -> Vec<f64> {
    let types: Vec<BTreeSet<&str>> = library.iter().map(Schema::event_type_set).collect();
    corpus
        .par_iter()
        .map(|d| types.iter().map(|t| sim(d, t)).fold(0.0, f64::max))
        .collect()
}

fn check_inputs(thresholds: &[f64], strata: &[Stratum]) -> Result<()> {
    if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(Error::Precondition(format!(
            "threshold {t} is outside (0, 1]"
        )));
    }
    for (i, a) in strata.iter().enumerate() {
        if a.lo == 0 {
            return Err(Error::Precondition(format!("stratum {a} starts below 1")));
        }
        if let Some(b) = strata[i + 1..].iter().find(|b| a.overlaps(b)) {
            return Err(Error::Precondition(format!("strata {a} and {b} overlap")));
        }
    }
    Ok(())
}

/// Cov@t: the fraction of documents for which some library schema reaches
/// sim >= t, per stratum and over all documents with at least one event.
/// Documents without events count in no stratum.
pub fn coverage(
    corpus: &[EventMultiset],
    library: &[Schema],
    thresholds: &[f64],
    strata: &[Stratum],
) -> Result<CoverageReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    check_inputs(thresholds, strata)?;
    let best = best_sims(corpus, library);
    let sizes: Vec<usize> = corpus.iter().map(EventMultiset::total).collect();
    let tally = |stratum: Stratum| {
        let members: Vec<f64> = best
            .iter()
            .zip(&sizes)
            .filter(|(_, &n)| stratum.contains(n))
            .map(|(&s, _)| s)
            .collect();
        let n_docs = members.len();
        let coverage = thresholds
            .iter()
            .map(|&t| {
                if n_docs == 0 {
                    0.0
                } else {
                    members.iter().filter(|&&s| s >= t).count() as f64 / n_docs as f64
                }
            })
            .collect();
        StratumCoverage {
            stratum,
            n_docs,
            coverage,
        }
    };
    Ok(CoverageReport {
        library_id: String::new(),
        corpus_id: String::new(),
        thresholds: thresholds.to_vec(),
        strata: strata.iter().map(|&s| tally(s)).collect(),
        overall: tally(Stratum::ALL),
    })
}

/// Plain-text table: one row per stratum plus an `all` row, one column per
/// threshold, values in percent.
pub fn render_coverage_table(report: &CoverageReport) -> String {
    let mut out = format!(
        "# library: {}  corpus: {}\n",
        report.library_id, report.corpus_id
    );
    out.push_str("events\tdocs");
    for t in &report.thresholds {
        out.push_str(&format!("\tCov@{t}"));
    }
    out.push('\n');
    let row = |label: String, s: &StratumCoverage| {
        let mut line = format!("{label}\t{}", s.n_docs);
        for c in &s.coverage {
            line.push_str(&format!("\t{:.1}", c * 100.0));
        }
        line.push('\n');
        line
    };
    for s in &report.strata {
        out.push_str(&row(s.stratum.to_string(), s));
    }
    out.push_str(&row("all".into(), &report.overall));
    out
}
