use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::mining::ItemSource;

/// Pairwise script compatibility: how apt it is for `second` to follow
/// `first`. Not assumed symmetric.
pub trait PairScorer: Send + Sync {
    fn cscore(&self, first: &str, second: &str) -> f64;
}

impl<F> PairScorer for F
where
    F: Fn(&str, &str) -> f64 + Send + Sync,
{
    fn cscore(&self, first: &str, second: &str) -> f64 {
        self(first, second)
    }
}

impl PairScorer for Box<dyn PairScorer> {
    fn cscore(&self, first: &str, second: &str) -> f64 {
        self.as_ref().cscore(first, second)
    }
}

/// Dense precomputed score table. Pairs involving unknown ids score 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TableScorer {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Vec<f64>,
}

impl TableScorer {
    pub fn new(ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = ids.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Precondition(format!(
                "score table must be {n}x{n} to match its header"
            )));
        }
        let index: HashMap<String, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        if index.len() != n {
            return Err(Error::Precondition(
                "score table header repeats an id".into(),
            ));
        }
        Ok(TableScorer {
            ids,
            index,
            matrix: rows.into_iter().flatten().collect(),
        })
    }

    /// Tabulates any scorer over `ids`.
    pub fn from_scorer(ids: &[&str], scorer: &dyn PairScorer) -> Self {
        let rows = ids
            .iter()
            .map(|a| ids.iter().map(|b| scorer.cscore(a, b)).collect())
            .collect();
        Self::new(ids.iter().map(|s| s.to_string()).collect(), rows)
            .expect("square by construction")
    }

    /// Tab-separated text: a header line of ids, then one row of reals per
    /// id (row = first event, column = second event).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::format("score table", 1, "missing header"))?;
        let ids: Vec<String> = header.split('\t').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::with_capacity(ids.len());
        for (i, line) in lines {
            let row = line
                .split('\t')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::format("score table", i + 1, e.to_string()))?;
            rows.push(row);
        }
        Self::new(ids, rows)
    }

    pub fn to_text(&self) -> String {
        let n = self.ids.len();
        let mut out = self.ids.join("\t");
        out.push('\n');
        for r in 0..n {
            let row: Vec<String> = self.matrix[r * n..(r + 1) * n]
                .iter()
                .map(|v| v.to_string())
                .collect();
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        out
    }
}

impl PairScorer for TableScorer {
    fn cscore(&self, first: &str, second: &str) -> f64 {
        match (self.index.get(first), self.index.get(second)) {
            (Some(&a), Some(&b)) => self.matrix[a * self.ids.len() + b],
            _ => 0.0,
        }
    }
}

/// Corpus-statistics stand-in for a learned compatibility model: positive
/// pointwise mutual information of event-type co-occurrence within
/// transactions.
///
/// With `N` transactions, `c(a)` transactions containing `a` and `c(a,b)`
/// containing both, marginals are add-one smoothed:
///
/// ```text
/// P(a)   = (c(a) + 1) / (N + 1)
/// P(a,b) = c(a,b) / N
/// score  = max(0, ln(P(a,b) / (P(a) P(b))))
/// ```
///
/// Pairs that never co-occur, and `a == b`, score 0. The score is symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct PmiScorer {
    transactions: usize,
    single: HashMap<String, usize>,
    pair: HashMap<(String, String), usize>,
}

impl PmiScorer {
    pub fn from_source<S: ItemSource + ?Sized>(source: &S) -> Result<Self> {
        let mut scorer = PmiScorer {
            transactions: 0,
            single: HashMap::new(),
            pair: HashMap::new(),
        };
        source.scan(&mut |items: &BTreeSet<String>| {
            scorer.transactions += 1;
            let items: Vec<&String> = items.iter().collect();
            for (i, a) in items.iter().enumerate() {
                *scorer.single.entry((*a).clone()).or_insert(0) += 1;
                for b in &items[i + 1..] {
                    *scorer.pair.entry(((*a).clone(), (*b).clone())).or_insert(0) += 1;
                }
            }
        })?;
        Ok(scorer)
    }

    pub fn co_occurrences(&self, a: &str, b: &str) -> usize {
        let key = if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        self.pair.get(&key).copied().unwrap_or(0)
    }
}

impl PairScorer for PmiScorer {
    fn cscore(&self, first: &str, second: &str) -> f64 {
        if first == second || self.transactions == 0 {
            return 0.0;
        }
        let joint = self.co_occurrences(first, second);
        if joint == 0 {
            return 0.0;
        }
        let n = self.transactions as f64;
        let pa = (self.single.get(first).copied().unwrap_or(0) as f64 + 1.0) / (n + 1.0);
        let pb = (self.single.get(second).copied().unwrap_or(0) as f64 + 1.0) / (n + 1.0);
        let pab = joint as f64 / n;
        (pab / (pa * pb)).ln().max(0.0)
    }
}

/// The default scorer: PMI over the mining transactions.
pub fn default_scorer<S: ItemSource + ?Sized>(transactions: &S) -> Result<PmiScorer> {
    PmiScorer::from_source(transactions)
}
