//! Frequent event-itemset mining.
//!
//! [`mine_frequent`] is an FP-growth miner; [`brute_force_frequent`]
//! enumerates every subset of a small item universe and exists to check it.

mod fpgrowth;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{parse_transaction_line, Transaction};

pub const BRUTE_FORCE_MAX_ITEMS: usize = 16;
pub const BRUTE_FORCE_MAX_TRANSACTIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    /// Absolute number of supporting transactions.
    pub min_support: usize,
    pub min_items: usize,
    pub max_items: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            min_support: 10,
            min_items: 2,
            max_items: 10,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_support == 0 {
            return Err(Error::Precondition("min_support must be at least 1".into()));
        }
        if self.min_items > self.max_items {
            return Err(Error::Precondition(format!(
                "min_items {} exceeds max_items {}",
                self.min_items, self.max_items
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrequentItemset {
    /// Sorted item ids.
    pub items: Vec<String>,
    pub support: usize,
}

/// A re-readable stream of transactions. Mining reads it twice: once to
/// count item frequencies and once to build the FP-tree.
pub trait ItemSource {
    fn scan(&self, visit: &mut dyn FnMut(&BTreeSet<String>)) -> Result<()>;
}

impl ItemSource for [Transaction] {
    fn scan(&self, visit: &mut dyn FnMut(&BTreeSet<String>)) -> Result<()> {
        self.iter().for_each(|t| visit(&t.items));
        Ok(())
    }
}

impl ItemSource for Vec<Transaction> {
    fn scan(&self, visit: &mut dyn FnMut(&BTreeSet<String>)) -> Result<()> {
        self.as_slice().scan(visit)
    }
}

/// A transactions file read lazily on every pass.
#[derive(Debug, Clone)]
pub struct TransactionFile(pub PathBuf);

impl ItemSource for TransactionFile {
    fn scan(&self, visit: &mut dyn FnMut(&BTreeSet<String>)) -> Result<()> {
        let file = File::open(&self.0).map_err(|e| Error::io(&self.0, e))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&self.0, e))?;
            if line.trim().is_empty() {
                continue;
            }
            visit(&parse_transaction_line(&line, i + 1)?.items);
        }
        Ok(())
    }
}

/// Sorts by support (descending), then items (lexicographic).
pub fn sort_itemsets(itemsets: &mut [FrequentItemset]) {
    itemsets.sort_by(|a, b| {
        b.support
            .cmp(&a.support)
            .then_with(|| a.items.cmp(&b.items))
    });
}

pub fn mine_frequent(transactions: &[Transaction], config: &MiningConfig) -> Vec<FrequentItemset> {
    mine_frequent_from(transactions, config).expect("in-memory scan cannot fail")
}

pub fn mine_frequent_from<S: ItemSource + ?Sized>(
    source: &S,
    config: &MiningConfig,
) -> Result<Vec<FrequentItemset>> {
    config.validate()?;
    fpgrowth::mine(source, config)
}

/// Exhaustive reference miner. Guarded to small universes.
pub fn brute_force_frequent(
    transactions: &[Transaction],
    config: &MiningConfig,
) -> Result<Vec<FrequentItemset>> {
    config.validate()?;
    if transactions.len() > BRUTE_FORCE_MAX_TRANSACTIONS {
        return Err(Error::GuardExceeded(format!(
            "{} transactions (max {BRUTE_FORCE_MAX_TRANSACTIONS})",
            transactions.len()
        )));
    }
    let universe: Vec<&String> = transactions
        .iter()
        .flat_map(|t| t.items.iter())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if universe.len() > BRUTE_FORCE_MAX_ITEMS {
        return Err(Error::GuardExceeded(format!(
            "{} distinct items (max {BRUTE_FORCE_MAX_ITEMS})",
            universe.len()
        )));
    }
    let index: BTreeMap<&String, usize> =
        universe.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let masks: Vec<u32> = transactions
        .iter()
        .map(|t| t.items.iter().fold(0u32, |m, it| m | (1 << index[it])))
        .collect();

    let mut out = Vec::new();
    for subset in 1u32..(1u32 << universe.len()) {
        let size = subset.count_ones() as usize;
        if size < config.min_items || size > config.max_items {
            continue;
        }
        let support = masks.iter().filter(|&&m| m & subset == subset).count();
        if support >= config.min_support {
            let items = (0..universe.len())
                .filter(|i| subset & (1 << i) != 0)
                .map(|i| universe[i].clone())
                .collect();
            out.push(FrequentItemset { items, support });
        }
    }
    sort_itemsets(&mut out);
    Ok(out)
}

/// `support<TAB>item<TAB>item...` lines.
pub fn write_itemsets(itemsets: &[FrequentItemset]) -> String {
    let mut out = String::new();
    for set in itemsets {
        out.push_str(&set.support.to_string());
        for item in &set.items {
            out.push('\t');
            out.push_str(item);
        }
        out.push('\n');
    }
    out
}

pub fn read_itemsets(text: &str) -> Result<Vec<FrequentItemset>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let support = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format("itemsets file", i + 1, "bad support"))?;
        let mut items: Vec<String> = fields.map(str::to_string).collect();
        if items.is_empty() {
            return Err(Error::format("itemsets file", i + 1, "no items"));
        }
        items.sort();
        out.push(FrequentItemset { items, support });
    }
    Ok(out)
}
