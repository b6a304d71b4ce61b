use std::collections::{BTreeSet, HashMap};

use super::{sort_itemsets, FrequentItemset, ItemSource, MiningConfig};
use crate::error::Result;

/// Items are dense ranks: 0 is the most frequent item, ties broken
/// lexicographically.
type Rank = usize;

struct Node {
    item: Rank,
    count: usize,
    parent: Option<usize>,
    children: Vec<(Rank, usize)>,
}

struct FpTree {
    nodes: Vec<Node>,
    /// Node indices per item rank.
    header: Vec<Vec<usize>>,
}

impl FpTree {
    fn new(n_items: usize) -> Self {
        FpTree {
            nodes: vec![Node {
                item: usize::MAX,
                count: 0,
                parent: None,
                children: Vec::new(),
            }],
            header: vec![Vec::new(); n_items],
        }
    }

    /// `path` must be sorted by rank.
    fn insert(&mut self, path: &[Rank], count: usize) {
        let mut cur = 0;
        for &item in path {
            let next = self.nodes[cur]
                .children
                .iter()
                .find(|(it, _)| *it == item)
                .map(|&(_, idx)| idx);
            cur = match next {
                Some(idx) => idx,
                None => {
                    let idx = self.nodes.len();
                    self.nodes.push(Node {
                        item,
                        count: 0,
                        parent: Some(cur),
                        children: Vec::new(),
                    });
                    self.nodes[cur].children.push((item, idx));
                    self.header[item].push(idx);
                    idx
                }
            };
            self.nodes[cur].count += count;
        }
    }

    fn support(&self, item: Rank) -> usize {
        self.header[item].iter().map(|&n| self.nodes[n].count).sum()
    }

    /// Root-to-parent paths (in rank order) above every node of `item`.
    fn prefix_paths(&self, item: Rank) -> Vec<(Vec<Rank>, usize)> {
        let mut paths = Vec::with_capacity(self.header[item].len());
        for &node in &self.header[item] {
            let mut path = Vec::new();
            let mut cur = self.nodes[node].parent;
            while let Some(idx) = cur {
                if idx == 0 {
                    break;
                }
                path.push(self.nodes[idx].item);
                cur = self.nodes[idx].parent;
            }
            if !path.is_empty() {
                path.reverse();
                paths.push((path, self.nodes[node].count));
            }
        }
        paths
    }
}

struct Miner<'a> {
    config: &'a MiningConfig,
    n_items: usize,
    out: Vec<(Vec<Rank>, usize)>,
}

impl Miner<'_> {
    fn grow(&mut self, tree: &FpTree, suffix: &mut Vec<Rank>) {
        // Least frequent first, the usual FP-growth order; output order is
        // fixed by the final sort.
        for item in (0..self.n_items).rev() {
            if tree.header[item].is_empty() {
                continue;
            }
            let support = tree.support(item);
            if support < self.config.min_support {
                continue;
            }
            suffix.push(item);
            if suffix.len() >= self.config.min_items {
                self.out.push((suffix.clone(), support));
            }
            if suffix.len() < self.config.max_items {
                let base = tree.prefix_paths(item);
                let mut counts = vec![0usize; self.n_items];
                for (path, count) in &base {
                    for &it in path {
                        counts[it] += count;
                    }
                }
                if counts.iter().any(|&c| c >= self.config.min_support) {
                    let mut cond = FpTree::new(self.n_items);
                    for (path, count) in &base {
                        let kept: Vec<Rank> = path
                            .iter()
                            .copied()
                            .filter(|&it| counts[it] >= self.config.min_support)
                            .collect();
                        if !kept.is_empty() {
                            cond.insert(&kept, *count);
                        }
                    }
                    self.grow(&cond, suffix);
                }
            }
            suffix.pop();
        }
    }
}

pub(super) fn mine<S: ItemSource + ?Sized>(
    source: &S,
    config: &MiningConfig,
) -> Result<Vec<FrequentItemset>> {
    let mut freq: HashMap<String, usize> = HashMap::new();
    source.scan(&mut |items: &BTreeSet<String>| {
        for item in items {
            *freq.entry(item.clone()).or_insert(0) += 1;
        }
    })?;

    let mut frequent: Vec<(String, usize)> = freq
        .into_iter()
        .filter(|(_, c)| *c >= config.min_support)
        .collect();
    frequent.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if frequent.is_empty() {
        return Ok(Vec::new());
    }
    let rank: HashMap<&str, Rank> = frequent
        .iter()
        .enumerate()
        .map(|(i, (s, _))| (s.as_str(), i))
        .collect();

    let mut tree = FpTree::new(frequent.len());
    let mut path = Vec::new();
    source.scan(&mut |items: &BTreeSet<String>| {
        path.clear();
        path.extend(items.iter().filter_map(|it| rank.get(it.as_str()).copied()));
        path.sort_unstable();
        if !path.is_empty() {
            tree.insert(&path, 1);
        }
    })?;

    let mut miner = Miner {
        config,
        n_items: frequent.len(),
        out: Vec::new(),
    };
    miner.grow(&tree, &mut Vec::new());

    let mut out: Vec<FrequentItemset> = miner
        .out
        .into_iter()
        .map(|(ranks, support)| {
            let mut items: Vec<String> = ranks.into_iter().map(|r| frequent[r].0.clone()).collect();
            items.sort();
            FrequentItemset { items, support }
        })
        .collect();
    sort_itemsets(&mut out);
    Ok(out)
}
