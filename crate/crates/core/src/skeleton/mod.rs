//! Skeleton construction: ordering frequent itemsets into event sequences,
//! ranking them under a diversity constraint, and chaining them.

mod builder;
mod scorer;

pub use builder::{
    best_extension, build_skeletons, candidates_from_itemsets, export_curation_queue,
    extend_chains, order_itemset, rank_and_diversify, render_curation_queue, score_sequence,
    BuilderConfig, CandidateSequence, CURATION_QUEUE_FILE, EXHAUSTIVE_ORDER_LIMIT, SKELETONS_FILE,
};
pub use scorer::{default_scorer, PairScorer, PmiScorer, TableScorer};
