use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::ingest::EventMultiset;
use crate::schema::Schema;

/// Bag-of-events inverted index over a schema library.
#[derive(Debug, Clone)]
pub struct SchemaIndex {
    schema_ids: Vec<String>,
    /// Event type to (schema position, term frequency).
    postings: HashMap<String, Vec<(usize, usize)>>,
}

/// `ln(1 + N / df)`.
pub fn idf(n_schemas: usize, df: usize) -> f64 {
    (1.0 + n_schemas as f64 / df as f64).ln()
}

impl SchemaIndex {
    pub fn build(library: &[Schema]) -> Self {
        let mut postings: HashMap<String, Vec<(usize, usize)>> = HashMap::new();
        for (s, schema) in library.iter().enumerate() {
            let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
            for step in &schema.steps {
                *tf.entry(step.event_type.as_str()).or_insert(0) += 1;
            }
            for (ty, count) in tf {
                postings.entry(ty.to_string()).or_default().push((s, count));
            }
        }
        SchemaIndex {
            schema_ids: library.iter().map(|s| s.id.clone()).collect(),
            postings,
        }
    }

    pub fn len(&self) -> usize {
        self.schema_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schema_ids.is_empty()
    }

    /// Relevance of every schema sharing an event type with the document:
    /// `sum over types t of doc_count(t) * tf(t, s) * idf(t)`.
    pub fn scores(&self, doc: &EventMultiset) -> Result<Vec<(usize, f64)>> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (ty, &count) in &doc.counts {
            if let Some(list) = self.postings.get(ty) {
                let w = idf(self.len(), list.len());
                for &(s, tf) in list {
                    *acc.entry(s).or_insert(0.0) += count as f64 * tf as f64 * w;
                }
            }
        }
        Ok(acc.into_iter().collect())
    }

    /// Library positions of the `k` most relevant schemas, best first, ties
    /// by schema id. Schemas sharing no event type are never returned.
    pub fn query(&self, doc: &EventMultiset, k: usize) -> Result<Vec<usize>> {
        let mut scored = self.scores(doc)?;
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.schema_ids[a.0].cmp(&self.schema_ids[b.0]))
        });
        Ok(scored.into_iter().take(k).map(|(s, _)| s).collect())
    }
}

/// The top `k` schemas of `library` for `doc`; see [`SchemaIndex::query`].
pub fn prefilter<'a>(
    library: &'a [Schema],
    index: &SchemaIndex,
    doc: &EventMultiset,
    k: usize,
) -> Result<Vec<&'a Schema>> {
    Ok(index
        .query(doc, k)?
        .into_iter()
        .map(|i| &library[i])
        .collect())
}
