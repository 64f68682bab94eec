//! Keyword search ranked by raw term frequency.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{FieldId, Index};
use crate::textproc::{analyze, AnalyzerConfig};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SearchError {
    #[error("query has no searchable terms after analysis")]
    EmptyQuery,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub doc_id: String,
    pub score: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub hits: Vec<SearchHit>,
    /// Distinct analyzed query terms, sorted.
    pub query_terms: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Documents containing any query term in keywords, title, abstract or body.
///
/// A document scores the sum over distinct query terms of its raw counts in
/// those four fields. Hits are sorted by descending score, then ascending id,
/// and truncated to `limit`.
pub fn search(
    index: &Index,
    query: &str,
    config: &AnalyzerConfig,
    limit: usize,
) -> Result<SearchResult, SearchError> {
    let terms: BTreeSet<String> = analyze(query, config).into_iter().collect();
    if terms.is_empty() {
        return Err(SearchError::EmptyQuery);
    }
    let mut scores: BTreeMap<&str, u64> = BTreeMap::new();
    for term in &terms {
        for field in FieldId::WEIGHTED {
            for (doc, n) in index.postings(field, term) {
                *scores.entry(doc).or_default() += u64::from(n);
            }
        }
    }
    let mut hits: Vec<SearchHit> = scores
        .into_iter()
        .map(|(doc_id, score)| SearchHit {
            doc_id: doc_id.to_string(),
            score,
        })
        .collect();
    // stable sort keeps the ascending id order from the map for equal scores
    hits.sort_by_key(|h| std::cmp::Reverse(h.score));
    hits.truncate(limit);
    Ok(SearchResult {
        hits,
        query_terms: terms.into_iter().collect(),
        warnings: index.check_analyzer(config).into_iter().collect(),
    })
}
