//! Field-weighted document vectors, cosine similarity and top-k recommendation.
//!
//! A term's weight in a document is an affine combination of four signals:
//!
//! ```text
//! w = kappa * [term in keywords]
//!   + tau   * tfidf(title)
//!   + alpha * tfidf(abstract)
//!   + beta  * tfidf(body)
//! ```
//!
//! with `kappa + tau + alpha + beta = 1`. Documents are compared by the cosine
//! of their weight vectors, and candidates are restricted to the query's
//! category unless [`CategoryScope::All`] is selected.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::index::{FieldId, Index, IndexError};

pub const DEFAULT_TOP_K: usize = 10;
pub const COEFFICIENT_TOLERANCE: f64 = 1e-9;
pub const BATCH_FORMAT: &str = "artikull-recommendations";
pub const BATCH_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("coefficients must satisfy κ + τ + α + β = 1 (got {kappa} + {tau} + {alpha} + {beta} = {})", (.sum * 1e10).round() / 1e10)]
    CoefficientSum {
        kappa: f64,
        tau: f64,
        alpha: f64,
        beta: f64,
        sum: f64,
    },
    #[error("coefficient {name} = {value} is outside [0, 1]")]
    CoefficientRange { name: &'static str, value: f64 },
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("unsupported recommendations file: {0}")]
    Format(String),
    #[error("recommendations I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoefficients")]
pub struct WeightCoefficients {
    kappa: f64,
    tau: f64,
    alpha: f64,
    beta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoefficients {
    kappa: f64,
    tau: f64,
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawCoefficients> for WeightCoefficients {
    type Error = RecommendError;

    fn try_from(raw: RawCoefficients) -> Result<Self, Self::Error> {
        WeightCoefficients::new(raw.kappa, raw.tau, raw.alpha, raw.beta)
    }
}

impl WeightCoefficients {
    /// Keyword, title, abstract and body coefficients; must lie in `[0, 1]`
    /// and sum to 1 within [`COEFFICIENT_TOLERANCE`].
    pub fn new(kappa: f64, tau: f64, alpha: f64, beta: f64) -> Result<Self, RecommendError> {
        for (name, value) in [("κ", kappa), ("τ", tau), ("α", alpha), ("β", beta)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(RecommendError::CoefficientRange { name, value });
            }
        }
        let sum = kappa + tau + alpha + beta;
        if (sum - 1.0).abs() > COEFFICIENT_TOLERANCE {
            return Err(RecommendError::CoefficientSum {
                kappa,
                tau,
                alpha,
                beta,
                sum,
            });
        }
        Ok(WeightCoefficients {
            kappa,
            tau,
            alpha,
            beta,
        })
    }

    /// The three reference settings: keyword and title heavy, title and
    /// abstract only, keywords and body only.
    pub fn reference_set() -> [WeightCoefficients; 3] {
        [
            WeightCoefficients::new(0.4, 0.3, 0.2, 0.1).unwrap(),
            WeightCoefficients::new(0.0, 0.6, 0.4, 0.0).unwrap(),
            WeightCoefficients::new(0.4, 0.0, 0.0, 0.6).unwrap(),
        ]
    }

    /// Affine combination of a keyword hit and the three field tf-idf weights.
    pub fn combine(&self, in_keywords: bool, title: f64, abstract_text: f64, body: f64) -> f64 {
        let keyword = if in_keywords { 1.0 } else { 0.0 };
        self.kappa * keyword + self.tau * title + self.alpha * abstract_text + self.beta * body
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Default for WeightCoefficients {
    fn default() -> Self {
        WeightCoefficients::reference_set()[0]
    }
}

impl fmt::Display for WeightCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "κ = {} τ = {} α = {} β = {}",
            self.kappa, self.tau, self.alpha, self.beta
        )
    }
}

/// Sparse nonnegative term-weight vector with its precomputed Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct DocVector {
    doc_id: String,
    weights: BTreeMap<String, f64>,
    norm: f64,
}

impl DocVector {
    /// Drops zero entries and computes the norm. Weights must be nonnegative.
    pub fn new<I>(doc_id: &str, weights: I) -> Self
    where
        I: IntoIterator<Item = (String, f64)>,
    {
        let weights: BTreeMap<String, f64> = weights.into_iter().filter(|(_, w)| *w > 0.0).collect();
        debug_assert!(weights.values().all(|w| w.is_finite()));
        let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
        DocVector {
            doc_id: doc_id.to_string(),
            weights,
            norm,
        }
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> DocVector {
        DocVector::new(
            &self.doc_id,
            self.weights.iter().map(|(t, w)| (t.clone(), w * factor)),
        )
    }

    pub fn dot(&self, other: &DocVector) -> f64 {
        let (small, large) = if self.weights.len() <= other.weights.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .weights
            .iter()
            .filter_map(|(t, w)| large.weights.get(t).map(|v| w * v))
            .sum()
    }
}

/// Cosine of the angle between two nonnegative vectors, in `[0, 1]`.
/// Zero when either vector is empty.
pub fn cosine(a: &DocVector, b: &DocVector) -> f64 {
    if a.norm == 0.0 || b.norm == 0.0 {
        return 0.0;
    }
    (a.dot(b) / (a.norm * b.norm)).clamp(0.0, 1.0)
}

pub fn term_weight(
    index: &Index,
    doc: &str,
    term: &str,
    coeffs: &WeightCoefficients,
) -> Result<f64, IndexError> {
    Ok(coeffs.combine(
        index.tf(doc, FieldId::Keywords, term)? > 0,
        index.tfidf(doc, FieldId::Title, term)?,
        index.tfidf(doc, FieldId::Abstract, term)?,
        index.tfidf(doc, FieldId::Body, term)?,
    ))
}

pub fn doc_vector(
    index: &Index,
    doc: &str,
    coeffs: &WeightCoefficients,
) -> Result<DocVector, IndexError> {
    let weights = index
        .doc_terms(doc)?
        .into_iter()
        .map(|t| Ok((t.to_string(), term_weight(index, doc, t, coeffs)?)))
        .collect::<Result<Vec<_>, IndexError>>()?;
    Ok(DocVector::new(doc, weights))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryScope {
    /// Candidates must share the query's category.
    #[default]
    SameCategory,
    /// Every other document is a candidate.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub query_doc_id: String,
    pub ranked: Vec<ScoredDoc>,
    pub k_requested: usize,
}

/// Descending score, then ascending id.
pub fn rank_order(a: &ScoredDoc, b: &ScoredDoc) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// Document vectors for one coefficient setting, computed once.
pub struct Recommender<'a> {
    index: &'a Index,
    coeffs: WeightCoefficients,
    scope: CategoryScope,
    vectors: Vec<DocVector>,
}

impl<'a> Recommender<'a> {
    pub fn new(index: &'a Index, coeffs: WeightCoefficients) -> Self {
        let vectors = index
            .docs()
            .par_iter()
            .map(|d| doc_vector(index, &d.id, &coeffs).expect("indexed document"))
            .collect();
        Recommender {
            index,
            coeffs,
            scope: CategoryScope::SameCategory,
            vectors,
        }
    }

    pub fn with_scope(mut self, scope: CategoryScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn coefficients(&self) -> &WeightCoefficients {
        &self.coeffs
    }

    pub fn scope(&self) -> CategoryScope {
        self.scope
    }

    pub fn vector(&self, doc: &str) -> Result<&DocVector, IndexError> {
        let pos = self
            .index
            .docs()
            .binary_search_by(|d| d.id.as_str().cmp(doc))
            .map_err(|_| IndexError::UnknownDoc(doc.to_string()))?;
        Ok(&self.vectors[pos])
    }

    /// Top `k` candidates by cosine similarity to `query`, excluding the query
    /// itself and candidates with zero similarity.
    pub fn recommend(&self, query: &str, k: usize) -> Result<Recommendation, RecommendError> {
        if k == 0 {
            return Err(RecommendError::InvalidK);
        }
        let qv = self.vector(query)?;
        let category = self.index.category(query)?;
        let mut ranked: Vec<ScoredDoc> = self
            .index
            .docs()
            .iter()
            .zip(&self.vectors)
            .filter(|(d, _)| d.id != query)
            .filter(|(d, _)| self.scope == CategoryScope::All || &d.category == category)
            .filter_map(|(d, v)| {
                let score = cosine(qv, v);
                (score > 0.0).then(|| ScoredDoc {
                    doc_id: d.id.clone(),
                    score,
                })
            })
            .collect();
        ranked.sort_by(rank_order);
        ranked.truncate(k);
        Ok(Recommendation {
            query_doc_id: query.to_string(),
            ranked,
            k_requested: k,
        })
    }

    /// Recommendations for every document.
    pub fn batch(&self, k: usize) -> Result<BatchRecommendations, RecommendError> {
        if k == 0 {
            return Err(RecommendError::InvalidK);
        }
        let entries = self
            .index
            .docs()
            .par_iter()
            .map(|d| self.recommend(&d.id, k).map(|r| (d.id.clone(), r)))
            .collect::<Result<BTreeMap<_, _>, _>>()?;
        Ok(BatchRecommendations {
            coefficients: self.coeffs,
            analyzer_fingerprint: self.index.analyzer_fingerprint().to_string(),
            k,
            scope: self.scope,
            entries,
        })
    }
}

pub fn recommend(
    index: &Index,
    query: &str,
    coeffs: &WeightCoefficients,
    k: usize,
) -> Result<Recommendation, RecommendError> {
    if !index.contains(query) {
        return Err(IndexError::UnknownDoc(query.to_string()).into());
    }
    Recommender::new(index, *coeffs).recommend(query, k)
}

pub fn batch_recommend(
    index: &Index,
    coeffs: &WeightCoefficients,
    k: usize,
) -> Result<BatchRecommendations, RecommendError> {
    Recommender::new(index, *coeffs).batch(k)
}

/// Precomputed recommendations for a whole index.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecommendations {
    pub coefficients: WeightCoefficients,
    pub analyzer_fingerprint: String,
    pub k: usize,
    pub scope: CategoryScope,
    pub entries: BTreeMap<String, Recommendation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PersistedBatch {
    format: String,
    version: u64,
    coefficients: WeightCoefficients,
    analyzer_fingerprint: String,
    k: usize,
    scope: CategoryScope,
    recommendations: BTreeMap<String, Vec<ScoredDoc>>,
}

/// Rounds to 4 decimal places for persisted output.
pub fn round_score(score: f64) -> f64 {
    (score * 1e4).round() / 1e4
}

impl BatchRecommendations {
    pub fn get(&self, doc: &str) -> Option<&Recommendation> {
        self.entries.get(doc)
    }

    /// Stable JSON rendering; scores rounded to 4 decimals.
    pub fn to_json(&self) -> String {
        let persisted = PersistedBatch {
            format: BATCH_FORMAT.to_string(),
            version: BATCH_VERSION,
            coefficients: self.coefficients,
            analyzer_fingerprint: self.analyzer_fingerprint.clone(),
            k: self.k,
            scope: self.scope,
            recommendations: self
                .entries
                .iter()
                .map(|(id, rec)| {
                    let ranked = rec
                        .ranked
                        .iter()
                        .map(|s| ScoredDoc {
                            doc_id: s.doc_id.clone(),
                            score: round_score(s.score),
                        })
                        .collect();
                    (id.clone(), ranked)
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&persisted).expect("batch serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, RecommendError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| RecommendError::Format(e.to_string()))?;
        let format = value.get("format").and_then(Value::as_str);
        let version = value.get("version").and_then(Value::as_u64);
        if format != Some(BATCH_FORMAT) || version != Some(BATCH_VERSION) {
            return Err(RecommendError::Format(format!(
                "expected format `{BATCH_FORMAT}` version {BATCH_VERSION}"
            )));
        }
        let p: PersistedBatch =
            serde_json::from_value(value).map_err(|e| RecommendError::Format(e.to_string()))?;
        let k = p.k;
        Ok(BatchRecommendations {
            coefficients: p.coefficients,
            analyzer_fingerprint: p.analyzer_fingerprint,
            k,
            scope: p.scope,
            entries: p
                .recommendations
                .into_iter()
                .map(|(id, ranked)| {
                    let rec = Recommendation {
                        query_doc_id: id.clone(),
                        ranked,
                        k_requested: k,
                    };
                    (id, rec)
                })
                .collect(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RecommendError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RecommendError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
