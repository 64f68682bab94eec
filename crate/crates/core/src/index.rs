//! Per-field term-frequency index with document frequencies and tf-idf.
//!
//! Counts are stored raw. Weighting happens at query time in [`Index::tfidf`]
//! as `tf * log10(N / df)`, where `df` counts documents containing the term in
//! any of the keyword, title, abstract or body fields.
//!
//! Section texts are indexed under [`FieldId::Section`] for inspection, but
//! they do not contribute to `df` or to any weight.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::{Article, Category};
use crate::textproc::{analyze, AnalyzerConfig};

pub const INDEX_FORMAT: &str = "artikull-index";
pub const INDEX_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("unknown document `{0}`")]
    UnknownDoc(String),
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("unsupported index file: expected format `{INDEX_FORMAT}` version {INDEX_VERSION}, found {found}")]
    Version { found: String },
    #[error("corrupt index file: {0}")]
    Corrupt(String),
    #[error("index I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldId {
    Keywords,
    Title,
    Abstract,
    Body,
    Section(u32),
}

impl FieldId {
    /// Fields that feed the recommendation weights and `df`.
    pub const WEIGHTED: [FieldId; 4] = [
        FieldId::Keywords,
        FieldId::Title,
        FieldId::Abstract,
        FieldId::Body,
    ];

    pub fn is_weighted(self) -> bool {
        !matches!(self, FieldId::Section(_))
    }
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldId::Keywords => f.write_str("keywords"),
            FieldId::Title => f.write_str("title"),
            FieldId::Abstract => f.write_str("abstract"),
            FieldId::Body => f.write_str("body"),
            FieldId::Section(i) => write!(f, "section:{i}"),
        }
    }
}

impl FromStr for FieldId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "keywords" => Ok(FieldId::Keywords),
            "title" => Ok(FieldId::Title),
            "abstract" => Ok(FieldId::Abstract),
            "body" => Ok(FieldId::Body),
            other => other
                .strip_prefix("section:")
                .and_then(|n| n.parse().ok())
                .map(FieldId::Section)
                .ok_or_else(|| format!("unknown field `{other}`")),
        }
    }
}

impl Serialize for FieldId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FieldId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocEntry {
    pub id: String,
    pub category: Category,
}

type TermCounts = BTreeMap<String, u32>;

/// Immutable index over a corpus. Documents are kept in ascending id order.
#[derive(Debug, Clone)]
pub struct Index {
    docs: Vec<DocEntry>,
    lookup: HashMap<String, usize>,
    /// field -> term -> doc ordinal -> raw count
    postings: BTreeMap<FieldId, BTreeMap<String, BTreeMap<usize, u32>>>,
    doc_freq: BTreeMap<String, u32>,
    /// doc ordinal -> field -> term -> raw count
    forward: Vec<BTreeMap<FieldId, TermCounts>>,
    analyzer_fingerprint: String,
}

impl PartialEq for Index {
    fn eq(&self, other: &Self) -> bool {
        self.docs == other.docs
            && self.postings == other.postings
            && self.doc_freq == other.doc_freq
            && self.analyzer_fingerprint == other.analyzer_fingerprint
    }
}

fn count(terms: Vec<String>) -> TermCounts {
    let mut counts = TermCounts::new();
    for t in terms {
        *counts.entry(t).or_default() += 1;
    }
    counts
}

fn analyze_article(article: &Article, config: &AnalyzerConfig) -> BTreeMap<FieldId, TermCounts> {
    let mut fields = BTreeMap::new();
    let mut put = |field, text: &str| {
        let counts = count(analyze(text, config));
        if !counts.is_empty() {
            fields.insert(field, counts);
        }
    };
    put(FieldId::Keywords, &article.keywords.join("\n"));
    put(FieldId::Title, &article.title);
    put(FieldId::Abstract, &article.abstract_text);
    put(FieldId::Body, &article.body);
    for (i, section) in article.sections.iter().enumerate() {
        put(FieldId::Section(i as u32), &section.text);
    }
    fields
}

impl Index {
    /// Analyzes every article and counts terms per field.
    pub fn build(articles: &[Article], config: &AnalyzerConfig) -> Result<Index, IndexError> {
        let mut order: Vec<&Article> = articles.iter().collect();
        order.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = order.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(IndexError::DuplicateId(w[0].id.clone()));
        }
        let docs = order
            .iter()
            .map(|a| DocEntry {
                id: a.id.clone(),
                category: a.category.clone(),
            })
            .collect();
        let forward = order
            .par_iter()
            .map(|a| analyze_article(a, config))
            .collect();
        Ok(Self::from_parts(docs, forward, config.fingerprint()))
    }

    fn from_parts(
        docs: Vec<DocEntry>,
        forward: Vec<BTreeMap<FieldId, TermCounts>>,
        analyzer_fingerprint: String,
    ) -> Index {
        let lookup = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), i))
            .collect();
        let mut postings: BTreeMap<FieldId, BTreeMap<String, BTreeMap<usize, u32>>> =
            BTreeMap::new();
        let mut doc_freq: BTreeMap<String, u32> = BTreeMap::new();
        for (doc, fields) in forward.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for (&field, counts) in fields {
                let by_term = postings.entry(field).or_default();
                for (term, &n) in counts {
                    by_term.entry(term.clone()).or_default().insert(doc, n);
                    if field.is_weighted() {
                        seen.insert(term);
                    }
                }
            }
            for term in seen {
                *doc_freq.entry(term.clone()).or_default() += 1;
            }
        }
        Index {
            docs,
            lookup,
            postings,
            doc_freq,
            forward,
            analyzer_fingerprint,
        }
    }

    /// Number of documents (`N`).
    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn docs(&self) -> &[DocEntry] {
        &self.docs
    }

    pub fn contains(&self, doc: &str) -> bool {
        self.lookup.contains_key(doc)
    }

    pub fn category(&self, doc: &str) -> Result<&Category, IndexError> {
        Ok(&self.docs[self.ordinal(doc)?].category)
    }

    pub fn analyzer_fingerprint(&self) -> &str {
        &self.analyzer_fingerprint
    }

    /// Warning text when `config` differs from the analyzer used at build time.
    pub fn check_analyzer(&self, config: &AnalyzerConfig) -> Option<String> {
        let fp = config.fingerprint();
        (fp != self.analyzer_fingerprint).then(|| {
            format!(
                "analyzer fingerprint {} does not match the index ({}); query terms may not line up with indexed terms",
                &fp[..12.min(fp.len())],
                &self.analyzer_fingerprint[..12.min(self.analyzer_fingerprint.len())]
            )
        })
    }

    /// Terms with `df >= 1`, in ascending order.
    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.doc_freq.keys().map(String::as_str)
    }

    pub fn vocabulary_len(&self) -> usize {
        self.doc_freq.len()
    }

    pub fn doc_freq(&self, term: &str) -> u32 {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    fn ordinal(&self, doc: &str) -> Result<usize, IndexError> {
        self.lookup
            .get(doc)
            .copied()
            .ok_or_else(|| IndexError::UnknownDoc(doc.to_string()))
    }

    /// Raw count of `term` in one field of `doc`.
    pub fn tf(&self, doc: &str, field: FieldId, term: &str) -> Result<u32, IndexError> {
        let ord = self.ordinal(doc)?;
        Ok(self.forward[ord]
            .get(&field)
            .and_then(|c| c.get(term))
            .copied()
            .unwrap_or(0))
    }

    /// Term counts of one field of `doc`.
    pub fn field_terms(&self, doc: &str, field: FieldId) -> Result<Option<&TermCounts>, IndexError> {
        let ord = self.ordinal(doc)?;
        Ok(self.forward[ord].get(&field))
    }

    /// Distinct terms of `doc` across the weighted fields.
    pub fn doc_terms(&self, doc: &str) -> Result<BTreeSet<&str>, IndexError> {
        let ord = self.ordinal(doc)?;
        Ok(self.forward[ord]
            .iter()
            .filter(|(f, _)| f.is_weighted())
            .flat_map(|(_, counts)| counts.keys().map(String::as_str))
            .collect())
    }

    /// Documents containing `term` in `field`, with raw counts.
    pub fn postings(&self, field: FieldId, term: &str) -> impl Iterator<Item = (&str, u32)> {
        self.postings
            .get(&field)
            .and_then(|t| t.get(term))
            .into_iter()
            .flatten()
            .map(|(&ord, &n)| (self.docs[ord].id.as_str(), n))
    }

    /// `log10(N / df)`, or 0 for a term outside the vocabulary.
    pub fn idf(&self, term: &str) -> f64 {
        match self.doc_freq(term) {
            0 => 0.0,
            df => (self.doc_count() as f64 / df as f64).log10(),
        }
    }

    /// `tf * log10(N / df)`. Unknown terms weigh 0; unknown documents are an error.
    pub fn tfidf(&self, doc: &str, field: FieldId, term: &str) -> Result<f64, IndexError> {
        let tf = self.tf(doc, field, term)?;
        if tf == 0 {
            return Ok(0.0);
        }
        Ok(tf as f64 * self.idf(term))
    }

    pub fn to_json(&self) -> String {
        let persisted = Persisted {
            format: INDEX_FORMAT.to_string(),
            version: INDEX_VERSION,
            analyzer_fingerprint: self.analyzer_fingerprint.clone(),
            doc_count: self.docs.len(),
            documents: self.docs.clone(),
            doc_freq: self.doc_freq.clone(),
            postings: self
                .postings
                .iter()
                .map(|(&field, terms)| {
                    let terms = terms
                        .iter()
                        .map(|(term, docs)| {
                            let docs = docs
                                .iter()
                                .map(|(&ord, &n)| (self.docs[ord].id.clone(), n))
                                .collect();
                            (term.clone(), docs)
                        })
                        .collect();
                    (field, terms)
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&persisted).expect("index serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Index, IndexError> {
        let value: Value = serde_json::from_str(text).map_err(|e| IndexError::Version {
            found: format!("unreadable header ({e})"),
        })?;
        let format = value.get("format").and_then(Value::as_str);
        let version = value.get("version").and_then(Value::as_u64);
        if format != Some(INDEX_FORMAT) || version != Some(INDEX_VERSION) {
            return Err(IndexError::Version {
                found: format!(
                    "format {} version {}",
                    format.unwrap_or("<missing>"),
                    version.map_or("<missing>".to_string(), |v| v.to_string())
                ),
            });
        }
        let persisted: Persisted =
            serde_json::from_value(value).map_err(|e| IndexError::Corrupt(e.to_string()))?;
        persisted.into_index()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Index, IndexError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// On-disk layout. Maps are ordered so output is byte-stable.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Persisted {
    format: String,
    version: u64,
    analyzer_fingerprint: String,
    doc_count: usize,
    documents: Vec<DocEntry>,
    doc_freq: BTreeMap<String, u32>,
    postings: BTreeMap<FieldId, BTreeMap<String, BTreeMap<String, u32>>>,
}

impl Persisted {
    fn into_index(self) -> Result<Index, IndexError> {
        if self.doc_count != self.documents.len() {
            return Err(IndexError::Corrupt(format!(
                "doc_count {} but {} documents listed",
                self.doc_count,
                self.documents.len()
            )));
        }
        if !self.documents.windows(2).all(|w| w[0].id < w[1].id) {
            return Err(IndexError::Corrupt(
                "documents are not in strictly ascending id order".into(),
            ));
        }
        let lookup: HashMap<&str, usize> = self
            .documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.as_str(), i))
            .collect();
        let mut forward: Vec<BTreeMap<FieldId, TermCounts>> =
            vec![BTreeMap::new(); self.documents.len()];
        for (field, terms) in self.postings {
            for (term, docs) in terms {
                for (doc, n) in docs {
                    let &ord = lookup.get(doc.as_str()).ok_or_else(|| {
                        IndexError::Corrupt(format!("posting for unknown document `{doc}`"))
                    })?;
                    if n == 0 {
                        return Err(IndexError::Corrupt(format!(
                            "zero count for `{term}` in `{doc}`"
                        )));
                    }
                    forward[ord]
                        .entry(field)
                        .or_default()
                        .insert(term.clone(), n);
                }
            }
        }
        let index = Index::from_parts(self.documents, forward, self.analyzer_fingerprint);
        if index.doc_freq != self.doc_freq {
            return Err(IndexError::Corrupt(
                "document frequencies do not match postings".into(),
            ));
        }
        Ok(index)
    }
}
