//! Content-based indexing, search and recommendation for scientific articles.
//!
//! The pipeline is:
//!
//! 1. [`corpus`] reads a line-delimited JSON corpus into [`Article`]s.
//! 2. [`textproc`] turns field text into terms (tokenize, drop stop words, stem).
//! 3. [`index`] stores raw per-field term counts plus document frequencies.
//! 4. [`recommend`] builds field-weighted tf-idf vectors and ranks articles of
//!    the same category by cosine similarity.
//! 5. [`search`] answers keyword queries ranked by raw term frequency.
//! 6. [`eval`] scores recommendation runs against binary relevance judgments
//!    with a pooled recall denominator.

pub mod corpus;
pub mod eval;
pub mod index;
pub mod recommend;
pub mod search;
pub mod textproc;

pub use corpus::{Article, Category, CorpusError, CorpusStats, Section};
pub use eval::{EvalReport, ExperimentConfig, Judgment, Relevance, SweepSpec};
pub use index::{FieldId, Index, IndexError};
pub use recommend::{
    BatchRecommendations, CategoryScope, DocVector, Recommendation, Recommender, WeightCoefficients,
};
pub use search::{SearchError, SearchResult};
pub use textproc::{AnalyzerConfig, StemMode, StemRule};
