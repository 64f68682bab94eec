//! Precision, recall and F1 over binary relevance judgments, and the
//! stemming-mode by coefficient experiment grid.
//!
//! Recall uses a pooled denominator: for each query, the number of distinct
//! candidates judged related in any run. Relevance is a property of the
//! (query, candidate) pair, so judgments that disagree across runs are
//! rejected.
//!
//! Micro-averaged figures pool counts over all queries of a cell; macro
//! figures average the per-query ratios. Both are reported.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::Article;
use crate::index::{Index, IndexError};
use crate::recommend::{RecommendError, Recommendation, Recommender, WeightCoefficients};
use crate::textproc::{AnalyzerConfig, StemMode};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("relevant retrieved ({relevant}) exceeds retrieved ({retrieved})")]
    Precision { relevant: usize, retrieved: usize },
    #[error("relevant retrieved ({relevant}) exceeds total relevant ({total})")]
    Recall { relevant: usize, total: usize },
    #[error("judgment for query `{query}`, candidate `{candidate}`, run `{run}` appears twice")]
    DuplicateJudgment {
        query: String,
        candidate: String,
        run: String,
    },
    #[error("conflicting labels for query `{query}`, candidate `{candidate}` (runs `{first_run}` and `{second_run}`)")]
    ConflictingLabels {
        query: String,
        candidate: String,
        first_run: String,
        second_run: String,
    },
    #[error("judgments line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid experiment configuration: field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("query document `{0}` is not in the corpus")]
    UnknownQuery(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Recommend(#[from] RecommendError),
    #[error("evaluation I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl EvalError {
    fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        EvalError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Fraction of retrieved items that are relevant; 0 when nothing was retrieved.
pub fn precision(relevant_retrieved: usize, retrieved: usize) -> Result<f64, EvalError> {
    if relevant_retrieved > retrieved {
        return Err(EvalError::Precision {
            relevant: relevant_retrieved,
            retrieved,
        });
    }
    if retrieved == 0 {
        return Ok(0.0);
    }
    Ok(relevant_retrieved as f64 / retrieved as f64)
}

/// Fraction of relevant items that were retrieved; 0 when nothing is relevant.
pub fn recall(relevant_retrieved: usize, total_relevant: usize) -> Result<f64, EvalError> {
    if relevant_retrieved > total_relevant {
        return Err(EvalError::Recall {
            relevant: relevant_retrieved,
            total: total_relevant,
        });
    }
    if total_relevant == 0 {
        return Ok(0.0);
    }
    Ok(relevant_retrieved as f64 / total_relevant as f64)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    let denom = precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / denom
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relevance {
    Related,
    NotRelated,
}

impl Relevance {
    pub fn as_str(self) -> &'static str {
        match self {
            Relevance::Related => "related",
            Relevance::NotRelated => "not-related",
        }
    }
}

impl fmt::Display for Relevance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relevance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "related" | "1" => Ok(Relevance::Related),
            "not-related" | "not related" | "not_related" | "0" => Ok(Relevance::NotRelated),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub query_doc_id: String,
    pub candidate_doc_id: String,
    pub label: Relevance,
    pub run_id: String,
}

impl Judgment {
    pub fn new(query: &str, candidate: &str, label: Relevance, run: &str) -> Self {
        Judgment {
            query_doc_id: query.to_string(),
            candidate_doc_id: candidate.to_string(),
            label,
            run_id: run.to_string(),
        }
    }
}

/// Parses tab-separated `query_id  candidate_id  label  run_id` lines.
/// Blank lines, `#` comments and a `query_id` header line are skipped.
pub fn parse_judgments(text: &str) -> Result<Vec<Judgment>, EvalError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') || line.starts_with("query_id\t") {
            continue;
        }
        let err = |message: String| EvalError::Parse { line: n + 1, message };
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [query, candidate, label, run] = cols[..] else {
            return Err(err(format!("expected 4 tab-separated columns, found {}", cols.len())));
        };
        if query.is_empty() || candidate.is_empty() || run.is_empty() {
            return Err(err("empty query, candidate or run id".into()));
        }
        let label = label.parse().map_err(err)?;
        out.push(Judgment::new(query, candidate, label, run));
    }
    Ok(out)
}

pub fn read_judgments(path: impl AsRef<Path>) -> Result<Vec<Judgment>, EvalError> {
    parse_judgments(&fs::read_to_string(path)?)
}

pub fn render_judgments(judgments: &[Judgment]) -> String {
    let mut out = String::from("query_id\tcandidate_id\tlabel\trun_id\n");
    for j in judgments {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            j.query_doc_id, j.candidate_doc_id, j.label, j.run_id
        );
    }
    out
}

/// Validated judgments keyed by (query, candidate).
#[derive(Debug, Clone, Default)]
pub struct Judgments {
    labels: BTreeMap<(String, String), (Relevance, String)>,
}

impl Judgments {
    pub fn new(judgments: &[Judgment]) -> Result<Self, EvalError> {
        let mut runs: BTreeSet<(&str, &str, &str)> = BTreeSet::new();
        let mut labels: BTreeMap<(String, String), (Relevance, String)> = BTreeMap::new();
        for j in judgments {
            if !runs.insert((&j.query_doc_id, &j.candidate_doc_id, &j.run_id)) {
                return Err(EvalError::DuplicateJudgment {
                    query: j.query_doc_id.clone(),
                    candidate: j.candidate_doc_id.clone(),
                    run: j.run_id.clone(),
                });
            }
            let key = (j.query_doc_id.clone(), j.candidate_doc_id.clone());
            match labels.get(&key) {
                Some((label, first_run)) if *label != j.label => {
                    return Err(EvalError::ConflictingLabels {
                        query: key.0,
                        candidate: key.1,
                        first_run: first_run.clone(),
                        second_run: j.run_id.clone(),
                    })
                }
                Some(_) => {}
                None => {
                    labels.insert(key, (j.label, j.run_id.clone()));
                }
            }
        }
        Ok(Judgments { labels })
    }

    pub fn label(&self, query: &str, candidate: &str) -> Option<Relevance> {
        self.labels
            .get(&(query.to_string(), candidate.to_string()))
            .map(|(l, _)| *l)
    }

    /// Distinct related candidates per query, over all runs.
    pub fn pooled(&self) -> BTreeMap<String, usize> {
        let mut pools: BTreeMap<String, usize> = BTreeMap::new();
        for ((query, _), (label, _)) in &self.labels {
            let n = pools.entry(query.clone()).or_default();
            if *label == Relevance::Related {
                *n += 1;
            }
        }
        pools
    }

    pub fn pooled_for(&self, query: &str) -> usize {
        self.labels
            .range((query.to_string(), String::new())..)
            .take_while(|((q, _), _)| q == query)
            .filter(|(_, (l, _))| *l == Relevance::Related)
            .count()
    }
}

/// Pooled relevant count per query: distinct candidates labeled related in any run.
pub fn pool_relevant(judgments: &[Judgment]) -> Result<BTreeMap<String, usize>, EvalError> {
    Ok(Judgments::new(judgments)?.pooled())
}

/// Samples `n` distinct ids (all of them if fewer) from a seeded ChaCha8 stream.
/// Input order does not matter; the result is sorted.
pub fn sample_queries(ids: &[String], n: usize, seed: u64) -> Vec<String> {
    let mut pool: Vec<String> = ids.to_vec();
    pool.sort();
    pool.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<String> = pool.choose_multiple(&mut rng, n).cloned().collect();
    picked.sort();
    picked
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    fn new(precision: f64, recall: f64) -> Self {
        Metrics {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub query_doc_id: String,
    pub retrieved: usize,
    pub relevant_retrieved: usize,
    pub pooled_relevant: usize,
}

/// Scores of one run over a query set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub queries: Vec<QueryOutcome>,
    pub retrieved: usize,
    pub relevant_retrieved: usize,
    pub pooled_relevant: usize,
    /// (query, candidate) pairs that were retrieved but have no judgment.
    pub unjudged: Vec<(String, String)>,
    /// `None` when any retrieved pair is unjudged.
    pub micro: Option<Metrics>,
    pub macro_avg: Option<Metrics>,
}

impl RunScore {
    pub fn is_complete(&self) -> bool {
        self.unjudged.is_empty()
    }
}

/// Scores ranked candidate lists against the judgments. Missing queries count
/// as empty lists.
pub fn score_run<'a, I>(
    recommendations: I,
    queries: &[String],
    judgments: &Judgments,
) -> Result<RunScore, EvalError>
where
    I: IntoIterator<Item = &'a Recommendation>,
{
    let by_query: BTreeMap<&str, &Recommendation> = recommendations
        .into_iter()
        .map(|r| (r.query_doc_id.as_str(), r))
        .collect();
    let mut outcomes = Vec::with_capacity(queries.len());
    let mut unjudged = Vec::new();
    for query in queries {
        let ranked = by_query.get(query.as_str()).map_or(&[][..], |r| &r.ranked[..]);
        let mut relevant = 0;
        for cand in ranked {
            match judgments.label(query, &cand.doc_id) {
                Some(Relevance::Related) => relevant += 1,
                Some(Relevance::NotRelated) => {}
                None => unjudged.push((query.clone(), cand.doc_id.clone())),
            }
        }
        outcomes.push(QueryOutcome {
            query_doc_id: query.clone(),
            retrieved: ranked.len(),
            relevant_retrieved: relevant,
            pooled_relevant: judgments.pooled_for(query),
        });
    }
    let retrieved = outcomes.iter().map(|q| q.retrieved).sum();
    let relevant_retrieved = outcomes.iter().map(|q| q.relevant_retrieved).sum();
    let pooled_relevant = outcomes.iter().map(|q| q.pooled_relevant).sum();

    let (micro, macro_avg) = if unjudged.is_empty() {
        let micro = Metrics::new(
            precision(relevant_retrieved, retrieved)?,
            recall(relevant_retrieved, pooled_relevant)?,
        );
        let mut p_sum = 0.0;
        let mut r_sum = 0.0;
        for q in &outcomes {
            p_sum += precision(q.relevant_retrieved, q.retrieved)?;
            r_sum += recall(q.relevant_retrieved, q.pooled_relevant)?;
        }
        let n = outcomes.len().max(1) as f64;
        (Some(micro), Some(Metrics::new(p_sum / n, r_sum / n)))
    } else {
        (None, None)
    };

    Ok(RunScore {
        queries: outcomes,
        retrieved,
        relevant_retrieved,
        pooled_relevant,
        unjudged,
        micro,
        macro_avg,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub coeffs: WeightCoefficients,
    pub stem_mode: StemMode,
    pub k: usize,
    pub query_set: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub stem_mode: StemMode,
    pub coefficients: WeightCoefficients,
    pub k: usize,
    #[serde(flatten)]
    pub score: RunScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub cells: Vec<CellReport>,
}

/// Builds one index per stemming mode, recommends for every query of each
/// configuration and scores the lists. Cells come back in input order.
pub fn run_experiments(
    articles: &[Article],
    analyzer: &AnalyzerConfig,
    configs: &[ExperimentConfig],
    judgments: &Judgments,
) -> Result<EvalReport, EvalError> {
    let modes: BTreeSet<StemMode> = configs.iter().map(|c| c.stem_mode).collect();
    let indexes = modes
        .into_iter()
        .map(|mode| {
            let cfg = analyzer.clone().with_stem_mode(mode);
            Ok((mode, Index::build(articles, &cfg)?))
        })
        .collect::<Result<BTreeMap<_, _>, EvalError>>()?;

    let cells = configs
        .par_iter()
        .map(|config| {
            let index = &indexes[&config.stem_mode];
            if let Some(q) = config.query_set.iter().find(|q| !index.contains(q)) {
                return Err(EvalError::UnknownQuery(q.clone()));
            }
            let recommender = Recommender::new(index, config.coeffs);
            let recs = config
                .query_set
                .iter()
                .map(|q| recommender.recommend(q, config.k))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(CellReport {
                stem_mode: config.stem_mode,
                coefficients: config.coeffs,
                k: config.k,
                score: score_run(&recs, &config.query_set, judgments)?,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(EvalReport { seed: None, cells })
}

fn cell_text(score: &RunScore) -> String {
    match &score.micro {
        Some(m) => format!("P = {:.2} R = {:.2} F1 = {:.2}", m.precision, m.recall, m.f1),
        None => format!("incomplete ({} unjudged)", score.unjudged.len()),
    }
}

impl EvalReport {
    /// Text grid: one row per stemming mode, one column per coefficient
    /// setting, each in order of first appearance. Values are rounded to two
    /// decimals (micro-averaged).
    pub fn render_grid(&self) -> String {
        let mut rows: Vec<StemMode> = Vec::new();
        let mut cols: Vec<WeightCoefficients> = Vec::new();
        for c in &self.cells {
            if !rows.contains(&c.stem_mode) {
                rows.push(c.stem_mode);
            }
            if !cols.contains(&c.coefficients) {
                cols.push(c.coefficients);
            }
        }
        let mut table: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["Stemming".to_string()];
        header.extend(cols.iter().map(|c| c.to_string()));
        table.push(header);
        for mode in &rows {
            let mut line = vec![mode.label().to_string()];
            for coeffs in &cols {
                let cell = self
                    .cells
                    .iter()
                    .find(|c| c.stem_mode == *mode && c.coefficients == *coeffs);
                line.push(cell.map_or_else(|| "-".to_string(), |c| cell_text(&c.score)));
            }
            table.push(line);
        }
        let widths: Vec<usize> = (0..table.first().map_or(0, Vec::len))
            .map(|i| table.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &table {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s}{}", " ".repeat(w - s.chars().count())))
                .collect();
            let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }
}

/// Query selection for a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuerySelection {
    /// Explicit document ids.
    Ids(Vec<String>),
    /// A seeded random sample of this many documents.
    Sample(usize),
    /// Every query id that appears in the judgments.
    Judged,
}

/// Sweep description: the cross product of stemming modes and coefficient settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub k: usize,
    pub seed: u64,
    pub queries: QuerySelection,
    pub stem_modes: Vec<StemMode>,
    pub coefficients: Vec<WeightCoefficients>,
}

pub const DEFAULT_SEED: u64 = 42;

impl SweepSpec {
    /// The three reference coefficient settings under both stemming modes.
    pub fn reference(seed: u64, queries: usize) -> Self {
        SweepSpec {
            k: crate::recommend::DEFAULT_TOP_K,
            seed,
            queries: QuerySelection::Sample(queries),
            stem_modes: vec![StemMode::SingleRun, StemMode::Fixpoint],
            coefficients: WeightCoefficients::reference_set().to_vec(),
        }
    }

    /// Parses the JSON sweep file. Errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| EvalError::config("<file>", e.to_string()))?;
        let Value::Object(obj) = value else {
            return Err(EvalError::config("<file>", "expected a JSON object"));
        };
        for key in obj.keys() {
            if !["k", "seed", "queries", "stem_modes", "coefficients"].contains(&key.as_str()) {
                return Err(EvalError::config(key.clone(), "unknown field"));
            }
        }
        let k = match obj.get("k") {
            None => crate::recommend::DEFAULT_TOP_K,
            Some(v) => v
                .as_u64()
                .filter(|&k| k >= 1)
                .ok_or_else(|| EvalError::config("k", "expected a positive integer"))?
                as usize,
        };
        let seed = match obj.get("seed") {
            None => DEFAULT_SEED,
            Some(v) => v
                .as_u64()
                .ok_or_else(|| EvalError::config("seed", "expected a nonnegative integer"))?,
        };
        let queries = match obj.get("queries") {
            None => QuerySelection::Judged,
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| {
                EvalError::config(
                    "queries",
                    format!("expected {{\"sample\": n}}, {{\"ids\": [...]}} or \"judged\" ({e})"),
                )
            })?,
        };
        let stem_modes = match obj.get("stem_modes") {
            None => vec![StemMode::SingleRun, StemMode::Fixpoint],
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let field = format!("stem_modes[{i}]");
                    v.as_str()
                        .ok_or_else(|| EvalError::config(&field, "expected a string"))?
                        .parse::<StemMode>()
                        .map_err(|e| EvalError::config(&field, e.to_string()))
                })
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(EvalError::config("stem_modes", "expected an array")),
        };
        let coefficients = match obj.get("coefficients") {
            None => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    serde_json::from_value::<WeightCoefficients>(v.clone())
                        .map_err(|e| EvalError::config(format!("coefficients[{i}]"), e.to_string()))
                })
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(EvalError::config("coefficients", "expected an array")),
        };
        Ok(SweepSpec {
            k,
            seed,
            queries,
            stem_modes,
            coefficients,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Resolves the query set and expands the grid row by row.
    pub fn expand(&self, articles: &[Article], judgments: &[Judgment]) -> Vec<ExperimentConfig> {
        let query_set = match &self.queries {
            QuerySelection::Ids(ids) => ids.clone(),
            QuerySelection::Sample(n) => {
                let ids: Vec<String> = articles.iter().map(|a| a.id.clone()).collect();
                sample_queries(&ids, *n, self.seed)
            }
            QuerySelection::Judged => judgments
                .iter()
                .map(|j| j.query_doc_id.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };
        self.stem_modes
            .iter()
            .flat_map(|&stem_mode| {
                let query_set = query_set.clone();
                self.coefficients.iter().map(move |&coeffs| ExperimentConfig {
                    coeffs,
                    stem_mode,
                    k: self.k,
                    query_set: query_set.clone(),
                })
            })
            .collect()
    }
}

/// Expands and runs a sweep, recording the seed in the report.
pub fn run_sweep(
    articles: &[Article],
    analyzer: &AnalyzerConfig,
    spec: &SweepSpec,
    judgments: &[Judgment],
) -> Result<EvalReport, EvalError> {
    let validated = Judgments::new(judgments)?;
    let configs = spec.expand(articles, judgments);
    let mut report = run_experiments(articles, analyzer, &configs, &validated)?;
    report.seed = Some(spec.seed);
    Ok(report)
}
