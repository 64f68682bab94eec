//! Brute-force reference recommender: dense vectors over the full vocabulary,
//! every candidate scored and sorted. Shares only text analysis with the
//! library.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use artikull::textproc::{analyze, AnalyzerConfig};
use artikull::{Article, WeightCoefficients};

pub struct DenseDoc {
    pub id: String,
    pub category: String,
    pub keywords: HashMap<String, u32>,
    pub title: HashMap<String, u32>,
    pub abstract_text: HashMap<String, u32>,
    pub body: HashMap<String, u32>,
}

fn counts(text: &str, config: &AnalyzerConfig) -> HashMap<String, u32> {
    let mut m = HashMap::new();
    for t in analyze(text, config) {
        *m.entry(t).or_insert(0) += 1;
    }
    m
}

pub fn dense_docs(articles: &[Article], config: &AnalyzerConfig) -> Vec<DenseDoc> {
    articles
        .iter()
        .map(|a| DenseDoc {
            id: a.id.clone(),
            category: a.category.as_str().to_string(),
            keywords: counts(&a.keywords.join("\n"), config),
            title: counts(&a.title, config),
            abstract_text: counts(&a.abstract_text, config),
            body: counts(&a.body, config),
        })
        .collect()
}

pub struct DenseModel {
    pub ids: Vec<String>,
    pub categories: Vec<String>,
    pub vocabulary: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

pub fn dense_model(
    articles: &[Article],
    config: &AnalyzerConfig,
    coeffs: &WeightCoefficients,
) -> DenseModel {
    let docs = dense_docs(articles, config);
    let n = docs.len() as f64;
    let vocabulary: Vec<String> = docs
        .iter()
        .flat_map(|d| {
            d.keywords
                .keys()
                .chain(d.title.keys())
                .chain(d.abstract_text.keys())
                .chain(d.body.keys())
                .cloned()
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let df: Vec<u32> = vocabulary
        .iter()
        .map(|t| {
            docs.iter()
                .filter(|d| {
                    d.keywords.contains_key(t)
                        || d.title.contains_key(t)
                        || d.abstract_text.contains_key(t)
                        || d.body.contains_key(t)
                })
                .count() as u32
        })
        .collect();
    let vectors = docs
        .iter()
        .map(|d| {
            vocabulary
                .iter()
                .zip(&df)
                .map(|(t, &df)| {
                    let idf = (n / df as f64).log10();
                    let tf = |m: &HashMap<String, u32>| m.get(t).copied().unwrap_or(0) as f64;
                    let kw = if d.keywords.contains_key(t) { 1.0 } else { 0.0 };
                    coeffs.kappa() * kw
                        + coeffs.tau() * (tf(&d.title) * idf)
                        + coeffs.alpha() * (tf(&d.abstract_text) * idf)
                        + coeffs.beta() * (tf(&d.body) * idf)
                })
                .collect()
        })
        .collect();
    DenseModel {
        ids: docs.iter().map(|d| d.id.clone()).collect(),
        categories: docs.iter().map(|d| d.category.clone()).collect(),
        vocabulary,
        vectors,
    }
}

pub fn dense_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).min(1.0)
    }
}

/// query id -> ranked (candidate id, score), same category, positive scores only.
pub fn dense_recommend_all(
    articles: &[Article],
    config: &AnalyzerConfig,
    coeffs: &WeightCoefficients,
    k: usize,
) -> BTreeMap<String, Vec<(String, f64)>> {
    let model = dense_model(articles, config, coeffs);
    let mut out = BTreeMap::new();
    for q in 0..model.ids.len() {
        let mut scored: Vec<(String, f64)> = (0..model.ids.len())
            .filter(|&c| c != q && model.categories[c] == model.categories[q])
            .map(|c| {
                (
                    model.ids[c].clone(),
                    dense_cosine(&model.vectors[q], &model.vectors[c]),
                )
            })
            .filter(|(_, s)| *s > 0.0)
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        out.insert(model.ids[q].clone(), scored);
    }
    out
}
