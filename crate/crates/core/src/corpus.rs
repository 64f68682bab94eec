//! Article data model and the line-delimited corpus file.
//!
//! A corpus file holds one JSON object per line. See `docs/formats.md` for the
//! exact record layout.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

pub const DEFAULT_LANGUAGE: &str = "sq";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed record: field `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("invalid record: field `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("duplicate article id `{id}` (records {first} and {second})")]
    DuplicateId {
        id: String,
        first: usize,
        second: usize,
    },
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<CorpusError>,
    },
    #[error("cannot read corpus: {0}")]
    Io(#[from] std::io::Error),
}

impl CorpusError {
    fn parse(field: &str, message: impl Into<String>) -> Self {
        CorpusError::Parse {
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn validation(field: &str, message: impl Into<String>) -> Self {
        CorpusError::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Field named by a parse or validation error, looking through line wrappers.
    pub fn field(&self) -> Option<&str> {
        match self {
            CorpusError::Parse { field, .. } | CorpusError::Validation { field, .. } => {
                Some(field)
            }
            CorpusError::AtLine { source, .. } => source.field(),
            _ => None,
        }
    }
}

/// Subject category of an article. Open set; stored trimmed and lowercased.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Category(String);

impl Category {
    pub fn new(label: &str) -> Self {
        Category(label.trim().nfc().collect::<String>().to_lowercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub keywords: Vec<String>,
    pub body: String,
    pub sections: Vec<Section>,
    pub category: Category,
    pub language: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_path: Option<PathBuf>,
    /// Kept as metadata only; no scoring uses authors.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub authors: Vec<String>,
}

impl Article {
    /// Minimal article with empty optional fields.
    pub fn new(id: &str, title: &str, category: &str) -> Self {
        Article {
            id: id.to_string(),
            title: title.to_string(),
            abstract_text: String::new(),
            keywords: Vec::new(),
            body: String::new(),
            sections: Vec::new(),
            category: Category::new(category),
            language: DEFAULT_LANGUAGE.to_string(),
            source_path: None,
            authors: Vec::new(),
        }
    }

    pub fn with_abstract(mut self, text: &str) -> Self {
        self.abstract_text = text.to_string();
        self
    }

    pub fn with_body(mut self, text: &str) -> Self {
        self.body = text.to_string();
        self
    }

    pub fn with_keywords<I, S>(mut self, keywords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.keywords = keywords.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_sections(mut self, sections: Vec<Section>) -> Self {
        self.sections = sections;
        self
    }

    /// True when any of abstract, keywords or body is empty.
    pub fn is_degenerate(&self) -> bool {
        self.abstract_text.trim().is_empty()
            || self.keywords.iter().all(|k| k.trim().is_empty())
            || self.body.trim().is_empty()
    }

    /// Serializes to a single corpus-file line (no trailing newline).
    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("article serialization is infallible")
    }
}

const KNOWN_FIELDS: &[&str] = &[
    "id",
    "title",
    "abstract",
    "keywords",
    "body",
    "sections",
    "category",
    "language",
    "source_path",
    "authors",
];

fn nfc(s: &str) -> String {
    s.nfc().collect()
}

fn opt_string(obj: &Map<String, Value>, field: &str) -> Result<Option<String>, CorpusError> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(nfc(s))),
        Some(other) => Err(CorpusError::parse(
            field,
            format!("expected a string, found {}", kind(other)),
        )),
    }
}

fn string_list(obj: &Map<String, Value>, field: &str) -> Result<Vec<String>, CorpusError> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(nfc(s)),
                other => Err(CorpusError::parse(
                    field,
                    format!("expected an array of strings, found {} element", kind(other)),
                )),
            })
            .collect(),
        Some(other) => Err(CorpusError::parse(
            field,
            format!("expected an array, found {}", kind(other)),
        )),
    }
}

fn sections(obj: &Map<String, Value>) -> Result<Vec<Section>, CorpusError> {
    let items = match obj.get("sections") {
        None | Some(Value::Null) => return Ok(Vec::new()),
        Some(Value::Array(items)) => items,
        Some(other) => {
            return Err(CorpusError::parse(
                "sections",
                format!("expected an array, found {}", kind(other)),
            ))
        }
    };
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let Value::Object(sec) = item else {
                return Err(CorpusError::parse(
                    "sections",
                    format!("element {i} is not an object"),
                ));
            };
            let get = |name: &str| match sec.get(name) {
                Some(Value::String(s)) => Ok(nfc(s)),
                None | Some(Value::Null) => Ok(String::new()),
                Some(other) => Err(CorpusError::parse(
                    &format!("sections[{i}].{name}"),
                    format!("expected a string, found {}", kind(other)),
                )),
            };
            Ok(Section {
                heading: get("heading")?,
                text: get("text")?,
            })
        })
        .collect()
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Parses one corpus record. Text fields are NFC-normalized.
pub fn parse_article(record: &str) -> Result<Article, CorpusError> {
    let value: Value = serde_json::from_str(record)
        .map_err(|e| CorpusError::parse("record", e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(CorpusError::parse("record", "expected a JSON object"));
    };
    if let Some(unknown) = obj.keys().find(|k| !KNOWN_FIELDS.contains(&k.as_str())) {
        return Err(CorpusError::parse(unknown, "unknown field"));
    }

    let id = opt_string(&obj, "id")?
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| CorpusError::validation("id", "missing or empty"))?;
    let title = opt_string(&obj, "title")?
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| CorpusError::validation("title", "missing or empty"))?;
    let category = opt_string(&obj, "category")?
        .filter(|s| !s.trim().is_empty())
        .ok_or_else(|| CorpusError::validation("category", "missing or empty"))?;

    Ok(Article {
        id,
        title,
        abstract_text: opt_string(&obj, "abstract")?.unwrap_or_default(),
        keywords: string_list(&obj, "keywords")?,
        body: opt_string(&obj, "body")?.unwrap_or_default(),
        sections: sections(&obj)?,
        category: Category::new(&category),
        language: opt_string(&obj, "language")?
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| DEFAULT_LANGUAGE.to_string()),
        source_path: opt_string(&obj, "source_path")?.map(PathBuf::from),
        authors: string_list(&obj, "authors")?,
    })
}

/// Parses a whole corpus text. Blank lines are skipped.
pub fn parse_corpus(text: &str) -> Result<Vec<Article>, CorpusError> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(n, line)| {
            parse_article(line).map_err(|e| CorpusError::AtLine {
                line: n + 1,
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Article>, CorpusError> {
    parse_corpus(&fs::read_to_string(path)?)
}

pub fn write_corpus(path: impl AsRef<Path>, articles: &[Article]) -> Result<(), CorpusError> {
    let mut out = String::new();
    for article in articles {
        out.push_str(&article.to_record());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub article_count: usize,
    pub per_category_counts: BTreeMap<Category, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WarningKind {
    EmptyAbstract,
    EmptyKeywords,
    EmptyBody,
    SectionNotInBody { section: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Warning {
    pub id: String,
    #[serde(flatten)]
    pub kind: WarningKind,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            WarningKind::EmptyAbstract => write!(f, "{}: empty abstract", self.id),
            WarningKind::EmptyKeywords => write!(f, "{}: empty keyword list", self.id),
            WarningKind::EmptyBody => write!(f, "{}: empty body", self.id),
            WarningKind::SectionNotInBody { section } => {
                write!(f, "{}: section {section} text does not appear in body", self.id)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub stats: CorpusStats,
    pub warnings: Vec<Warning>,
}

/// Checks id uniqueness and required fields, then collects stats and warnings.
///
/// Warnings are sorted, so the report does not depend on input order.
pub fn validate_corpus(articles: &[Article]) -> Result<ValidationReport, CorpusError> {
    let mut seen: HashMap<&str, usize> = HashMap::with_capacity(articles.len());
    let mut report = ValidationReport::default();

    for (pos, article) in articles.iter().enumerate() {
        if article.id.trim().is_empty() {
            return Err(CorpusError::validation("id", format!("record {pos} has an empty id")));
        }
        if article.title.trim().is_empty() {
            return Err(CorpusError::validation(
                "title",
                format!("article `{}` has an empty title", article.id),
            ));
        }
        if let Some(&first) = seen.get(article.id.as_str()) {
            return Err(CorpusError::DuplicateId {
                id: article.id.clone(),
                first,
                second: pos,
            });
        }
        seen.insert(&article.id, pos);

        report.stats.article_count += 1;
        *report
            .stats
            .per_category_counts
            .entry(article.category.clone())
            .or_default() += 1;

        let mut warn = |kind| {
            report.warnings.push(Warning {
                id: article.id.clone(),
                kind,
            })
        };
        if article.abstract_text.trim().is_empty() {
            warn(WarningKind::EmptyAbstract);
        }
        if article.keywords.iter().all(|k| k.trim().is_empty()) {
            warn(WarningKind::EmptyKeywords);
        }
        if article.body.trim().is_empty() {
            warn(WarningKind::EmptyBody);
        }
        for (i, section) in article.sections.iter().enumerate() {
            if !article.body.contains(section.text.as_str()) {
                warn(WarningKind::SectionNotInBody { section: i });
            }
        }
    }
    report.warnings.sort();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_record_is_degenerate() {
        let a = parse_article(
            r#"{"id":"a1","title":"Mbi grafët","abstract":"","keywords":[],"body":"","category":"mathematics"}"#,
        )
        .unwrap();
        assert_eq!(a.id, "a1");
        assert_eq!(a.language, "sq");
        assert!(a.sections.is_empty());
        assert!(a.is_degenerate());
        assert_eq!(a.category.as_str(), "mathematics");
    }

    #[test]
    fn missing_id_is_validation_error() {
        let err = parse_article(r#"{"title":"T","category":"physics"}"#).unwrap_err();
        assert!(matches!(err, CorpusError::Validation { ref field, .. } if field == "id"));
    }

    #[test]
    fn missing_title_is_validation_error() {
        let err = parse_article(r#"{"id":"x","title":"  ","category":"physics"}"#).unwrap_err();
        assert_eq!(err.field(), Some("title"));
    }

    #[test]
    fn wrong_type_names_field() {
        let err = parse_article(r#"{"id":"x","title":"T","category":"c","keywords":"a, b"}"#)
            .unwrap_err();
        assert!(matches!(err, CorpusError::Parse { ref field, .. } if field == "keywords"));

        let err = parse_article(
            r#"{"id":"x","title":"T","category":"c","sections":[{"heading":1}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.field(), Some("sections[0].heading"));
    }

    #[test]
    fn unknown_field_rejected_but_authors_accepted() {
        let err = parse_article(r#"{"id":"x","title":"T","category":"c","titel":"oops"}"#)
            .unwrap_err();
        assert_eq!(err.field(), Some("titel"));
        let a = parse_article(r#"{"id":"x","title":"T","category":"c","authors":["A. B."]}"#)
            .unwrap();
        assert_eq!(a.authors, vec!["A. B.".to_string()]);
    }

    #[test]
    fn syntax_error_is_parse_error() {
        let err = parse_article("{not json").unwrap_err();
        assert_eq!(err.field(), Some("record"));
    }

    #[test]
    fn text_is_nfc_normalized() {
        // "ë" written as e + combining diaeresis
        let a = parse_article("{\"id\":\"x\",\"title\":\"Mbi grafe\u{0308}t\",\"category\":\"c\"}")
            .unwrap();
        assert_eq!(a.title, "Mbi grafët");
    }

    #[test]
    fn parse_corpus_reports_line() {
        let text = "{\"id\":\"a\",\"title\":\"T\",\"category\":\"c\"}\n\n{\"title\":\"U\",\"category\":\"c\"}\n";
        match parse_corpus(text).unwrap_err() {
            CorpusError::AtLine { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_corpus_validates() {
        let report = validate_corpus(&[]).unwrap();
        assert_eq!(report.stats.article_count, 0);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let a = Article::new("a1", "One", "physics");
        let b = Article::new("a1", "Two", "physics");
        match validate_corpus(&[a, b]).unwrap_err() {
            CorpusError::DuplicateId { id, first, second } => {
                assert_eq!((id.as_str(), first, second), ("a1", 0, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn one_empty_keyword_list_gives_one_warning() {
        let full = |id: &str| {
            Article::new(id, "Titull", "biology")
                .with_abstract("abstrakt")
                .with_body("trup")
                .with_keywords(["fjalë"])
        };
        let articles = vec![full("a"), full("b").with_keywords(Vec::<String>::new()), full("c")];
        let report = validate_corpus(&articles).unwrap();
        assert_eq!(report.stats.article_count, 3);
        assert_eq!(
            report.warnings,
            vec![Warning {
                id: "b".into(),
                kind: WarningKind::EmptyKeywords
            }]
        );
    }

    #[test]
    fn section_outside_body_warns() {
        let a = Article::new("a", "T", "c")
            .with_abstract("x")
            .with_keywords(["k"])
            .with_body("hyrje. metoda.")
            .with_sections(vec![
                Section {
                    heading: "Hyrje".into(),
                    text: "hyrje.".into(),
                },
                Section {
                    heading: "Rezultate".into(),
                    text: "rezultate".into(),
                },
            ]);
        let report = validate_corpus(&[a]).unwrap();
        assert_eq!(
            report.warnings.iter().map(|w| w.kind).collect::<Vec<_>>(),
            vec![WarningKind::SectionNotInBody { section: 1 }]
        );
    }

    #[test]
    fn record_round_trip() {
        let mut a = Article::new("a1", "Mbi grafët", "Mathematics")
            .with_abstract("Një studim")
            .with_keywords(["graf", "teori"])
            .with_body("Trupi i artikullit. Hyrje.")
            .with_sections(vec![Section {
                heading: "Hyrje".into(),
                text: "Hyrje.".into(),
            }]);
        a.source_path = Some(PathBuf::from("pdf/a1.pdf"));
        a.authors = vec!["E. G.".into()];
        let line = a.to_record();
        assert!(!line.contains('\n'));
        assert_eq!(parse_article(&line).unwrap(), a);
    }
}
