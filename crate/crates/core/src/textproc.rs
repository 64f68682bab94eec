//! Text analysis: tokenization, stop-word removal and ordered suffix-rule stemming.
//!
//! [`analyze`] always runs the stages in the same order: tokenize, remove stop
//! words, stem. Stop words are matched before stemming, so a stemmed form of
//! a stop word is not filtered.
//!
//! The stemmer is a table of [`StemRule`]s tried in order. The default table
//! (`data/albanian_rules.txt`) approximates common Albanian inflectional
//! endings; it is data, not a reference stemmer, and can be replaced with
//! `AnalyzerConfig::new` or `AnalyzerConfig::load`.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

pub const DEFAULT_RULES: &str = include_str!("../data/albanian_rules.txt");
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/albanian_stopwords.txt");

#[derive(Debug, Error)]
pub enum TextprocError {
    #[error("rule file line {line}: {message}")]
    Rule { line: usize, message: String },
    #[error("invalid stem rule: {0}")]
    InvalidRule(String),
    #[error("unknown stem mode `{0}` (expected `single` or `fixpoint`)")]
    UnknownStemMode(String),
    #[error("cannot read analyzer file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StemMode {
    /// One pass of the stemmer per word.
    #[serde(rename = "single")]
    SingleRun,
    /// Passes repeat until the word stops changing.
    #[serde(rename = "fixpoint")]
    Fixpoint,
}

impl StemMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StemMode::SingleRun => "single",
            StemMode::Fixpoint => "fixpoint",
        }
    }

    /// Row label used in rendered experiment grids.
    pub fn label(self) -> &'static str {
        match self {
            StemMode::SingleRun => "Single run stemming",
            StemMode::Fixpoint => "Multiple run stemming",
        }
    }
}

impl fmt::Display for StemMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StemMode {
    type Err = TextprocError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" | "single-run" | "singlerun" => Ok(StemMode::SingleRun),
            "fixpoint" | "multiple" | "multiple-run" => Ok(StemMode::Fixpoint),
            _ => Err(TextprocError::UnknownStemMode(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StemRule {
    suffix: String,
    replacement: String,
    min_stem_length: usize,
}

impl StemRule {
    pub fn new(suffix: &str, replacement: &str, min_stem_length: usize) -> Result<Self, TextprocError> {
        let suffix: String = suffix.nfc().collect::<String>().to_lowercase();
        if suffix.is_empty() {
            return Err(TextprocError::InvalidRule("suffix must be nonempty".into()));
        }
        if min_stem_length == 0 {
            return Err(TextprocError::InvalidRule(format!(
                "min_stem_length for suffix `{suffix}` must be positive"
            )));
        }
        Ok(StemRule {
            suffix,
            replacement: replacement.nfc().collect::<String>().to_lowercase(),
            min_stem_length,
        })
    }

    pub fn suffix(&self) -> &str {
        &self.suffix
    }

    pub fn replacement(&self) -> &str {
        &self.replacement
    }

    pub fn min_stem_length(&self) -> usize {
        self.min_stem_length
    }

    /// Rewritten word, or `None` when the suffix does not match or the result
    /// would be shorter than `min_stem_length` characters.
    pub fn apply(&self, word: &str) -> Option<String> {
        let stem = word.strip_suffix(self.suffix.as_str())?;
        let len = stem.chars().count() + self.replacement.chars().count();
        if len < self.min_stem_length {
            return None;
        }
        let mut out = String::with_capacity(stem.len() + self.replacement.len());
        out.push_str(stem);
        out.push_str(&self.replacement);
        Some(out)
    }

    /// Whether every application strictly shortens the word.
    pub fn is_shortening(&self) -> bool {
        self.replacement.chars().count() < self.suffix.chars().count()
    }
}

/// Parses a rule file: `<suffix> <replacement> <min_stem_length>` per line,
/// `-` for an empty replacement, `#` comments.
pub fn parse_rules(text: &str) -> Result<Vec<StemRule>, TextprocError> {
    let mut rules = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| TextprocError::Rule { line: n + 1, message };
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [suffix, replacement, min] = parts[..] else {
            return Err(err(format!("expected 3 columns, found {}", parts.len())));
        };
        let replacement = if replacement == "-" { "" } else { replacement };
        let min: usize = min
            .parse()
            .map_err(|_| err(format!("min_stem_length `{min}` is not a positive integer")))?;
        rules.push(StemRule::new(suffix, replacement, min).map_err(|e| err(e.to_string()))?);
    }
    Ok(rules)
}

/// Parses a stop-word file: one word per line, `#` comments.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(normalize_word)
        .collect()
}

/// Indices of rules that can keep or grow word length.
pub fn lint_rules(rules: &[StemRule]) -> Vec<usize> {
    rules
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.is_shortening())
        .map(|(i, _)| i)
        .collect()
}

fn normalize_word(w: &str) -> String {
    w.nfc().collect::<String>().to_lowercase().nfc().collect()
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

/// Splits text into lowercased, NFC-normalized runs of letters and digits.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with(text, true)
}

fn tokenize_with(text: &str, lowercase: bool) -> Vec<String> {
    let normalized: String = text.nfc().collect();
    normalized
        .split(|c: char| !is_token_char(c))
        .filter(|t| !t.is_empty())
        .map(|t| {
            if lowercase {
                t.to_lowercase().nfc().collect()
            } else {
                t.to_string()
            }
        })
        .collect()
}

pub fn remove_stopwords(tokens: Vec<String>, stopwords: &BTreeSet<String>) -> Vec<String> {
    tokens
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .collect()
}

/// Applies the first applicable rule once.
pub fn stem_single(word: &str, rules: &[StemRule]) -> String {
    rules
        .iter()
        .find_map(|r| r.apply(word))
        .unwrap_or_else(|| word.to_string())
}

/// Applies [`stem_single`] until it no longer changes the word.
///
/// Stops after a pass that does not shorten the word, which only happens with
/// rule tables that fail [`lint_rules`].
pub fn stem_fixpoint(word: &str, rules: &[StemRule]) -> String {
    let mut current = word.to_string();
    loop {
        let next = stem_single(&current, rules);
        if next == current {
            return current;
        }
        let shortened = next.chars().count() < current.chars().count();
        current = next;
        if !shortened {
            return current;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    stopwords: BTreeSet<String>,
    rules: Vec<StemRule>,
    stem_mode: StemMode,
    lowercase: bool,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self::albanian(StemMode::SingleRun)
    }
}

impl AnalyzerConfig {
    pub fn new<I, S>(stopwords: I, rules: Vec<StemRule>, stem_mode: StemMode) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        AnalyzerConfig {
            stopwords: stopwords.into_iter().map(|s| normalize_word(s.as_ref())).collect(),
            rules,
            stem_mode,
            lowercase: true,
        }
    }

    /// Shipped Albanian stop words and rule table.
    pub fn albanian(stem_mode: StemMode) -> Self {
        let rules = parse_rules(DEFAULT_RULES).expect("shipped rule file parses");
        AnalyzerConfig {
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
            rules,
            stem_mode,
            lowercase: true,
        }
    }

    /// Loads from optional rule and stop-word files, falling back to the shipped ones.
    pub fn load(
        rules_path: Option<&Path>,
        stopwords_path: Option<&Path>,
        stem_mode: StemMode,
    ) -> Result<Self, TextprocError> {
        let rules = match rules_path {
            Some(p) => parse_rules(&fs::read_to_string(p)?)?,
            None => parse_rules(DEFAULT_RULES)?,
        };
        let stopwords = match stopwords_path {
            Some(p) => parse_stopwords(&fs::read_to_string(p)?),
            None => parse_stopwords(DEFAULT_STOPWORDS),
        };
        Ok(AnalyzerConfig {
            stopwords,
            rules,
            stem_mode,
            lowercase: true,
        })
    }

    pub fn with_stem_mode(mut self, stem_mode: StemMode) -> Self {
        self.stem_mode = stem_mode;
        self
    }

    pub fn with_lowercase(mut self, lowercase: bool) -> Self {
        self.lowercase = lowercase;
        self
    }

    pub fn stopwords(&self) -> &BTreeSet<String> {
        &self.stopwords
    }

    pub fn rules(&self) -> &[StemRule] {
        &self.rules
    }

    pub fn stem_mode(&self) -> StemMode {
        self.stem_mode
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn stem(&self, word: &str) -> String {
        match self.stem_mode {
            StemMode::SingleRun => stem_single(word, &self.rules),
            StemMode::Fixpoint => stem_fixpoint(word, &self.rules),
        }
    }

    /// SHA-256 over a canonical rendering of the whole configuration, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"artikull-analyzer/1\n");
        hasher.update(format!("mode={}\nlowercase={}\n", self.stem_mode, self.lowercase));
        for w in &self.stopwords {
            hasher.update(b"stop\t");
            hasher.update(w.as_bytes());
            hasher.update(b"\n");
        }
        for r in &self.rules {
            hasher.update(format!("rule\t{}\t{}\t{}\n", r.suffix, r.replacement, r.min_stem_length));
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Tokenize, remove stop words, stem.
pub fn analyze(text: &str, config: &AnalyzerConfig) -> Vec<String> {
    let tokens = tokenize_with(text, config.lowercase);
    remove_stopwords(tokens, &config.stopwords)
        .iter()
        .map(|t| config.stem(t))
        .collect()
}
