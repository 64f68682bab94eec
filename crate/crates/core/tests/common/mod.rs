#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use artikull::textproc::{AnalyzerConfig, StemMode, StemRule};
use artikull::Article;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

const SYLLABLES: &[&str] = &[
    "ba", "ke", "li", "mo", "nu", "rë", "së", "ta", "vi", "zo", "gë", "pa", "dri", "shu", "ço", "fe",
    "hi", "ja", "ku", "lla",
];

const SUFFIXES: &[&str] = &["", "", "", "i", "et", "eve", "imi", "ët", "ve"];

/// Letters-only pseudo-words, distinct, deterministic for a seed.
pub fn pseudo_vocabulary(rng: &mut ChaCha8Rng, size: usize) -> Vec<String> {
    let mut words = std::collections::BTreeSet::new();
    while words.len() < size {
        let n = rng.gen_range(2..=3);
        let w: String = (0..n)
            .map(|_| *SYLLABLES.choose(rng).unwrap())
            .collect::<Vec<_>>()
            .concat();
        let suffix = SUFFIXES.choose(rng).unwrap();
        words.insert(format!("{w}{suffix}"));
    }
    let mut v: Vec<String> = words.into_iter().collect();
    v.shuffle(rng);
    v
}

fn phrase(rng: &mut ChaCha8Rng, vocab: &[String], max_len: usize) -> String {
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| vocab.choose(rng).unwrap().as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Random corpus: up to `max_docs` articles over at most `max_vocab` raw words,
/// 1 to 4 categories, with some degenerate articles and verbatim duplicates.
pub fn random_corpus(seed: u64, max_docs: usize, max_vocab: usize) -> Vec<Article> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_docs = rng.gen_range(2..=max_docs);
    let vocab_size = rng.gen_range(5..=max_vocab);
    let vocab = pseudo_vocabulary(&mut rng, vocab_size);
    let n_cats = rng.gen_range(1..=4);
    let categories = ["mathematics", "physics", "biology", "chemistry"];
    let mut articles: Vec<Article> = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let id = format!("d{i:03}");
        let category = categories[rng.gen_range(0..n_cats)];
        if i > 0 && rng.gen_bool(0.08) {
            let src = articles[rng.gen_range(0..i)].clone();
            articles.push(Article { id, ..src });
            continue;
        }
        let mut title = phrase(&mut rng, &vocab, 6);
        if title.trim().is_empty() {
            title = vocab.choose(&mut rng).unwrap().clone();
        }
        let keywords = (0..rng.gen_range(0..=4))
            .map(|_| phrase(&mut rng, &vocab, 2))
            .filter(|k| !k.is_empty())
            .collect::<Vec<_>>();
        let degenerate = rng.gen_bool(0.1);
        let (abs, body) = if degenerate {
            (String::new(), String::new())
        } else {
            (phrase(&mut rng, &vocab, 25), phrase(&mut rng, &vocab, 120))
        };
        articles.push(
            Article::new(&id, &title, category)
                .with_keywords(keywords)
                .with_abstract(&abs)
                .with_body(&body),
        );
    }
    articles
}

/// Small analyzer used by synthetic tests: a couple of stop words and rules.
pub fn synthetic_analyzer(mode: StemMode) -> AnalyzerConfig {
    let rules = vec![
        StemRule::new("eve", "", 3).unwrap(),
        StemRule::new("imi", "", 3).unwrap(),
        StemRule::new("et", "", 3).unwrap(),
        StemRule::new("ve", "", 3).unwrap(),
        StemRule::new("ët", "", 3).unwrap(),
        StemRule::new("i", "", 3).unwrap(),
    ];
    AnalyzerConfig::new(["i", "e", "të", "dhe"], rules, mode)
}

fn pick(rng: &mut ChaCha8Rng, src: &[String], count: usize) -> Vec<String> {
    (0..count).map(|_| src.choose(rng).unwrap().clone()).collect()
}

/// Topic-structured corpus for the sweep fixture: three categories with two
/// topics of five articles each. Ids encode category and topic (`bio-a3`).
pub fn topic_corpus(seed: u64) -> Vec<Article> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = pseudo_vocabulary(&mut rng, 140);
    let mut chunks = vocab.chunks(20);
    let general: Vec<String> = chunks.next().unwrap().to_vec();
    let categories = ["biology", "chemistry", "physics"];
    let mut articles = Vec::new();
    for cat in categories {
        let shared: Vec<String> = chunks.next().unwrap().to_vec();
        let topical = chunks.next().unwrap();
        // topics overlap in four words
        let topic_a: Vec<String> = topical[..12].to_vec();
        let topic_b: Vec<String> = topical[8..].to_vec();
        for (t, topic) in [("a", &topic_a), ("b", &topic_b)] {
            for n in 0..5 {
                let mut body = pick(&mut rng, topic, 8);
                body.extend(pick(&mut rng, &shared, 20));
                body.extend(pick(&mut rng, &general, 12));
                body.shuffle(&mut rng);
                let mut abs = pick(&mut rng, topic, 3);
                abs.extend(pick(&mut rng, &shared, 6));
                abs.shuffle(&mut rng);
                let mut title = pick(&mut rng, topic, 1);
                title.extend(pick(&mut rng, &shared, 2));
                let mut keywords = pick(&mut rng, topic, 1);
                keywords.extend(pick(&mut rng, &shared, 1));
                let id = format!("{}-{t}{n}", &cat[..3]);
                articles.push(
                    Article::new(&id, &title.join(" "), cat)
                        .with_keywords(keywords)
                        .with_abstract(&abs.join(" "))
                        .with_body(&body.join(" ")),
                );
            }
        }
    }
    articles
}

/// Planted relevance for the topic corpus: same category and topic letter.
pub fn same_topic(query: &str, candidate: &str) -> bool {
    let topic = |id: &str| id.split_once('-').map(|(c, t)| (c.to_string(), t[..1].to_string()));
    topic(query) == topic(candidate)
}
