use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use artikull::corpus::{read_corpus, validate_corpus};
use artikull::eval::{
    read_judgments, run_experiments, run_sweep, sample_queries, EvalError, ExperimentConfig,
    Judgments, SweepSpec, DEFAULT_SEED,
};
use artikull::recommend::{RecommendError, Recommender, DEFAULT_TOP_K};
use artikull::search::search;
use artikull::textproc::{AnalyzerConfig, StemMode};
use artikull::{Index, IndexError, WeightCoefficients};
use artikull_service::{AppState, ServiceConfig};
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

/// Keyword search and content-based recommendation for scientific articles.
#[derive(Parser)]
#[command(name = "artikull", version)]
struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and print statistics and warnings.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build an index from a corpus.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[command(flatten)]
        analyzer: AnalyzerArgs,
    },
    /// Keyword search over an index.
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 10)]
        limit: usize,
        #[command(flatten)]
        analyzer: AnalyzerArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recommendations for one article.
    Recommend {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        doc: String,
        #[command(flatten)]
        coeffs: CoeffArgs,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recommendations for every article in an index.
    Batch {
        #[arg(long)]
        index: PathBuf,
        #[command(flatten)]
        coeffs: CoeffArgs,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score one configuration against relevance judgments.
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        #[command(flatten)]
        analyzer: AnalyzerArgs,
        #[command(flatten)]
        coeffs: CoeffArgs,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        /// Sample this many query articles instead of using every judged query.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Write the JSON report here; the text grid goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a grid of stemming modes and coefficient settings.
    Sweep {
        #[arg(long)]
        corpus: PathBuf,
        /// JSON sweep description.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        /// Overrides the seed in the sweep file.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for report.txt and report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve search, recommendation and ingestion over HTTP.
    Serve {
        #[arg(long, env = "ARTIKULL_CORPUS")]
        corpus: PathBuf,
        #[arg(long, env = "ARTIKULL_INDEX")]
        index: Option<PathBuf>,
        #[arg(long, env = "ARTIKULL_BIND", default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[command(flatten)]
        analyzer: AnalyzerArgs,
        #[command(flatten)]
        coeffs: CoeffArgs,
        /// Depth of the precomputed recommendation lists.
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
    },
}

#[derive(Args)]
struct AnalyzerArgs {
    /// Suffix rule file (defaults to the shipped Albanian rules).
    #[arg(long, env = "ARTIKULL_RULES")]
    rules: Option<PathBuf>,
    /// Stop-word file (defaults to the shipped Albanian list).
    #[arg(long, env = "ARTIKULL_STOPWORDS")]
    stopwords: Option<PathBuf>,
    /// single or fixpoint.
    #[arg(long, default_value = "single")]
    stem_mode: StemMode,
}

#[derive(Args)]
struct CoeffArgs {
    #[arg(long, default_value_t = 0.4, allow_negative_numbers = true)]
    kappa: f64,
    #[arg(long, default_value_t = 0.3, allow_negative_numbers = true)]
    tau: f64,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    beta: f64,
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        CliError::data(e)
    }
}

impl From<RecommendError> for CliError {
    fn from(e: RecommendError) -> Self {
        match e {
            RecommendError::CoefficientSum { .. } | RecommendError::CoefficientRange { .. } | RecommendError::InvalidK => {
                CliError::Usage(e.to_string())
            }
            other => CliError::data(other),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Config { .. } => CliError::Usage(e.to_string()),
            other => CliError::data(other),
        }
    }
}

type CliResult = Result<(), CliError>;

impl AnalyzerArgs {
    fn load(&self) -> Result<AnalyzerConfig, CliError> {
        AnalyzerConfig::load(self.rules.as_deref(), self.stopwords.as_deref(), self.stem_mode)
            .map_err(CliError::data)
    }
}

impl CoeffArgs {
    fn validate(&self) -> Result<WeightCoefficients, CliError> {
        Ok(WeightCoefficients::new(self.kappa, self.tau, self.alpha, self.beta)?)
    }
}

fn check_k(k: usize) -> CliResult {
    if k == 0 {
        return Err(CliError::Usage("--top-k must be at least 1".into()));
    }
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(CliError::data)
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable output") + "\n"
}

fn load_index(path: &Path) -> Result<Index, CliError> {
    Index::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_articles(path: &Path) -> Result<Vec<artikull::Article>, CliError> {
    read_corpus(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn warn_analyzer(index: &Index, analyzer: &AnalyzerConfig) {
    if let Some(w) = index.check_analyzer(analyzer) {
        eprintln!("warning: {w}");
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Ingest { corpus, out } => {
            let articles = read_articles(&corpus)?;
            let report = validate_corpus(&articles).map_err(CliError::data)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            emit(out.as_deref(), &to_json(&report))
        }
        Command::Index { corpus, index, analyzer } => {
            let analyzer = analyzer.load()?;
            let articles = read_articles(&corpus)?;
            validate_corpus(&articles).map_err(CliError::data)?;
            let built = Index::build(&articles, &analyzer)?;
            built.save(&index)?;
            let summary = serde_json::json!({
                "documents": built.doc_count(),
                "terms": built.vocabulary_len(),
                "analyzer_fingerprint": built.analyzer_fingerprint(),
            });
            emit(None, &to_json(&summary))
        }
        Command::Search { index, query, limit, analyzer, out } => {
            if limit == 0 {
                return Err(CliError::Usage("--limit must be at least 1".into()));
            }
            let analyzer = analyzer.load()?;
            let index = load_index(&index)?;
            warn_analyzer(&index, &analyzer);
            let result = search(&index, &query, &analyzer, limit).map_err(|e| CliError::Usage(e.to_string()))?;
            emit(out.as_deref(), &to_json(&result))
        }
        Command::Recommend { index, doc, coeffs, top_k, out } => {
            let coeffs = coeffs.validate()?;
            check_k(top_k)?;
            let index = load_index(&index)?;
            if !index.contains(&doc) {
                return Err(CliError::Data(format!("unknown article id {doc:?}")));
            }
            let rec = Recommender::new(&index, coeffs).recommend(&doc, top_k)?;
            emit(out.as_deref(), &to_json(&rec))
        }
        Command::Batch { index, coeffs, top_k, out } => {
            let coeffs = coeffs.validate()?;
            check_k(top_k)?;
            let index = load_index(&index)?;
            let batch = Recommender::new(&index, coeffs).batch(top_k)?;
            emit(out.as_deref(), &batch.to_json())
        }
        Command::Evaluate {
            corpus,
            judgments,
            analyzer,
            coeffs,
            top_k,
            sample,
            seed,
            out,
        } => {
            let coeffs = coeffs.validate()?;
            check_k(top_k)?;
            let analyzer = analyzer.load()?;
            let articles = read_articles(&corpus)?;
            let raw = read_judgments(&judgments)?;
            let judged = Judgments::new(&raw)?;
            let query_set = match sample {
                Some(n) => {
                    let ids: Vec<String> = articles.iter().map(|a| a.id.clone()).collect();
                    sample_queries(&ids, n, seed)
                }
                None => judged.pooled().into_keys().collect(),
            };
            let config = ExperimentConfig {
                coeffs,
                stem_mode: analyzer.stem_mode(),
                k: top_k,
                query_set,
            };
            let mut report = run_experiments(&articles, &analyzer, &[config], &judged)?;
            report.seed = sample.map(|_| seed);
            if let Some(path) = &out {
                emit(Some(path), &report.to_json())?;
            }
            emit(None, &report.render_grid())
        }
        Command::Sweep {
            corpus,
            spec,
            judgments,
            rules,
            stopwords,
            seed,
            out,
        } => {
            let mut spec = SweepSpec::load(&spec)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let analyzer = AnalyzerConfig::load(rules.as_deref(), stopwords.as_deref(), StemMode::SingleRun)
                .map_err(CliError::data)?;
            let articles = read_articles(&corpus)?;
            let raw = read_judgments(&judgments)?;
            let report = run_sweep(&articles, &analyzer, &spec, &raw)?;
            if let Some(dir) = &out {
                fs::create_dir_all(dir).map_err(CliError::data)?;
                emit(Some(&dir.join("report.txt")), &report.render_grid())?;
                emit(Some(&dir.join("report.json")), &report.to_json())?;
            }
            emit(None, &report.render_grid())
        }
        Command::Serve {
            corpus,
            index,
            bind,
            analyzer,
            coeffs,
            top_k,
        } => {
            let coeffs = coeffs.validate()?;
            check_k(top_k)?;
            let analyzer = analyzer.load()?;
            let articles = read_articles(&corpus)?;
            validate_corpus(&articles).map_err(CliError::data)?;
            let config = ServiceConfig {
                analyzer: analyzer.clone(),
                coefficients: coeffs,
                batch_k: top_k,
                corpus_path: Some(corpus),
                index_path: index.clone(),
            };
            let prebuilt = match index.as_deref().filter(|p| p.exists()) {
                Some(path) => {
                    let idx = load_index(path)?;
                    match idx.check_analyzer(&analyzer) {
                        None => Some(idx),
                        Some(w) => {
                            eprintln!("warning: {w}; rebuilding from the corpus");
                            None
                        }
                    }
                }
                None => None,
            };
            let state = match prebuilt {
                Some(idx) => AppState::with_index(config, articles, idx),
                None => AppState::with_articles(config, articles).map_err(CliError::data)?,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(CliError::data)?;
            runtime
                .block_on(artikull_service::serve(bind, state))
                .map_err(CliError::data)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level)))
        .with_writer(std::io::stderr)
        .init();

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
