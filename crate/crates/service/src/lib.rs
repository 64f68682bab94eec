//! HTTP endpoints over an immutable index snapshot.
//!
//! Reads go to the current snapshot. `POST /articles` only stages records;
//! `POST /admin/rebuild` folds the staged records into a new snapshot and
//! swaps it in whole.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use artikull::corpus::{parse_article, validate_corpus, write_corpus, CorpusError};
use artikull::recommend::{batch_recommend, Recommendation, Recommender, DEFAULT_TOP_K};
use artikull::search::search;
use artikull::textproc::AnalyzerConfig;
use artikull::{Article, BatchRecommendations, Index, SearchResult, WeightCoefficients};
use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Value};
use tokio::sync::Mutex;

pub const DEFAULT_SEARCH_LIMIT: usize = 10;
pub const MAX_LIMIT: usize = 100;
pub const REQUEST_ID_HEADER: &str = "x-request-id";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub analyzer: AnalyzerConfig,
    pub coefficients: WeightCoefficients,
    /// Depth of the precomputed recommendation lists.
    pub batch_k: usize,
    /// Where rebuilt corpora are written, if anywhere.
    pub corpus_path: Option<PathBuf>,
    /// Where rebuilt indexes are written, if anywhere.
    pub index_path: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            analyzer: AnalyzerConfig::default(),
            coefficients: WeightCoefficients::default(),
            batch_k: DEFAULT_TOP_K,
            corpus_path: None,
            index_path: None,
        }
    }
}

/// One generation of served data. Never mutated after construction.
#[derive(Debug)]
pub struct Snapshot {
    pub generation: u64,
    pub articles: Vec<Article>,
    pub index: Index,
    pub batch: Option<BatchRecommendations>,
}

impl Snapshot {
    fn build(
        generation: u64,
        articles: Vec<Article>,
        config: &ServiceConfig,
    ) -> Result<Snapshot, ApiError> {
        let index = Index::build(&articles, &config.analyzer)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "index", e.to_string()))?;
        Ok(Snapshot::from_index(generation, articles, index, config))
    }

    fn from_index(generation: u64, articles: Vec<Article>, index: Index, config: &ServiceConfig) -> Snapshot {
        let batch = batch_recommend(&index, &config.coefficients, config.batch_k.max(1)).ok();
        Snapshot {
            generation,
            articles,
            index,
            batch,
        }
    }
}

pub struct AppState {
    config: ServiceConfig,
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    /// Staged records. Held for the whole rebuild so writers are serialized.
    staged: Mutex<Vec<Article>>,
    next_request: AtomicU64,
}

impl AppState {
    /// A service with no index loaded. Reads answer 503 until a rebuild.
    pub fn empty(config: ServiceConfig) -> Arc<AppState> {
        Arc::new(AppState {
            config,
            snapshot: RwLock::new(None),
            staged: Mutex::new(Vec::new()),
            next_request: AtomicU64::new(1),
        })
    }

    /// A service serving `articles`, indexed with the configured analyzer.
    pub fn with_articles(config: ServiceConfig, articles: Vec<Article>) -> Result<Arc<AppState>, ApiError> {
        validate_corpus(&articles).map_err(ApiError::from_corpus)?;
        let snapshot = Snapshot::build(1, articles, &config)?;
        let state = AppState::empty(config);
        state.swap(snapshot);
        Ok(state)
    }

    /// A service serving a prebuilt index. `articles` must be the corpus it
    /// was built from; they are kept for later rebuilds.
    pub fn with_index(config: ServiceConfig, articles: Vec<Article>, index: Index) -> Arc<AppState> {
        let snapshot = Snapshot::from_index(1, articles, index, &config);
        let state = AppState::empty(config);
        state.swap(snapshot);
        state
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn snapshot(&self) -> Option<Arc<Snapshot>> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn swap(&self, snapshot: Snapshot) {
        *self.snapshot.write().expect("snapshot lock") = Some(Arc::new(snapshot));
    }

    fn request_id(&self, headers: &HeaderMap) -> String {
        headers
            .get(REQUEST_ID_HEADER)
            .and_then(|v| v.to_str().ok())
            .filter(|v| !v.is_empty() && v.len() <= 128)
            .map(str::to_string)
            .unwrap_or_else(|| format!("req-{:06}", self.next_request.fetch_add(1, Ordering::Relaxed)))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorDetail {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApiEnvelope {
    pub request_id: String,
    pub status: u16,
    pub payload: Option<Value>,
    pub error: Option<ErrorDetail>,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            field: None,
        }
    }

    fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    fn no_index() -> Self {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_index", "no index is loaded")
    }

    fn from_corpus(err: CorpusError) -> Self {
        match &err {
            CorpusError::DuplicateId { id, .. } => {
                ApiError::new(StatusCode::CONFLICT, "duplicate_id", format!("article id {id:?} already exists"))
                    .with_field("id")
            }
            CorpusError::Io(_) => ApiError::internal(),
            _ => {
                let field = err.field().map(str::to_string);
                let mut e = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_article", err.to_string());
                e.field = field;
                e
            }
        }
    }

    fn internal() -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "internal error")
    }

    pub fn status(&self) -> StatusCode {
        self.status
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({})", self.message, self.status)
    }
}

impl std::error::Error for ApiError {}

fn respond(request_id: String, result: Result<(StatusCode, Value), ApiError>) -> Response {
    let (status, envelope) = match result {
        Ok((status, payload)) => (
            status,
            ApiEnvelope {
                request_id,
                status: status.as_u16(),
                payload: Some(payload),
                error: None,
            },
        ),
        Err(e) => (
            e.status,
            ApiEnvelope {
                request_id,
                status: e.status.as_u16(),
                payload: None,
                error: Some(ErrorDetail {
                    code: e.code,
                    message: e.message,
                    field: e.field,
                }),
            },
        ),
    };
    (status, Json(envelope)).into_response()
}

fn query_params(
    query: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Result<HashMap<String, String>, ApiError> {
    query
        .map(|Query(params)| params)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_query", e.body_text()))
}

fn parse_count(params: &HashMap<String, String>, name: &str, default: usize) -> Result<usize, ApiError> {
    match params.get(name) {
        None => Ok(default),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_parameter",
                format!("{name} must be a positive integer"),
            )
            .with_field(name)),
        },
    }
}

async fn ep_search(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    query: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Response {
    let request_id = state.request_id(&headers);
    let result = (|| {
        let params = query_params(query)?;
        let limit = parse_count(&params, "limit", DEFAULT_SEARCH_LIMIT)?.min(MAX_LIMIT);
        let snapshot = state.snapshot().ok_or_else(ApiError::no_index)?;
        let query = params.get("q").map(String::as_str).unwrap_or("");
        let result: SearchResult = search(&snapshot.index, query, &state.config.analyzer, limit)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "empty_query", e.to_string()).with_field("q"))?;
        Ok((
            StatusCode::OK,
            json!({ "query": query, "limit": limit, "hits": result.hits, "query_terms": result.query_terms }),
        ))
    })();
    respond(request_id, result)
}

#[derive(Serialize)]
struct RecommendPayload<'a> {
    query_doc_id: &'a str,
    k: usize,
    source: &'static str,
    coefficients: WeightCoefficients,
    recommendations: &'a [artikull::recommend::ScoredDoc],
}

fn recommend_payload(snapshot: &Snapshot, config: &ServiceConfig, doc: &str, k: usize) -> Result<Value, ApiError> {
    if !snapshot.index.contains(doc) {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "unknown_article", format!("no article with id {doc:?}")));
    }
    let (rec, source): (Recommendation, _) = match snapshot.batch.as_ref().and_then(|b| b.get(doc).filter(|_| k <= b.k)) {
        Some(pre) => {
            let mut rec = pre.clone();
            rec.ranked.truncate(k);
            rec.k_requested = k;
            (rec, "precomputed")
        }
        None => {
            let rec = Recommender::new(&snapshot.index, config.coefficients)
                .recommend(doc, k)
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_parameter", e.to_string()))?;
            (rec, "on_demand")
        }
    };
    Ok(serde_json::to_value(RecommendPayload {
        query_doc_id: doc,
        k,
        source,
        coefficients: config.coefficients,
        recommendations: &rec.ranked,
    })
    .expect("serializable payload"))
}

async fn ep_recommend(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    UrlPath(doc): UrlPath<String>,
    query: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> Response {
    let request_id = state.request_id(&headers);
    let k = query_params(query).and_then(|p| parse_count(&p, "k", DEFAULT_TOP_K));
    let result = match (k, state.snapshot()) {
        (Err(e), _) => Err(e),
        (_, None) => Err(ApiError::no_index()),
        (Ok(k), Some(snapshot)) => {
            let st = state.clone();
            tokio::task::spawn_blocking(move || recommend_payload(&snapshot, &st.config, &doc, k))
                .await
                .unwrap_or_else(|_| Err(ApiError::internal()))
                .map(|payload| (StatusCode::OK, payload))
        }
    };
    respond(request_id, result)
}

async fn ep_ingest(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Response {
    let request_id = state.request_id(&headers);
    let result = async {
        let text = std::str::from_utf8(&body)
            .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", "body is not UTF-8"))?;
        let article = parse_article(text).map_err(ApiError::from_corpus)?;
        let mut staged = state.staged.lock().await;
        let live = state.snapshot().map(|s| s.index.contains(&article.id)).unwrap_or(false);
        if live || staged.iter().any(|a| a.id == article.id) {
            return Err(ApiError::from_corpus(CorpusError::DuplicateId {
                id: article.id.clone(),
                first: 0,
                second: 0,
            }));
        }
        tracing::info!(id = %article.id, "article staged");
        let id = article.id.clone();
        staged.push(article);
        Ok((StatusCode::ACCEPTED, json!({ "id": id, "staged": staged.len() })))
    }
    .await;
    respond(request_id, result)
}

fn write_atomically(path: &Path, write: impl FnOnce(&Path) -> io::Result<()>) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    write(&tmp)?;
    fs::rename(&tmp, path)
}

async fn ep_rebuild(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Response {
    let request_id = state.request_id(&headers);
    let result = async {
        let mut staged = state.staged.lock().await;
        let current = state.snapshot();
        let mut articles = current.as_ref().map(|s| s.articles.clone()).unwrap_or_default();
        let added = staged.len();
        articles.extend(staged.iter().cloned());
        let generation = current.map_or(1, |s| s.generation + 1);

        let st = state.clone();
        let snapshot = tokio::task::spawn_blocking(move || -> Result<Snapshot, ApiError> {
            validate_corpus(&articles).map_err(ApiError::from_corpus)?;
            let snapshot = Snapshot::build(generation, articles, &st.config)?;
            if let Some(path) = &st.config.corpus_path {
                write_atomically(path, |p| write_corpus(p, &snapshot.articles).map_err(io::Error::other))
                    .map_err(|e| {
                        tracing::error!(error = %e, "writing corpus failed");
                        ApiError::internal()
                    })?;
            }
            if let Some(path) = &st.config.index_path {
                write_atomically(path, |p| snapshot.index.save(p).map_err(io::Error::other)).map_err(|e| {
                    tracing::error!(error = %e, "writing index failed");
                    ApiError::internal()
                })?;
            }
            Ok(snapshot)
        })
        .await
        .unwrap_or_else(|_| Err(ApiError::internal()))?;

        let payload = json!({
            "generation": snapshot.generation,
            "doc_count": snapshot.index.doc_count(),
            "added": added,
        });
        state.swap(snapshot);
        staged.clear();
        tracing::info!(generation, added, "index rebuilt");
        Ok((StatusCode::OK, payload))
    }
    .await;
    respond(request_id, result)
}

async fn fallback(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Response {
    let request_id = state.request_id(&headers);
    respond(request_id, Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/search", get(ep_search))
        .route("/articles/:id/recommendations", get(ep_recommend))
        .route("/articles", post(ep_ingest))
        .route("/admin/rebuild", post(ep_rebuild))
        .fallback(fallback)
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}
