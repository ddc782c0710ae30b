//! JSON-over-HTTP service. Models are read-only once trained.

use std::collections::{HashMap, HashSet};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use ppforest_core::diagnostics::Dissimilarity;
use ppforest_core::{BaselineConfig, BootstrapKind, ForestConfig, ProximityMode};
use serde::{Deserialize, Serialize};
use tower_http::compression::CompressionLayer;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::error::Error;
use crate::io::read_csv;
use crate::registry::{train, Registry, TrainSpec, TrainedModel};
use crate::schema::SCHEMA;
use crate::views::{self, MdsParams, ModelList};

/// Training requests above this many cases are rejected.
pub const MAX_TRAIN_N: usize = 50_000;
const MAX_BODY_BYTES: usize = 256 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub registry: PathBuf,
    /// Worker threads for training and proximities; 0 means one per core.
    pub threads: usize,
    /// Allowed CORS origin; `None` allows any.
    pub cors_origin: Option<String>,
}

pub struct AppState {
    registry: Registry,
    threads: usize,
    loaded: RwLock<HashMap<String, Arc<TrainedModel>>>,
    training: Mutex<HashSet<String>>,
    // single writer for registry files
    write_lock: Mutex<()>,
}

impl AppState {
    pub fn new(registry: Registry, threads: usize) -> Self {
        AppState {
            registry,
            threads,
            loaded: RwLock::new(HashMap::new()),
            training: Mutex::new(HashSet::new()),
            write_lock: Mutex::new(()),
        }
    }

    /// Model artifacts, loaded from disk once and then shared.
    fn model(&self, id: &str) -> Result<Arc<TrainedModel>, ApiError> {
        if let Some(m) = self.loaded.read().expect("model cache poisoned").get(id) {
            return Ok(m.clone());
        }
        if !self.registry.contains(id) {
            return Err(Error::UnknownModel(id.into()).into());
        }
        let m = Arc::new(self.registry.load(id)?);
        self.loaded.write().expect("model cache poisoned").insert(id.into(), m.clone());
        Ok(m)
    }
}

/// `{"error": {"code", "message"}}` with a matching status.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn invalid(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        use ppforest_core::Error as Core;
        let message = e.to_string();
        match e {
            Error::UnknownModel(_) | Error::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "not_found", message),
            Error::Model(Core::UnknownTree(_) | Core::UnknownClass(_) | Core::UnknownNode(_)) => {
                ApiError::new(StatusCode::NOT_FOUND, "not_found", message)
            }
            Error::InProgress(_) => ApiError::new(StatusCode::CONFLICT, "conflict", message),
            e if e.exit_code() != 4 => ApiError::invalid(message),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
        }
    }
}

impl From<ppforest_core::Error> for ApiError {
    fn from(e: ppforest_core::Error) -> Self {
        Error::from(e).into()
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: ErrorDetail<'a>,
}

#[derive(Serialize)]
struct ErrorDetail<'a> {
    code: &'a str,
    message: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: ErrorDetail { code: self.code, message: &self.message } };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Runs blocking model work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/models", get(list_models).post(create_model))
        .route("/models/{id}", get(get_entry))
        .route("/models/{id}/diagnostics", get(diagnostics))
        .route("/models/{id}/trees/{k}", get(tree_detail))
        .route("/models/{id}/roc", get(roc))
        .route("/models/{id}/mds", get(mds))
        .route("/models/{id}/proximity", get(proximity))
        .route("/models/{id}/compare", get(compare))
        .route("/schema", get(schema))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

/// The router with gzip compression and CORS.
pub fn app(state: Arc<AppState>, cors_origin: Option<&str>) -> Result<Router, Error> {
    let origin = match cors_origin {
        None => AllowOrigin::any(),
        Some(o) => AllowOrigin::exact(
            HeaderValue::from_str(o).map_err(|_| Error::Config(format!("invalid CORS origin `{o}`")))?,
        ),
    };
    let cors = CorsLayer::new().allow_origin(origin).allow_methods(tower_http::cors::Any).allow_headers([header::CONTENT_TYPE]);
    Ok(router(state).layer(CompressionLayer::new()).layer(cors))
}

pub async fn serve(addr: SocketAddr, config: ServerConfig) -> Result<(), Error> {
    let state = Arc::new(AppState::new(Registry::open(&config.registry)?, config.threads));
    let app = app(state, config.cors_origin.as_deref())?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn list_models(State(s): State<Arc<AppState>>) -> ApiResult<ModelList> {
    blocking(move || Ok(Json(ModelList { models: s.registry.list()? }))).await
}

async fn get_entry(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<crate::registry::ModelRegistryEntry> {
    blocking(move || Ok(Json(s.model(&id)?.entry.clone()))).await
}

async fn diagnostics(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<ppforest_core::DiagnosticsBundle> {
    blocking(move || Ok(Json(s.model(&id)?.diagnostics.clone()))).await
}

async fn tree_detail(State(s): State<Arc<AppState>>, Path((id, k)): Path<(String, String)>) -> ApiResult<views::TreeDetail> {
    blocking(move || {
        let m = s.model(&id)?;
        let k: usize = k.parse().map_err(|_| ApiError::invalid(format!("tree index `{k}` is not a non-negative integer")))?;
        Ok(Json(views::tree_detail(&m, k)?))
    })
    .await
}

async fn roc(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<views::RocResponse> {
    blocking(move || {
        let m = s.model(&id)?;
        Ok(Json(views::roc_view(&m.entry, &m.diagnostics, q.get("class").map(String::as_str))?))
    })
    .await
}

fn parse_mode(q: &HashMap<String, String>) -> Result<ProximityMode, ApiError> {
    match q.get("mode").map(String::as_str) {
        None | Some("all_trees") => Ok(ProximityMode::AllTrees),
        Some("oob_only") => Ok(ProximityMode::OobOnly),
        Some(other) => Err(ApiError::invalid(format!("mode must be all_trees or oob_only, got `{other}`"))),
    }
}

async fn mds(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<views::MdsResponse> {
    blocking(move || {
        let m = s.model(&id)?;
        let dims = match q.get("d") {
            None => m.entry.class_names.len() - 1,
            Some(d) => d.parse().map_err(|_| ApiError::invalid(format!("d must be a positive integer, got `{d}`")))?,
        };
        let dissimilarity = match q.get("dissimilarity").map(String::as_str) {
            None | Some("one_minus") => Dissimilarity::OneMinus,
            Some("sqrt_one_minus") => Dissimilarity::SqrtOneMinus,
            Some(other) => {
                return Err(ApiError::invalid(format!(
                    "dissimilarity must be one_minus or sqrt_one_minus, got `{other}`"
                )))
            }
        };
        let params = MdsParams { dims, dissimilarity, mode: parse_mode(&q)? };
        Ok(Json(views::mds_view(&m, params, s.threads)?))
    })
    .await
}

async fn proximity(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<views::ProximityResponse> {
    blocking(move || {
        let m = s.model(&id)?;
        Ok(Json(views::proximity_view(&m, parse_mode(&q)?, s.threads)?))
    })
    .await
}

async fn compare(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<views::CompareResponse> {
    blocking(move || Ok(Json(views::compare_view(&*s.model(&id)?)))).await
}

async fn schema() -> Response {
    ([(header::CONTENT_TYPE, "application/schema+json")], SCHEMA).into_response()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRequest {
    pub name: String,
    pub label: String,
    #[serde(default)]
    pub csv: Option<String>,
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub trees: Option<usize>,
    #[serde(default)]
    pub vars_per_node: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub bootstrap: Option<BootstrapKind>,
    #[serde(default)]
    pub standardize: Option<bool>,
    #[serde(default)]
    pub baseline: bool,
    #[serde(default)]
    pub mtry: Option<usize>,
}

/// `⌊√p⌋`, at least 1.
pub fn default_mtry(p: usize) -> usize {
    ((p as f64).sqrt().floor() as usize).max(1)
}

impl TrainRequest {
    /// Training spec for data with `p` predictors; unset fields take the defaults.
    pub fn spec(&self, p: usize) -> TrainSpec {
        let seed = self.seed.unwrap_or(0);
        let mut forest = ForestConfig::defaults_for(p, seed);
        if let Some(t) = self.trees {
            forest.n_trees = t;
        }
        if let Some(v) = self.vars_per_node {
            forest.vars_per_node = v;
        }
        if let Some(b) = self.bootstrap {
            forest.bootstrap = b;
        }
        if let Some(st) = self.standardize {
            forest.standardize = st;
        }
        let baseline = self.baseline.then(|| BaselineConfig {
            n_trees: forest.n_trees,
            mtry: self.mtry.unwrap_or_else(|| default_mtry(p)),
            seed,
            bootstrap: forest.bootstrap,
        });
        TrainSpec { name: self.name.clone(), forest, baseline }
    }
}

struct TrainingGuard<'a> {
    set: &'a Mutex<HashSet<String>>,
    id: String,
}

impl Drop for TrainingGuard<'_> {
    fn drop(&mut self) {
        self.set.lock().expect("training set poisoned").remove(&self.id);
    }
}

async fn create_model(State(s): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: TrainRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::invalid(format!("invalid train request: {e}")))?;
    blocking(move || {
        let d = match (&req.csv, &req.path) {
            (Some(csv), None) => read_csv(csv.as_bytes(), &req.label)?,
            (None, Some(path)) => crate::io::load_csv(path, &req.label)?,
            _ => return Err(ApiError::invalid("give exactly one of `csv` or `path`")),
        };
        if d.n() > MAX_TRAIN_N {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "too_large",
                format!("training is limited to {MAX_TRAIN_N} cases, got {}", d.n()),
            ));
        }
        let spec = req.spec(d.p());
        spec.validate(&d)?;
        let id = spec.model_id(&d);
        if s.registry.contains(&id) {
            return Ok((StatusCode::OK, Json(s.model(&id)?.entry.clone())).into_response());
        }
        if !s.training.lock().expect("training set poisoned").insert(id.clone()) {
            return Err(Error::InProgress(id).into());
        }
        let _guard = TrainingGuard { set: &s.training, id: id.clone() };
        let m = train(&d, &spec, s.threads)?;
        {
            let _w = s.write_lock.lock().expect("registry lock poisoned");
            s.registry.store(&m)?;
        }
        let entry = m.entry.clone();
        s.loaded.write().expect("model cache poisoned").insert(id, Arc::new(m));
        Ok((StatusCode::CREATED, Json(entry)).into_response())
    })
    .await
}
