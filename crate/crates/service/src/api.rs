//! JSON API handlers. Every JSON body carries `schema_version`; every
//! response carries the [`SCHEMA_HEADER`] header.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::header::{CONTENT_DISPOSITION, CONTENT_TYPE};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{middleware, Json, Router};
use lighthouse_core::codegen::{
    generate_solver_bundle, generate_solver_bundle_with, package_archive, routine_bundle, routine_bundle_with,
    BackendRegistry, Bundle, BundleKind, Language, TemplateStore,
};
use lighthouse_core::matfeat::{compute_extended_features, measure_features, parse_matrix_market};
use lighthouse_core::mlselect::{ProblemKind, SolverConfig};
use lighthouse_core::taxonomy::{FacetFilter, GuidedSession, Library, RoutineRecord};
use lighthouse_core::textsearch::Mode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::kernel::{compile_kernel, resolve_seeds, SeedSpec};
use crate::recommend::{RecommendError, RequestOptions};
use crate::store::{is_id, new_id};
use crate::{AppState, DownloadInfo, MatrixAnalysis, UploadInfo, SCHEMA_HEADER, SCHEMA_VERSION};

/// The published response schema.
pub const OPENAPI: &str = include_str!("../api/openapi.json");

type ApiResult<T = Json<Value>> = Result<T, ApiError>;

/// `value` with the schema version added.
fn reply(value: impl Serialize) -> ApiResult {
    let mut v = serde_json::to_value(value).map_err(|e| ApiError::Internal(e.to_string()))?;
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
        }
        None => return Err(ApiError::Internal("response body is not an object".into())),
    }
    Ok(Json(v))
}

fn body<T>(r: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    r.map(|Json(v)| v).map_err(|e| ApiError::BadRequest(e.body_text()))
}

fn query<T>(r: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    r.map(|Query(v)| v).map_err(|e| ApiError::BadRequest(e.body_text()))
}

/// Ids are server-generated hex; anything else cannot name a record.
fn checked_id(what: &'static str, id: String) -> Result<String, ApiError> {
    if is_id(&id) {
        Ok(id)
    } else {
        Err(ApiError::NotFound { what, id })
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))
}

pub fn router(state: Arc<AppState>) -> Router {
    // multipart framing adds a little on top of the file itself
    let upload_limit = usize::try_from(state.config.upload_cap).unwrap_or(usize::MAX).saturating_add(64 * 1024);
    Router::new()
        .route("/api/health", get(health))
        .route("/api/schema", get(schema))
        .route("/api/libraries", get(libraries))
        .route("/api/guided/{id}", get(guided_view))
        .route("/api/guided/{id}/start", post(guided_start))
        .route("/api/guided/{id}/answer", post(guided_answer))
        .route("/api/guided/{id}/back", post(guided_back))
        .route("/api/search", get(search))
        .route("/api/complete", get(complete))
        .route("/api/routines/{id}", get(routine))
        .route("/api/advanced", post(advanced))
        .route("/api/matrix", post(upload_matrix).layer(DefaultBodyLimit::max(upload_limit)))
        .route("/api/matrix/{id}/features", get(matrix_features))
        .route("/api/recommend", post(recommend))
        .route("/api/bundle", post(bundle))
        .route("/api/download/{id}", get(download))
        .route("/api/kernel", post(kernel))
        .fallback(|| async { ApiError::NotFound { what: "endpoint", id: String::new() } })
        .layer(middleware::map_response(|mut r: Response| async move {
            r.headers_mut().insert(SCHEMA_HEADER, HeaderValue::from(SCHEMA_VERSION));
            r
        }))
        .with_state(state)
}

async fn health(State(s): State<Arc<AppState>>) -> ApiResult {
    reply(json!({ "status": "ok", "models": s.recommender.versions() }))
}

async fn schema() -> Response {
    ([(CONTENT_TYPE, "application/json")], OPENAPI).into_response()
}

#[derive(Serialize)]
struct LibraryInfo {
    name: Library,
    routines: usize,
    guided_search: bool,
}

async fn libraries(State(s): State<Arc<AppState>>) -> ApiResult {
    let libraries: Vec<LibraryInfo> = Library::ALL
        .into_iter()
        .map(|l| LibraryInfo {
            name: l,
            routines: s.taxonomy.routines().iter().filter(|r| r.library == l).count(),
            guided_search: s.taxonomy.has_tree(l),
        })
        .collect();
    reply(json!({ "libraries": libraries }))
}

#[derive(Serialize)]
struct RoutineSummary<'a> {
    id: &'a str,
    library: Library,
    name: &'a str,
    description: &'a str,
    problem_class: &'a str,
    matrix_type: &'a str,
    storage: &'a str,
}

impl<'a> From<&'a RoutineRecord> for RoutineSummary<'a> {
    fn from(r: &'a RoutineRecord) -> Self {
        Self {
            id: &r.id,
            library: r.library,
            name: &r.name,
            description: &r.description,
            problem_class: &r.problem_class,
            matrix_type: &r.matrix_type,
            storage: &r.storage,
        }
    }
}

fn session_reply(s: &AppState, session: &GuidedSession) -> ApiResult {
    let view = session.view(&s.taxonomy);
    let mut v = serde_json::to_value(&view).map_err(|e| ApiError::Internal(e.to_string()))?;
    if view.finished {
        let results: Vec<RoutineSummary> =
            view.candidates.iter().filter_map(|id| s.taxonomy.routine(id).ok()).map(Into::into).collect();
        v["results"] = json!(results);
    }
    reply(v)
}

async fn guided_start(State(s): State<Arc<AppState>>, Path(library): Path<String>) -> ApiResult {
    let library: Library = library.parse()?;
    let session = s.taxonomy.start_session(library, new_id())?;
    s.sessions.insert(session.clone(), Instant::now());
    session_reply(&s, &session)
}

async fn guided_view(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let id = checked_id("session", id)?;
    let session = s.sessions.get(&id, Instant::now()).map_err(|e| ApiError::store("session", e))?;
    session_reply(&s, &session)
}

#[derive(Deserialize)]
struct AnswerBody {
    option: String,
}

async fn guided_answer(
    State(s): State<Arc<AppState>>,
    Path(id): Path<String>,
    req: Result<Json<AnswerBody>, JsonRejection>,
) -> ApiResult {
    let id = checked_id("session", id)?;
    let req = body(req)?;
    let now = Instant::now();
    let session = s.sessions.get(&id, now).map_err(|e| ApiError::store("session", e))?;
    let next = session.answer(&s.taxonomy, &req.option)?;
    s.sessions.replace(next.clone(), now).map_err(|e| ApiError::store("session", e))?;
    session_reply(&s, &next)
}

async fn guided_back(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let id = checked_id("session", id)?;
    let now = Instant::now();
    let session = s.sessions.get(&id, now).map_err(|e| ApiError::store("session", e))?;
    let prev = session.back(&s.taxonomy)?;
    s.sessions.replace(prev.clone(), now).map_err(|e| ApiError::store("session", e))?;
    session_reply(&s, &prev)
}

#[derive(Deserialize)]
struct SearchQuery {
    q: String,
    mode: Option<String>,
}

async fn search(State(s): State<Arc<AppState>>, q: Result<Query<SearchQuery>, QueryRejection>) -> ApiResult {
    let q = query(q)?;
    let mode: Mode = match &q.mode {
        Some(m) => {
            m.parse().map_err(|e: lighthouse_core::textsearch::SearchError| ApiError::BadRequest(e.to_string()))?
        }
        None => Mode::All,
    };
    reply(json!({
        "query": q.q,
        "mode": mode,
        "terms": s.index.query_terms(&q.q),
        "corrected_query": s.index.correct_query(&q.q),
        "results": s.index.query(&q.q, mode),
    }))
}

#[derive(Deserialize)]
struct CompleteQuery {
    prefix: String,
}

async fn complete(State(s): State<Arc<AppState>>, q: Result<Query<CompleteQuery>, QueryRejection>) -> ApiResult {
    let q = query(q)?;
    reply(json!({ "prefix": q.prefix, "suggestions": s.index.autocomplete(&q.prefix) }))
}

async fn routine(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let doc = s.taxonomy.routine_doc(&id).or_else(|_| s.taxonomy.routine_doc(&id.to_uppercase()))?;
    reply(doc)
}

async fn advanced(State(s): State<Arc<AppState>>, req: Result<Json<FacetFilter>, JsonRejection>) -> ApiResult {
    let filter = body(req)?;
    let results: Vec<RoutineSummary> = s.taxonomy.filter(&filter).into_iter().map(Into::into).collect();
    reply(json!({ "results": results }))
}

fn multipart_error(e: axum::extract::multipart::MultipartError, cap: u64) -> ApiError {
    if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::TooLarge { cap }
    } else {
        ApiError::BadRequest(e.body_text())
    }
}

fn analyze(bytes: &[u8]) -> Result<UploadInfo, ApiError> {
    let m = parse_matrix_market(Cursor::new(bytes))?;
    let analysis = measure_features(&m)
        .and_then(|(features, timing)| {
            Ok(MatrixAnalysis { features, extended: compute_extended_features(&m)?, timing })
        })
        .map_err(|e| e.to_string());
    Ok(UploadInfo { n_rows: m.n_rows(), n_cols: m.n_cols(), nnz: m.nnz(), analysis })
}

/// Accepts one Matrix Market file in the multipart field `file`.
async fn upload_matrix(
    State(s): State<Arc<AppState>>,
    mp: Result<Multipart, axum::extract::multipart::MultipartRejection>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let cap = s.config.upload_cap;
    let mut mp = mp.map_err(|e| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::TooLarge { cap }
        } else {
            ApiError::BadRequest(e.body_text())
        }
    })?;
    let mut file: Option<(String, Vec<u8>)> = None;
    while let Some(mut field) = mp.next_field().await.map_err(|e| multipart_error(e, cap))? {
        if field.name() != Some("file") {
            continue;
        }
        let name = field.file_name().unwrap_or("matrix.mtx").to_string();
        let mut bytes = Vec::new();
        while let Some(chunk) = field.chunk().await.map_err(|e| multipart_error(e, cap))? {
            if (bytes.len() + chunk.len()) as u64 > cap {
                return Err(ApiError::TooLarge { cap });
            }
            bytes.extend_from_slice(&chunk);
        }
        file = Some((name, bytes));
    }
    let (name, bytes) = file.ok_or_else(|| ApiError::BadRequest("missing multipart field `file`".into()))?;
    let state = s.clone();
    let record = blocking(move || -> Result<_, ApiError> {
        let info = analyze(&bytes)?;
        state.uploads.put(&name, &bytes, Arc::new(info), Instant::now()).map_err(|e| ApiError::Internal(e.to_string()))
    })
    .await??;
    let info = &record.meta;
    let v = reply(json!({
        "upload_id": record.id,
        "filename": record.filename,
        "size": record.size,
        "n_rows": info.n_rows,
        "n_cols": info.n_cols,
        "nnz": info.nnz,
        "expires_in_secs": s.config.ttl.as_secs(),
    }))?;
    Ok((StatusCode::CREATED, v))
}

fn upload_analysis(s: &AppState, id: String) -> Result<(String, Arc<UploadInfo>), ApiError> {
    let id = checked_id("upload", id)?;
    let record = s.uploads.get(&id, Instant::now()).map_err(|e| ApiError::store("upload", e))?;
    Ok((id, record.meta))
}

async fn matrix_features(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let (id, info) = upload_analysis(&s, id)?;
    let a = info.analysis.as_ref().map_err(|e| ApiError::domain("matrix_error", e))?;
    let per_feature: Vec<Value> =
        a.timing.per_feature.iter().map(|(name, secs)| json!({ "name": name, "seconds": secs })).collect();
    reply(json!({
        "upload_id": id,
        "features": a.features,
        "extended": a.extended,
        "timing": { "per_feature": per_feature, "total_seconds": a.timing.total_seconds },
    }))
}

#[derive(Deserialize)]
struct RecommendBody {
    upload_id: Option<String>,
    features: Option<BTreeMap<String, f64>>,
    #[serde(flatten)]
    options: RequestOptions,
}

async fn recommend(State(s): State<Arc<AppState>>, req: Result<Json<RecommendBody>, JsonRejection>) -> ApiResult {
    let req = body(req)?;
    let opts = &req.options;
    let features = match (req.upload_id.clone(), req.features) {
        (Some(id), None) => {
            let (_, info) = upload_analysis(&s, id)?;
            let a = info.analysis.as_ref().map_err(|e| ApiError::domain("matrix_error", e))?;
            opts.from_matrix(&a.extended)
        }
        (None, Some(f)) => opts.complete(f),
        _ => return Err(ApiError::BadRequest("give exactly one of `upload_id` and `features`".into())),
    };
    let rec = s.recommender.recommend(opts.slot(), &features).map_err(|e| match e {
        RecommendError::MissingFeatures(missing) => ApiError::Domain {
            code: "missing_feature",
            message: format!("missing features: {}", missing.join(", ")),
            detail: Some(json!({ "missing": missing })),
        },
        RecommendError::NoModel(slot) => ApiError::domain("no_model", format!("no model loaded for {slot}")),
        RecommendError::Model(e) => e.into(),
    })?;
    let problem = if opts.eigen { ProblemKind::Eigen } else { ProblemKind::Linear };
    reply(json!({
        "model": rec.model,
        "model_version": rec.model_version,
        "problem": problem,
        "parallel": opts.parallel,
        "request": opts.spec(),
        "best": rec.best,
        "configs": rec.configs,
        "options": rec.options,
        "upload_id": req.upload_id,
    }))
}

#[derive(Deserialize)]
struct BundleBody {
    routine_id: Option<String>,
    language: Option<String>,
    kind: Option<String>,
    recommendation: Option<String>,
    #[serde(default)]
    parallel: bool,
    upload_id: Option<String>,
}

fn templates(s: &AppState) -> Result<Option<TemplateStore>, ApiError> {
    match &s.config.template_dir {
        Some(dir) => Ok(Some(TemplateStore::from_dir(dir)?)),
        None => Ok(None),
    }
}

fn build_bundle(s: &AppState, req: &BundleBody) -> Result<(String, Bundle), ApiError> {
    let store = templates(s)?;
    if let Some(id) = &req.routine_id {
        if req.kind.is_some() || req.recommendation.is_some() {
            return Err(ApiError::BadRequest("`routine_id` excludes `kind` and `recommendation`".into()));
        }
        let language: Language = req.language.as_deref().unwrap_or("fortran90").parse()?;
        let routine = s.taxonomy.routine(id).or_else(|_| s.taxonomy.routine(&id.to_uppercase()))?;
        let bundle = match &store {
            Some(t) => routine_bundle_with(t, &BackendRegistry::standard(), routine, language)?,
            None => routine_bundle(&s.taxonomy, &routine.id, language)?,
        };
        return Ok((format!("{}_{}.zip", routine.name.to_lowercase(), language.extension()), bundle));
    }
    if req.language.as_deref().is_some_and(|l| !l.eq_ignore_ascii_case("c")) {
        return Err(ApiError::BadRequest("solver bundles are C programs".into()));
    }
    let config: Option<SolverConfig> = match &req.recommendation {
        Some(label) => {
            Some(label.parse().map_err(|e: lighthouse_core::mlselect::MlError| ApiError::BadRequest(e.to_string()))?)
        }
        None => None,
    };
    let kind: BundleKind = match (&req.kind, &config) {
        (Some(k), _) => k.parse()?,
        (None, Some(_)) => BundleKind::RecommendedSolver,
        (None, None) => return Err(ApiError::BadRequest("give `routine_id`, `kind` or `recommendation`".into())),
    };
    let bundle = match &store {
        Some(t) => generate_solver_bundle_with(t, kind, config.as_ref(), req.parallel)?,
        None => generate_solver_bundle(kind, config.as_ref(), req.parallel)?,
    };
    let family = if config.as_ref().is_some_and(|c| c.kind() == ProblemKind::Eigen) { "slepc" } else { "petsc" };
    Ok((format!("{family}_{kind}.zip"), bundle))
}

fn store_archive(
    s: &AppState,
    filename: &str,
    bundle: &Bundle,
    upload_id: Option<String>,
) -> Result<crate::FileRecord<Arc<DownloadInfo>>, ApiError> {
    let bytes = package_archive(bundle)?;
    let info = DownloadInfo { upload_id, files: bundle.manifest() };
    s.downloads.put(filename, &bytes, Arc::new(info), Instant::now()).map_err(|e| ApiError::Internal(e.to_string()))
}

async fn bundle(
    State(s): State<Arc<AppState>>,
    req: Result<Json<BundleBody>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let req = body(req)?;
    let upload_id = match req.upload_id.clone() {
        Some(id) => Some(upload_analysis(&s, id)?.0),
        None => None,
    };
    let state = s.clone();
    let record = blocking(move || -> Result<_, ApiError> {
        let (filename, bundle) = build_bundle(&state, &req)?;
        store_archive(&state, &filename, &bundle, upload_id)
    })
    .await??;
    let v = reply(json!({
        "download_id": record.id,
        "filename": record.filename,
        "size": record.size,
        "files": record.meta.files,
        "expires_in_secs": s.config.ttl.as_secs(),
    }))?;
    Ok((StatusCode::CREATED, v))
}

/// Sends the archive once. The record is consumed before the file is read,
/// so a concurrent request or sweep cannot deliver or delete it twice.
async fn download(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = checked_id("download", id)?;
    let now = Instant::now();
    let record = s.downloads.take(&id, now).map_err(|e| ApiError::store("download", e))?;
    let bytes = tokio::fs::read(&record.path).await.map_err(|e| ApiError::Internal(e.to_string()));
    s.downloads.finish(&record);
    if let Some(upload) = &record.meta.upload_id {
        s.uploads.remove(upload, now);
    }
    let disposition = format!("attachment; filename=\"{}\"", record.filename.replace(['"', '\\'], "_"));
    let disposition = HeaderValue::from_str(&disposition).map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(([(CONTENT_TYPE, HeaderValue::from_static("application/zip")), (CONTENT_DISPOSITION, disposition)], bytes?)
        .into_response())
}

#[derive(Deserialize)]
struct KernelBody {
    text: String,
    #[serde(default)]
    seeds: BTreeMap<String, SeedSpec>,
    #[serde(default)]
    download: bool,
}

async fn kernel(State(s): State<Arc<AppState>>, req: Result<Json<KernelBody>, JsonRejection>) -> ApiResult {
    let req = body(req)?;
    let seeds = resolve_seeds(&req.seeds)?;
    let text = req.text;
    let k = blocking(move || compile_kernel(&text, &seeds)).await??;
    let download_id = if req.download {
        let bundle = Bundle::new(vec![
            lighthouse_core::codegen::BundleFile { path: k.source_file(), bytes: k.source.clone().into_bytes() },
            lighthouse_core::codegen::BundleFile {
                path: k.manifest_file(),
                bytes: k.manifest_json.clone().into_bytes(),
            },
        ])?;
        let state = s.clone();
        let filename = format!("{}.zip", k.name);
        Some(blocking(move || store_archive(&state, &filename, &bundle, None)).await??.id)
    } else {
        None
    };
    reply(json!({
        "kernel": k.name,
        "source_file": k.source_file(),
        "source": k.source,
        "manifest": k.manifest,
        "download_id": download_id,
    }))
}
