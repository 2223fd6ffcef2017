//! Local HTTP+JSON interface to analysis sessions.
//!
//! A session holds one workspace and a version counter. Reads are served
//! from the current snapshot; every mutation names the version it was
//! computed against and is rejected with 409 when another mutation got there
//! first. See [`router`] for the endpoint list.

mod error;
mod session;

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::FromRequestParts;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use rpys_core::disambiguation::{ClusterParams, MergeSummary};
use rpys_core::ingest::{parse_export_bytes, ImportConfig, ParseReport, YearWindow};
use rpys_core::spectroscopy::{
    cocitation_filter, detect_peaks, spectrum, top_contributors, year_shares, FilterOutcome,
    MarkerMode, MarkerSpec, SpectrumPoint,
};
use rpys_core::store::{
    decode_workspace, encode_workspace, graph_range, looks_like_workspace, render_cr_table,
    render_graph, ClusterId, Info, Operation, VariantId, Workspace,
};
use rpys_core::Year;

pub use error::ApiError;
pub use session::{Session, Sessions, Snapshot};

/// Default cap on uploaded export and workspace files.
pub const DEFAULT_MAX_UPLOAD: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_upload: usize,
    /// Directory served at `/`, typically the built explorer UI.
    pub assets: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_upload: DEFAULT_MAX_UPLOAD,
            assets: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub sessions: Arc<Sessions>,
    max_upload: usize,
}

/// Builds the application:
///
/// | method | path | |
/// |---|---|---|
/// | POST | `/sessions` | upload an export (`?rpy=&py=&max_cr=`) or a workspace file |
/// | GET, DELETE | `/sessions/{id}` | session summary / close |
/// | GET | `/sessions/{id}/spectrum?lo&hi` | spectrum points |
/// | GET | `/sessions/{id}/years/{rpy}/refs?sort=ncr&share=0.1` | year drill-down |
/// | GET | `/sessions/{id}/peaks?min_dev&lo&hi` | peak years |
/// | GET | `/sessions/{id}/export?type=CSV_CR\|CSV_GRAPH` | CSV bytes |
/// | GET | `/sessions/{id}/workspace` | workspace file |
/// | GET | `/sessions/{id}/history` | replayable operations |
/// | POST | `/sessions/{id}/cluster` | cluster, and merge unless `merge: false` |
/// | POST | `/sessions/{id}/merge` | manual merge of `variant_ids` |
/// | POST | `/sessions/{id}/split` | undo the last merge of `variant_id` |
/// | POST | `/sessions/{id}/filter` | co-citation filter |
/// | POST | `/sessions/{id}/remove-ncr` | drop variants with `lo <= ncr <= hi` |
///
/// Every POST on a session takes `expected_version`.
pub fn router(config: ServiceConfig) -> Router {
    let state = AppState {
        sessions: Arc::new(Sessions::default()),
        max_upload: config.max_upload,
    };
    let api = Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/spectrum", get(get_spectrum))
        .route("/sessions/{id}/years/{rpy}/refs", get(get_year_refs))
        .route("/sessions/{id}/peaks", get(get_peaks))
        .route("/sessions/{id}/export", get(get_export))
        .route("/sessions/{id}/workspace", get(get_workspace))
        .route("/sessions/{id}/history", get(get_history))
        .route("/sessions/{id}/cluster", post(post_cluster))
        .route("/sessions/{id}/merge", post(post_merge))
        .route("/sessions/{id}/split", post(post_split))
        .route("/sessions/{id}/filter", post(post_filter))
        .route("/sessions/{id}/remove-ncr", post(post_remove_ncr))
        .layer(DefaultBodyLimit::max(config.max_upload))
        .with_state(state);
    match config.assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async {
            (
                StatusCode::NOT_FOUND,
                "no UI assets configured; the JSON API lives under /sessions",
            )
        }),
    }
}

/// Serves `app` until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app).await
}

// ----------------------------------------------------------------- helpers

/// `Query` whose rejections come back as 422 with the JSON error body.
struct Q<T>(T);

impl<T, S> FromRequestParts<S> for Q<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        Query::<T>::from_request_parts(parts, state)
            .await
            .map(|Query(q)| Q(q))
            .map_err(|e| ApiError::invalid("query", e.body_text()))
    }
}

fn parse_json<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::Invalid {
        field: None,
        message: format!("invalid request body: {e}"),
    })
}

fn body_bytes(body: Result<Bytes, BytesRejection>, limit: usize) -> Result<Bytes, ApiError> {
    body.map_err(|r| {
        if r.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::TooLarge { limit }
        } else {
            ApiError::invalid("body", r.body_text())
        }
    })
}

fn parse_year_param(field: &str, value: &str) -> Result<Year, ApiError> {
    value
        .trim()
        .parse()
        .map_err(|_| ApiError::invalid(field, format!("`{value}` is not a year")))
}

fn range(ws: &Workspace, lo: Option<&str>, hi: Option<&str>) -> Result<(Year, Year), ApiError> {
    let lo = lo.map(|v| parse_year_param("lo", v)).transpose()?;
    let hi = hi.map(|v| parse_year_param("hi", v)).transpose()?;
    match (lo, hi) {
        (Some(lo), Some(hi)) => Ok((lo, hi)),
        _ => {
            let (glo, ghi) = graph_range(ws)?;
            Ok((lo.unwrap_or(glo), hi.unwrap_or(ghi)))
        }
    }
}

#[derive(Serialize)]
struct SessionView {
    session_id: String,
    version: u64,
    info: Info,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<ParseReport>,
}

#[derive(Serialize)]
struct Mutation<T: Serialize> {
    version: u64,
    info: Info,
    #[serde(flatten)]
    result: T,
}

fn mutation<T: Serialize>(snap: &Snapshot, result: T) -> Json<Mutation<T>> {
    Json(Mutation {
        version: snap.version,
        info: snap.workspace.info(),
        result,
    })
}

// ---------------------------------------------------------------- sessions

#[derive(Deserialize)]
struct CreateQuery {
    rpy: Option<String>,
    py: Option<String>,
    max_cr: Option<usize>,
}

async fn create_session(
    State(state): State<AppState>,
    Q(q): Q<CreateQuery>,
    body: Result<Bytes, BytesRejection>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let body = body_bytes(body, state.max_upload)?;
    if body.is_empty() {
        return Err(ApiError::invalid("file", "empty upload"));
    }
    let window = |field: &str, v: &Option<String>| -> Result<Option<YearWindow>, ApiError> {
        v.as_deref()
            .map(|s| {
                s.parse()
                    .map_err(|e: rpys_core::Error| ApiError::invalid(field, e.to_string()))
            })
            .transpose()
    };
    let config = ImportConfig {
        rpy_window: window("rpy", &q.rpy)?,
        py_window: window("py", &q.py)?,
        max_cr_per_record: q.max_cr.unwrap_or(0),
    };
    let (workspace, report) = tokio::task::spawn_blocking(move || -> Result<_, ApiError> {
        if looks_like_workspace(&body) {
            if config != ImportConfig::default() {
                return Err(ApiError::invalid(
                    "query",
                    "rpy, py and max_cr apply to export uploads, not to workspace files",
                ));
            }
            Ok((decode_workspace(&body)?, None))
        } else {
            let (records, report) = parse_export_bytes(&body, &config)?;
            Ok((Workspace::aggregate(records, config), Some(report)))
        }
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    let info = workspace.info();
    let (session_id, session) = state.sessions.insert(workspace);
    Ok((
        StatusCode::CREATED,
        Json(SessionView {
            session_id,
            version: session.snapshot().version,
            info,
            report,
        }),
    ))
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let snap = state.sessions.get(&id)?.snapshot();
    Ok(Json(SessionView {
        session_id: id,
        version: snap.version,
        info: snap.workspace.info(),
        report: None,
    }))
}

async fn delete_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    state.sessions.remove(&id)?;
    Ok(StatusCode::NO_CONTENT)
}

// ------------------------------------------------------------------- reads

#[derive(Deserialize)]
struct RangeQuery {
    lo: Option<String>,
    hi: Option<String>,
}

async fn get_spectrum(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Q(q): Q<RangeQuery>,
) -> Result<Json<Vec<SpectrumPoint>>, ApiError> {
    let snap = state.sessions.get(&id)?.snapshot();
    let (lo, hi) = range(&snap.workspace, q.lo.as_deref(), q.hi.as_deref())?;
    Ok(Json(spectrum(&snap.workspace, lo, hi)?))
}

#[derive(Deserialize)]
struct RefsQuery {
    sort: Option<String>,
    share: Option<f64>,
}

#[derive(Serialize)]
struct RefRow {
    variant_id: VariantId,
    raw: String,
    ncr: usize,
    share: f64,
    above_threshold: bool,
    merged: bool,
    manually_merged: bool,
    /// Cluster of the variant in the most recent clustering, if any.
    cluster_id: Option<ClusterId>,
}

#[derive(Serialize)]
struct YearRefs {
    rpy: Year,
    version: u64,
    total_ncr: usize,
    share_threshold: f64,
    refs: Vec<RefRow>,
}

async fn get_year_refs(
    State(state): State<AppState>,
    Path((id, rpy)): Path<(String, String)>,
    Q(q): Q<RefsQuery>,
) -> Result<Json<YearRefs>, ApiError> {
    let snap = state.sessions.get(&id)?.snapshot();
    let rpy = parse_year_param("rpy", &rpy)?;
    let threshold = q.share.unwrap_or(0.1);
    let ws = &snap.workspace;
    let top: Vec<VariantId> = top_contributors(ws, rpy, threshold)?
        .into_iter()
        .map(|c| c.variant_id)
        .collect();
    let mut shares = year_shares(ws, rpy);
    match q.sort.as_deref().unwrap_or("ncr") {
        "ncr" => {}
        "raw" => shares.sort_by(|a, b| a.raw.cmp(&b.raw)),
        other => {
            return Err(ApiError::invalid(
                "sort",
                format!("unknown sort `{other}` (expected ncr or raw)"),
            ))
        }
    }
    let refs = shares
        .into_iter()
        .map(|c| RefRow {
            above_threshold: top.contains(&c.variant_id),
            merged: ws.is_merged(c.variant_id),
            manually_merged: ws.is_manually_merged(c.variant_id),
            cluster_id: ws
                .last_assignment()
                .and_then(|a| a.cluster_of(c.variant_id)),
            variant_id: c.variant_id,
            raw: c.raw,
            ncr: c.ncr,
            share: c.share,
        })
        .collect::<Vec<_>>();
    Ok(Json(YearRefs {
        rpy,
        version: snap.version,
        total_ncr: refs.iter().map(|r| r.ncr).sum(),
        share_threshold: threshold,
        refs,
    }))
}

#[derive(Deserialize)]
struct PeaksQuery {
    min_dev: Option<f64>,
    lo: Option<String>,
    hi: Option<String>,
}

async fn get_peaks(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Q(q): Q<PeaksQuery>,
) -> Result<Json<Vec<SpectrumPoint>>, ApiError> {
    let snap = state.sessions.get(&id)?.snapshot();
    let (lo, hi) = range(&snap.workspace, q.lo.as_deref(), q.hi.as_deref())?;
    let points = spectrum(&snap.workspace, lo, hi)?;
    let years = detect_peaks(&points, q.min_dev.unwrap_or(1.0));
    Ok(Json(
        points
            .into_iter()
            .filter(|p| years.binary_search(&p.rpy).is_ok())
            .collect(),
    ))
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(rename = "type")]
    kind: Option<String>,
}

async fn get_export(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Q(q): Q<ExportQuery>,
) -> Result<Response, ApiError> {
    let snap = state.sessions.get(&id)?.snapshot();
    let (text, name) = match q.kind.as_deref().unwrap_or("CSV_CR") {
        "CSV_CR" => (render_cr_table(&snap.workspace), "cr.csv"),
        "CSV_GRAPH" => (render_graph(&snap.workspace)?, "graph.csv"),
        other => {
            return Err(ApiError::invalid(
                "type",
                format!("unsupported export type `{other}` (expected CSV_CR or CSV_GRAPH)"),
            ))
        }
    };
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_owned()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{name}\""),
            ),
        ],
        text,
    )
        .into_response())
}

async fn get_workspace(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let snap = state.sessions.get(&id)?.snapshot();
    Ok((
        [
            (header::CONTENT_TYPE, "application/octet-stream"),
            (
                header::CONTENT_DISPOSITION,
                "attachment; filename=\"workspace.rpys\"",
            ),
        ],
        encode_workspace(&snap.workspace),
    )
        .into_response())
}

#[derive(Serialize)]
struct History {
    version: u64,
    operations: Vec<Operation>,
}

async fn get_history(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<History>, ApiError> {
    let snap = state.sessions.get(&id)?.snapshot();
    Ok(Json(History {
        version: snap.version,
        operations: snap.workspace.history().to_vec(),
    }))
}

// --------------------------------------------------------------- mutations

fn default_true() -> bool {
    true
}

#[derive(Deserialize)]
struct ClusterBody {
    threshold: f64,
    #[serde(default = "default_true")]
    use_volume: bool,
    #[serde(default = "default_true")]
    use_page: bool,
    #[serde(default)]
    use_doi: bool,
    #[serde(default = "default_true")]
    merge: bool,
    expected_version: u64,
}

#[derive(Serialize)]
struct ClusterResult {
    clusters: usize,
    multi_member: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    merge: Option<MergeSummary>,
}

async fn post_cluster(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let b: ClusterBody = parse_json(&body_bytes(body, state.max_upload)?)?;
    let params = ClusterParams {
        threshold: b.threshold,
        use_volume: b.use_volume,
        use_page: b.use_page,
        use_doi: b.use_doi,
    };
    let session = state.sessions.get(&id)?;
    let (snap, result) = session
        .mutate(b.expected_version, move |ws| {
            let asg = ws.apply_clustering(&params)?;
            let merge = if b.merge {
                Some(ws.merge_last_assignment()?)
            } else {
                None
            };
            Ok(ClusterResult {
                clusters: asg.len(),
                multi_member: asg.multi_member().count(),
                merge,
            })
        })
        .await?;
    Ok(mutation(&snap, result).into_response())
}

#[derive(Deserialize)]
struct MergeBody {
    variant_ids: Vec<VariantId>,
    expected_version: u64,
}

#[derive(Serialize)]
struct MergeResult {
    merged_id: VariantId,
}

async fn post_merge(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let b: MergeBody = parse_json(&body_bytes(body, state.max_upload)?)?;
    let session = state.sessions.get(&id)?;
    let (snap, merged_id) = session
        .mutate(b.expected_version, move |ws| {
            ws.manual_merge(&b.variant_ids)?.ok_or_else(|| {
                ApiError::invalid(
                    "variant_ids",
                    "at least two distinct variant ids are needed",
                )
            })
        })
        .await?;
    Ok(mutation(&snap, MergeResult { merged_id }).into_response())
}

#[derive(Deserialize)]
struct SplitBody {
    variant_id: VariantId,
    expected_version: u64,
}

#[derive(Serialize)]
struct SplitResult {
    restored: Vec<VariantId>,
}

async fn post_split(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let b: SplitBody = parse_json(&body_bytes(body, state.max_upload)?)?;
    let session = state.sessions.get(&id)?;
    let (snap, restored) = session
        .mutate(b.expected_version, move |ws| {
            Ok(ws.manual_split(b.variant_id)?)
        })
        .await?;
    Ok(mutation(&snap, SplitResult { restored }).into_response())
}

/// A marker as `"author=Liu,rpy=1960"` text or as a JSON object.
#[derive(Deserialize)]
#[serde(untagged)]
enum MarkerInput {
    Text(String),
    Spec(MarkerSpec),
}

#[derive(Deserialize)]
struct FilterBody {
    markers: Vec<MarkerInput>,
    #[serde(default)]
    mode: MarkerMode,
    expected_version: u64,
}

async fn post_filter(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let b: FilterBody = parse_json(&body_bytes(body, state.max_upload)?)?;
    let markers = b
        .markers
        .into_iter()
        .map(|m| match m {
            MarkerInput::Text(s) => s.parse::<MarkerSpec>(),
            MarkerInput::Spec(spec) => spec.validate().map(|_| spec),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let session = state.sessions.get(&id)?;
    let (snap, outcome): (_, FilterOutcome) = session
        .mutate(b.expected_version, move |ws| {
            Ok(cocitation_filter(ws, &markers, b.mode)?)
        })
        .await?;
    Ok(mutation(&snap, outcome).into_response())
}

#[derive(Deserialize)]
struct RemoveBody {
    lo: usize,
    hi: usize,
    expected_version: u64,
}

#[derive(Serialize)]
struct RemoveResult {
    removed: usize,
}

async fn post_remove_ncr(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let b: RemoveBody = parse_json(&body_bytes(body, state.max_upload)?)?;
    let session = state.sessions.get(&id)?;
    let (snap, removed) = session
        .mutate(b.expected_version, move |ws| {
            Ok(ws.remove_by_ncr(b.lo, b.hi)?)
        })
        .await?;
    Ok(mutation(&snap, RemoveResult { removed }).into_response())
}
